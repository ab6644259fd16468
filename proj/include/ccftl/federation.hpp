#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ccftl/models.hpp"
#include "ccftl/paillier.hpp"

namespace ccftl::fed {

using nn::ParamVector;

inline constexpr std::size_t kDefaultRounds = 200;
inline constexpr std::size_t kDefaultLocalEpochs = 1;

enum class AggregationMode { plaintext, encrypted };

const char* to_string(AggregationMode mode);
AggregationMode parse_mode(const std::string& s);

/// Sample-count weighted mean, summed in list order.
ParamVector fedavg(std::span<const ParamVector> params, std::span<const std::size_t> weights);

struct ClientState {
  std::string city_id;
  models::TrainingTable data;
  models::DarklModel darkl;
  models::UtpModel utp;

  std::size_t n_samples() const { return data.size(); }
};

/// Aggregation server for encrypted rounds. It is constructed from a public
/// key and only ever sees ciphertexts and the public sample counts.
class EncryptedAggregator {
 public:
  explicit EncryptedAggregator(PublicKey pub) : pub_(std::move(pub)) {}

  const PublicKey& public_key() const { return pub_; }
  void submit(const CipherVector& upload);
  std::size_t submissions() const { return submissions_; }
  /// Homomorphic sum of all submissions; resets the aggregator.
  CipherVector aggregate();

 private:
  PublicKey pub_;
  std::optional<CipherVector> sum_;
  std::size_t submissions_ = 0;
};

struct FederatedConfig {
  std::size_t rounds = kDefaultRounds;
  std::size_t local_epochs = kDefaultLocalEpochs;
  models::TrainOptions train;
  AggregationMode mode = AggregationMode::plaintext;
  unsigned key_bits = kDefaultKeyBits;
  int scale_bits = kDefaultScaleBits;
  std::uint64_t seed = 1;
  /// Run client updates on worker threads; output is identical either way.
  bool parallel_clients = false;
  bool record_timing = false;
};

struct ClientRoundStats {
  std::string city_id;
  double l1 = 0.0;
  double l2 = 0.0;
};

struct RoundRecord {
  std::size_t round = 0;
  std::vector<ClientRoundStats> clients;  // ascending city id
  double wall_time_s = 0.0;
};

/// Passed to the observer after each aggregation. `uploads` are the clients'
/// plaintext parameters (simulation-side view, never given to the server).
struct RoundSnapshot {
  std::size_t round = 0;
  std::span<const ParamVector> uploads;
  std::span<const std::size_t> weights;
  const ParamVector& global;
};

using RoundObserver = std::function<void(const RoundSnapshot&)>;

struct FederatedResult {
  models::DarklModel darkl;
  models::UtpModel utp;
  ParamVector global_rk;
  ParamVector global_task;
  std::vector<RoundRecord> round_log;
};

/// Seed for one client's local epoch; depends on the client's identity, not
/// its position in the client list.
std::uint64_t client_epoch_seed(std::uint64_t run_seed, const std::string& city_id, std::size_t round,
                                std::size_t epoch);

/// Runs the full federated schedule. The initial global model is taken from
/// the first client (after sorting by city id); every client must share its
/// architecture.
FederatedResult run_federated_training(std::vector<ClientState> clients, const FederatedConfig& cfg,
                                       const RoundObserver& observer = {});

}  // namespace ccftl::fed
