#include "ccftl/federation.hpp"

#include <algorithm>
#include <chrono>
#include <thread>

#include "ccftl/error.hpp"
#include "ccftl/rng.hpp"

namespace ccftl::fed {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

bool same_shape(const nn::Mlp& a, const nn::Mlp& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    if (a.layers[i].in_dim() != b.layers[i].in_dim() || a.layers[i].out_dim() != b.layers[i].out_dim() ||
        a.layers[i].activation != b.layers[i].activation) {
      return false;
    }
  }
  return true;
}

struct ClientUpdate {
  ParamVector params;  // rk followed by task
  ClientRoundStats stats;
};

ClientUpdate client_update(const ClientState& client, const models::DarklModel& darkl_templ,
                           const models::UtpModel& utp_templ, const ParamVector& global_rk,
                           const ParamVector& global_task, const FederatedConfig& cfg, std::size_t round) {
  auto darkl = models::unflatten(darkl_templ, global_rk.values);
  auto utp = models::unflatten(utp_templ, global_task.values);
  models::EpochStats last;
  for (std::size_t e = 1; e <= cfg.local_epochs; ++e) {
    last = models::local_train_epoch(darkl, utp, client.data, cfg.train,
                                     client_epoch_seed(cfg.seed, client.city_id, round, e));
  }
  const ParamVector parts[] = {models::flatten(darkl), models::flatten(utp)};
  return {nn::concat(parts), {client.city_id, last.mean_l1, last.mean_l2}};
}

}  // namespace

const char* to_string(AggregationMode mode) {
  return mode == AggregationMode::plaintext ? "plaintext" : "encrypted";
}

AggregationMode parse_mode(const std::string& s) {
  if (s == "plaintext") return AggregationMode::plaintext;
  if (s == "encrypted") return AggregationMode::encrypted;
  fail(ErrorKind::invalid_argument, "unknown aggregation mode '" + s + "' (expected plaintext|encrypted)");
}

ParamVector fedavg(std::span<const ParamVector> params, std::span<const std::size_t> weights) {
  require(!params.empty(), ErrorKind::invalid_argument, "fedavg: no client parameters");
  require(params.size() == weights.size(), ErrorKind::invalid_argument, "fedavg: one weight per client required");
  const std::size_t len = params.front().size();
  std::size_t total = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    require(params[i].size() == len, ErrorKind::dimension_mismatch, "fedavg: parameter lengths differ");
    require(weights[i] > 0, ErrorKind::invalid_argument, "fedavg: weights must be positive");
    total += weights[i];
  }
  ParamVector out(len);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double w = static_cast<double>(weights[i]) / static_cast<double>(total);
    for (std::size_t j = 0; j < len; ++j) out[j] += w * params[i][j];
  }
  return out;
}

void EncryptedAggregator::submit(const CipherVector& upload) {
  require(upload.modulus == pub_.n, ErrorKind::crypto, "aggregator: upload encrypted under a foreign key");
  sum_ = sum_ ? add_cipher(*sum_, upload) : upload;
  ++submissions_;
}

CipherVector EncryptedAggregator::aggregate() {
  require(sum_.has_value(), ErrorKind::invalid_argument, "aggregator: nothing submitted");
  CipherVector out = std::move(*sum_);
  sum_.reset();
  submissions_ = 0;
  return out;
}

std::uint64_t client_epoch_seed(std::uint64_t run_seed, const std::string& city_id, std::size_t round,
                                std::size_t epoch) {
  return derive_seed(derive_seed(derive_seed(run_seed, fnv1a(city_id)), round), epoch);
}

FederatedResult run_federated_training(std::vector<ClientState> clients, const FederatedConfig& cfg,
                                       const RoundObserver& observer) {
  require(!clients.empty(), ErrorKind::invalid_argument, "run_federated_training: need at least one client");
  require(cfg.local_epochs >= 1, ErrorKind::invalid_argument, "run_federated_training: local_epochs must be >= 1");
  std::stable_sort(clients.begin(), clients.end(),
                   [](const ClientState& a, const ClientState& b) { return a.city_id < b.city_id; });

  const auto& first = clients.front();
  for (const auto& c : clients) {
    require(c.n_samples() > 0, ErrorKind::invalid_argument, "run_federated_training: client without data");
    require(same_shape(c.darkl.feature_extractor, first.darkl.feature_extractor) &&
                same_shape(c.darkl.data_regressor, first.darkl.data_regressor) &&
                same_shape(c.darkl.domain_classifier, first.darkl.domain_classifier) &&
                same_shape(c.utp.net, first.utp.net),
            ErrorKind::dimension_mismatch, "run_federated_training: client models differ in shape");
  }

  const models::DarklModel darkl_templ = first.darkl;
  const models::UtpModel utp_templ = first.utp;
  const std::size_t rk_len = darkl_templ.param_count();

  FederatedResult result;
  result.global_rk = models::flatten(first.darkl);
  result.global_task = models::flatten(first.utp);

  std::vector<std::size_t> weights;
  std::size_t total = 0;
  for (const auto& c : clients) {
    weights.push_back(c.n_samples());
    total += c.n_samples();
  }

  std::optional<Keypair> keys;
  if (cfg.mode == AggregationMode::encrypted) keys = keygen(cfg.key_bits, derive_seed(cfg.seed, 0x6b6579));

  std::vector<ClientUpdate> updates(clients.size());
  for (std::size_t round = 1; round <= cfg.rounds; ++round) {
    const auto t0 = std::chrono::steady_clock::now();
    auto run_one = [&](std::size_t i) {
      updates[i] = client_update(clients[i], darkl_templ, utp_templ, result.global_rk, result.global_task, cfg, round);
    };
    if (cfg.parallel_clients && clients.size() > 1) {
      std::vector<std::jthread> workers;
      for (std::size_t i = 0; i < clients.size(); ++i) workers.emplace_back(run_one, i);
    } else {
      for (std::size_t i = 0; i < clients.size(); ++i) run_one(i);
    }

    std::vector<ParamVector> uploads;
    uploads.reserve(clients.size());
    for (auto& u : updates) uploads.push_back(u.params);

    ParamVector global;
    if (cfg.mode == AggregationMode::plaintext) {
      global = fedavg(uploads, weights);
    } else {
      EncryptedAggregator server(keys->pub);
      for (std::size_t i = 0; i < clients.size(); ++i) {
        const double share = static_cast<double>(weights[i]) / static_cast<double>(total);
        ParamVector scaled(uploads[i].size());
        for (std::size_t j = 0; j < scaled.size(); ++j) scaled[j] = share * uploads[i][j];
        const auto encoded = fp_encode(scaled, cfg.scale_bits);
        server.submit(encrypt_vector(server.public_key(), encoded, derive_seed(derive_seed(cfg.seed, round), i + 1)));
      }
      // Decryption happens on the key holders' side.
      global = fp_decode(decrypt_vector(*keys, server.aggregate()));
    }

    result.global_rk = ParamVector(std::vector<double>(global.values.begin(), global.values.begin() + static_cast<std::ptrdiff_t>(rk_len)));
    result.global_task = ParamVector(std::vector<double>(global.values.begin() + static_cast<std::ptrdiff_t>(rk_len), global.values.end()));

    RoundRecord rec;
    rec.round = round;
    for (const auto& u : updates) rec.clients.push_back(u.stats);
    if (cfg.record_timing) {
      rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    result.round_log.push_back(std::move(rec));
    if (observer) observer(RoundSnapshot{round, uploads, weights, global});
  }

  result.darkl = models::unflatten(darkl_templ, result.global_rk.values);
  result.utp = models::unflatten(utp_templ, result.global_task.values);
  return result;
}

}  // namespace ccftl::fed
