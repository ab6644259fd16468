#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ccftl/federation.hpp"
#include "ccftl/features.hpp"
#include "ccftl/metrics.hpp"
#include "ccftl/models.hpp"
#include "ccftl/synthgen.hpp"

namespace ccftl::transfer {

using models::Tensor2D;

inline constexpr double kDefaultLabelFraction = 0.20;
inline constexpr std::size_t kDefaultFineTuneEpochs = 50;
/// Value the consumption feature takes when no imputation is available.
inline constexpr double kUninformativeCp = 0.5;

/// Source cities plus one data-insufficient target city.
struct Scenario {
  std::vector<synth::CityDataset> sources;
  synth::CityDataset target;
};

/// Generator settings for a scenario. City seeds are mixed with the run seed
/// so each experiment seed sees fresh cities.
struct ScenarioSpec {
  std::vector<synth::CityGenConfig> sources;
  synth::CityGenConfig target;
  synth::RelationalGroundTruth relation;
};

/// Two sources and one target, 3000 regions each, distinct POI mixes.
ScenarioSpec default_scenario_spec();
/// Copy of `spec` with exactly `n_sources` sources; extra sources get seeded
/// random category mixes.
ScenarioSpec with_source_count(const ScenarioSpec& spec, std::size_t n_sources);
Scenario make_scenario(const ScenarioSpec& spec, std::uint64_t seed);

/// Target rows after per-city normalization. `cp_truth` is for evaluation only.
struct TargetTable {
  std::string city_id;
  std::vector<features::Region> regions;
  Tensor2D x_base;
  std::vector<int> labels;
  std::vector<double> cp_truth;
};

struct PreparedScenario {
  std::vector<models::TrainingTable> sources;
  std::vector<std::string> source_ids;
  TargetTable target;
  std::size_t base_width = 0;
};

/// Normalizes every city with its own min-max statistics. Sources keep their
/// consumption column as the regression target; the target's consumption is
/// withheld from its features.
PreparedScenario prepare_scenario(const Scenario& scenario);
models::TrainingTable prepare_source(const synth::CityDataset& city, std::size_t domain_index,
                                     std::size_t n_domains);
TargetTable prepare_target(const synth::CityDataset& city);

struct TargetSplit {
  std::vector<std::size_t> labeled;
  std::vector<std::size_t> unlabeled;
  double label_fraction = kDefaultLabelFraction;
};

/// Random labeled/unlabeled partition; at least one region on each side when n >= 2.
TargetSplit make_split(std::size_t n, double label_fraction, std::uint64_t seed);

/// Frozen regressor pass over the target's normalized features.
std::vector<double> impute_missing(const models::DarklModel& darkl, const Tensor2D& target_features);

struct FineTuneOptions {
  std::size_t epochs = kDefaultFineTuneEpochs;
  double lr = models::kDefaultLearningRate;
  std::size_t batch_size = models::kDefaultBatchSize;
};

struct FineTuneResult {
  models::UtpModel utp;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

/// Updates only the task predictor, on the labeled split, with the imputed
/// consumption appended to the target features.
FineTuneResult fine_tune(const models::UtpModel& utp, const Tensor2D& x_full, std::span<const int> labels,
                         const TargetSplit& split, const FineTuneOptions& opts, std::uint64_t seed);

std::vector<int> predict(const models::UtpModel& utp, const Tensor2D& x_full);

enum class Variant { full, no_darkl, no_utp, no_finetune, no_domain_classifier, target_only };

inline constexpr Variant kAllVariants[] = {Variant::full,        Variant::no_darkl,
                                           Variant::no_utp,      Variant::no_finetune,
                                           Variant::no_domain_classifier, Variant::target_only};

const char* to_string(Variant v);
Variant parse_variant(const std::string& s);

struct ExperimentSettings {
  models::ModelDims dims;
  double lambda = models::kDefaultLambda;
  double lr = models::kDefaultLearningRate;
  std::size_t batch_size = models::kDefaultBatchSize;
  std::size_t rounds = fed::kDefaultRounds;
  std::size_t local_epochs = fed::kDefaultLocalEpochs;
  std::size_t fine_tune_epochs = kDefaultFineTuneEpochs;
  double label_fraction = kDefaultLabelFraction;
  fed::AggregationMode mode = fed::AggregationMode::plaintext;
  unsigned key_bits = fed::kDefaultKeyBits;
  int scale_bits = fed::kDefaultScaleBits;
  bool record_timing = false;
};

struct MetricsReport {
  double mae = 0.0;
  double mse = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::vector<std::size_t> class_counts;
  double epoch_time_s = 0.0;
};

/// Output of federated training on the sources.
struct Stage1Result {
  models::DarklModel darkl;
  models::UtpModel utp;
  std::vector<fed::RoundRecord> round_log;
  double epoch_time_s = 0.0;
};

Stage1Result run_stage1(const PreparedScenario& scenario, const ExperimentSettings& settings, double lambda,
                        std::uint64_t seed, bool train_utp = true, const fed::RoundObserver& observer = {});

/// Everything Stage II produces for one target city.
struct TransferOutcome {
  MetricsReport report;
  std::vector<double> cp_hat;
  std::vector<int> predicted;  // every target region
  TargetSplit split;
  std::optional<models::UtpModel> tuned;
};

/// Imputes, fine-tunes and evaluates. `darkl` absent means no imputation (the
/// consumption feature is held at kUninformativeCp); `utp` absent means the
/// task predictor starts from a fresh initialization.
TransferOutcome run_stage2(const PreparedScenario& scenario, const ExperimentSettings& settings,
                           const models::DarklModel* darkl, const models::UtpModel* utp, bool finetune,
                           std::uint64_t seed);

/// Caches Stage I per lambda so variants sharing a federated run train it once.
class Stage1Cache {
 public:
  const Stage1Result& get(const PreparedScenario& scenario, const ExperimentSettings& settings, double lambda,
                          std::uint64_t seed);

 private:
  std::vector<std::pair<double, Stage1Result>> entries_;
};

struct VariantResult {
  Variant variant;
  TransferOutcome outcome;
};

VariantResult run_variant(Variant variant, const PreparedScenario& scenario, const ExperimentSettings& settings,
                          std::uint64_t seed, Stage1Cache* cache = nullptr);

enum class SweepKind { lambda, label_fraction, client_count };

const char* to_string(SweepKind k);
SweepKind parse_sweep_kind(const std::string& s);
std::vector<double> default_grid(SweepKind k);
void validate_grid(SweepKind k, std::span<const double> grid);

struct SweepRow {
  SweepKind kind;
  double value = 0.0;
  std::uint64_t seed = 0;
  MetricsReport report;
};

/// Runs the full variant for each (grid point, seed) on fresh scenarios.
std::vector<SweepRow> sweep(SweepKind kind, std::span<const double> grid, const ScenarioSpec& spec,
                            const ExperimentSettings& settings, std::span<const std::uint64_t> seeds);

}  // namespace ccftl::transfer
