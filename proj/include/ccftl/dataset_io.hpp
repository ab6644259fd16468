#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ccftl/federation.hpp"
#include "ccftl/models.hpp"
#include "ccftl/synthgen.hpp"
#include "ccftl/transfer.hpp"

namespace ccftl::io {

namespace fs = std::filesystem;

/// Every CSV starts with "# ccftl-<kind> v<version>"; readers reject other versions.
inline constexpr int kCsvVersion = 1;

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

/// Region table: city_id,row,col,poi_c1..,road_c1..,wp,rp,cp,label with cp
/// and label left empty when missing.
void write_city_csv(const fs::path& path, const synth::CityDataset& city);
synth::CityDataset read_city_csv(const fs::path& path);

/// Evaluation-only sidecar for a target city: city_id,row,col,cp_true.
void write_truth_csv(const fs::path& path, const synth::CityDataset& city);
/// Fills `city.ground_truth_cp` from a sidecar written by write_truth_csv.
void read_truth_csv(const fs::path& path, synth::CityDataset& city);

/// Binary checkpoint, all integers and doubles little-endian:
///   char[8] "CCFTLCK1" | u32 kind (0 darkl, 1 utp) | f64 lambda | u32 n_stacks
///   per stack: u32 n_layers, then per layer u32 in, u32 out, u32 activation
///   u64 n_params | f64[n_params] in flatten() order
void save_checkpoint(const fs::path& path, const models::DarklModel& m);
void save_checkpoint(const fs::path& path, const models::UtpModel& m);
models::DarklModel load_darkl_checkpoint(const fs::path& path);
models::UtpModel load_utp_checkpoint(const fs::path& path);

/// Long format: round,city_id,l1,l2,wall_time_s.
void write_round_log(const fs::path& path, const std::vector<fed::RoundRecord>& log);

struct MetricsRow {
  std::string variant;
  std::string scenario;
  std::uint64_t seed = 0;
  transfer::MetricsReport report;
};

/// variant,scenario,seed,mae,mse,precision,recall,f1,epoch_time_s
void write_metrics_csv(const fs::path& path, const std::vector<MetricsRow>& rows, bool with_timing);
std::vector<MetricsRow> read_metrics_csv(const fs::path& path);

/// kind,value,seed,mae,mse,precision,recall,f1,epoch_time_s
void write_sweep_csv(const fs::path& path, const std::vector<transfer::SweepRow>& rows, bool with_timing);

/// city_id,row,col,predicted_level,cp_hat
struct PredictionRow {
  std::string city_id;
  std::size_t row = 0;
  std::size_t col = 0;
  int predicted_level = 0;
  double cp_hat = 0.0;
};

void write_predictions_csv(const fs::path& path, const std::vector<PredictionRow>& rows);
std::vector<PredictionRow> read_predictions_csv(const fs::path& path);

/// region_index,labeled
void write_split_csv(const fs::path& path, const transfer::TargetSplit& split, std::size_t n);
transfer::TargetSplit read_split_csv(const fs::path& path);

}  // namespace ccftl::io
