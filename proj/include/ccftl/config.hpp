#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ccftl/transfer.hpp"

namespace ccftl::config {

/// Everything a CLI run needs. Defaults reproduce the reference settings.
struct ExperimentConfig {
  transfer::ScenarioSpec scenario = transfer::default_scenario_spec();
  transfer::ExperimentSettings settings;
  std::uint64_t seed = 1;
  /// Seeds used by ablate/sweep; empty means just `seed`.
  std::vector<std::uint64_t> seeds;
  std::filesystem::path output_dir = "ccftl_out";
  transfer::SweepKind sweep_kind = transfer::SweepKind::lambda;
  /// Empty means the default grid for `sweep_kind`.
  std::vector<double> sweep_grid;

  std::vector<std::uint64_t> effective_seeds() const;
  std::vector<double> effective_grid() const;
};

/// YAML mapping of scalar keys plus `sources` (list of city blocks) and
/// `target` (one city block). Unknown keys and out-of-range values raise
/// ErrorKind::config with the offending key in the message.
ExperimentConfig parse_config(const std::filesystem::path& path);
ExperimentConfig parse_config_string(const std::string& text);

}  // namespace ccftl::config
