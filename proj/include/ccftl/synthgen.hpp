#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ccftl/features.hpp"

namespace ccftl::synth {

inline constexpr int kNumLevels = 5;

/// Per-city generation knobs. Domain shift comes from the category mixes and
/// the volume/population scales; the relation to consumption stays shared.
struct CityGenConfig {
  std::string city_id = "city";
  std::size_t n_regions = 3000;
  std::vector<double> poi_category_weights = std::vector<double>(features::kDefaultPoiCategories, 0.125);
  std::vector<double> road_category_weights = std::vector<double>(features::kDefaultRoadCategories, 0.25);
  double poi_volume_scale = 40.0;
  double pop_scale = 1000.0;
  /// Std-dev of the relational noise, in units of the normalized consumption value.
  double noise_sigma = 0.05;
  double label_skew = 2.0;
  double cell_size = features::kDefaultCellSize;
  std::uint64_t seed = 1;
};

/// cp / pop_scale = sigmoid(b0 + b1*entropy + b2*residential + b3*working + b4*poi_total)
/// with each input min-max normalized within its own city.
struct RelationalGroundTruth {
  std::array<double, 5> beta{-3.0, 2.5, 1.5, 2.0, 1.5};

  bool operator==(const RelationalGroundTruth&) const = default;
};

struct CityDataset {
  std::string city_id;
  std::vector<features::Region> regions;
  std::vector<features::RawRegionData> raw;
  /// Consumption-power level 1 (very low, most common) .. 5 (very high).
  std::vector<std::optional<int>> labels;
  /// True consumption population, retained for evaluation even when the raw
  /// column is withheld.
  std::vector<double> ground_truth_cp;

  std::size_t size() const { return raw.size(); }
  bool has_consumption() const;
  bool operator==(const CityDataset&) const = default;
};

CityDataset generate_city(const CityGenConfig& cfg, const RelationalGroundTruth& g);

/// Copy of `city` with the consumption population column removed from the
/// raw features (ground truth retained).
CityDataset as_target(const CityDataset& city);

/// Evaluates g on a normalized feature vector; result in (0,1).
double relational_oracle(const features::SpatialContextVector& normalized,
                         const RelationalGroundTruth& g,
                         const features::FeatureLayout& layout = {});

/// Share of each level under a geometric long-tail schedule: share_k ∝ skew^-(k-1).
std::array<double, kNumLevels> level_shares(double skew);

/// Assigns levels 1..5 by empirical quantile thresholds of the scores.
/// Higher scores get higher levels; tied scores always share a level.
std::vector<int> assign_labels(std::span<const double> latent_scores, double skew);

}  // namespace ccftl::synth
