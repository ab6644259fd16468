#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ccftl::features {

inline constexpr std::size_t kDefaultPoiCategories = 8;
inline constexpr std::size_t kDefaultRoadCategories = 4;
/// Grid cell edge used by the experiments, in metres.
inline constexpr double kDefaultCellSize = 152.0;

struct Region {
  std::string city_id;
  std::size_t row = 0;
  std::size_t col = 0;

  bool operator==(const Region&) const = default;
};

struct RawRegionData {
  std::vector<double> poi_counts;
  std::vector<double> road_counts;
  double working_pop = 0.0;
  double residential_pop = 0.0;
  std::optional<double> consumption_pop;  // absent in the target city

  bool operator==(const RawRegionData&) const = default;
};

/// Feature layout, fixed for every city:
///   [poi_1 .. poi_P, poi_total, poi_entropy, road_1 .. road_R, working_pop, residential_pop]
/// followed by consumption_pop when `has_cp`.
struct SpatialContextVector {
  std::vector<double> values;
  bool has_cp = false;

  bool operator==(const SpatialContextVector&) const = default;
};

/// Column names in layout order (cp appended when requested).
std::vector<std::string> feature_names(std::size_t n_poi, std::size_t n_road, bool with_cp);

/// Layout indices for a given category count.
struct FeatureLayout {
  std::size_t n_poi = kDefaultPoiCategories;
  std::size_t n_road = kDefaultRoadCategories;

  std::size_t poi_total() const { return n_poi; }
  std::size_t poi_entropy() const { return n_poi + 1; }
  std::size_t road_begin() const { return n_poi + 2; }
  std::size_t working_pop() const { return n_poi + 2 + n_road; }
  std::size_t residential_pop() const { return working_pop() + 1; }
  /// Width without consumption population.
  std::size_t base_width() const { return residential_pop() + 1; }
  std::size_t consumption_pop() const { return base_width(); }
};

/// Shannon entropy (natural log) of the POI category mix; 0 for an empty region.
double poi_entropy(std::span<const double> poi_counts);

SpatialContextVector build_feature_vector(const RawRegionData& raw);

struct Normalizer {
  std::vector<double> min;
  std::vector<double> max;

  std::size_t size() const { return min.size(); }
  bool operator==(const Normalizer&) const = default;
};

Normalizer fit_normalizer(std::span<const SpatialContextVector> rows);
/// Min-max into [0,1] with clamping; degenerate features map to 0.
SpatialContextVector apply_normalizer(const Normalizer& n, const SpatialContextVector& v);
double normalize_value(double x, double lo, double hi);

struct GridSpec {
  double origin_x = 0.0;
  double origin_y = 0.0;
  double cell_size = kDefaultCellSize;
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
};

struct GridCell {
  std::size_t row = 0;
  std::size_t col = 0;
  bool operator==(const GridCell&) const = default;
};

GridCell assign_grid_cell(double x, double y, const GridSpec& grid);

}  // namespace ccftl::features
