#include "ccftl/features.hpp"

#include <algorithm>
#include <cmath>

#include "ccftl/error.hpp"

namespace ccftl::features {

std::vector<std::string> feature_names(std::size_t n_poi, std::size_t n_road, bool with_cp) {
  std::vector<std::string> names;
  for (std::size_t i = 1; i <= n_poi; ++i) names.push_back("poi_c" + std::to_string(i));
  names.emplace_back("poi_total");
  names.emplace_back("poi_entropy");
  for (std::size_t i = 1; i <= n_road; ++i) names.push_back("road_c" + std::to_string(i));
  names.emplace_back("wp");
  names.emplace_back("rp");
  if (with_cp) names.emplace_back("cp");
  return names;
}

double poi_entropy(std::span<const double> poi_counts) {
  double total = 0.0;
  for (double c : poi_counts) {
    require(c >= 0.0 && std::isfinite(c), ErrorKind::invalid_argument,
            "poi_entropy: counts must be finite and non-negative");
    total += c;
  }
  if (total <= 0.0) return 0.0;
  double h = 0.0;
  for (double c : poi_counts) {
    if (c == 0.0) continue;
    const double p = c / total;
    h -= p * std::log(p);
  }
  // Rounding can leave a tiny negative for a single category.
  return std::max(h, 0.0);
}

SpatialContextVector build_feature_vector(const RawRegionData& raw) {
  auto check = [](double v, const char* what) {
    require(v >= 0.0 && std::isfinite(v), ErrorKind::invalid_argument,
            std::string("build_feature_vector: negative or non-finite ") + what);
  };
  for (double c : raw.poi_counts) check(c, "poi count");
  for (double c : raw.road_counts) check(c, "road count");
  check(raw.working_pop, "working population");
  check(raw.residential_pop, "residential population");
  if (raw.consumption_pop) check(*raw.consumption_pop, "consumption population");

  SpatialContextVector v;
  v.values.reserve(raw.poi_counts.size() + raw.road_counts.size() + 5);
  double total = 0.0;
  for (double c : raw.poi_counts) {
    v.values.push_back(c);
    total += c;
  }
  v.values.push_back(total);
  v.values.push_back(poi_entropy(raw.poi_counts));
  for (double c : raw.road_counts) v.values.push_back(c);
  v.values.push_back(raw.working_pop);
  v.values.push_back(raw.residential_pop);
  if (raw.consumption_pop) v.values.push_back(*raw.consumption_pop);
  v.has_cp = raw.consumption_pop.has_value();
  return v;
}

Normalizer fit_normalizer(std::span<const SpatialContextVector> rows) {
  require(!rows.empty(), ErrorKind::invalid_argument, "fit_normalizer: no rows");
  const std::size_t width = rows.front().values.size();
  Normalizer n{rows.front().values, rows.front().values};
  for (const auto& r : rows) {
    require(r.values.size() == width, ErrorKind::dimension_mismatch,
            "fit_normalizer: rows have inconsistent widths");
    for (std::size_t j = 0; j < width; ++j) {
      n.min[j] = std::min(n.min[j], r.values[j]);
      n.max[j] = std::max(n.max[j], r.values[j]);
    }
  }
  return n;
}

double normalize_value(double x, double lo, double hi) {
  if (!(hi > lo)) return 0.0;
  return std::clamp((x - lo) / (hi - lo), 0.0, 1.0);
}

SpatialContextVector apply_normalizer(const Normalizer& n, const SpatialContextVector& v) {
  require(v.values.size() == n.size(), ErrorKind::dimension_mismatch,
          "apply_normalizer: vector width " + std::to_string(v.values.size()) +
              " differs from normalizer width " + std::to_string(n.size()));
  SpatialContextVector out{std::vector<double>(v.values.size()), v.has_cp};
  for (std::size_t j = 0; j < v.values.size(); ++j) {
    out.values[j] = normalize_value(v.values[j], n.min[j], n.max[j]);
  }
  return out;
}

GridCell assign_grid_cell(double x, double y, const GridSpec& grid) {
  require(grid.cell_size > 0.0, ErrorKind::invalid_argument, "assign_grid_cell: cell size must be positive");
  const double fr = std::floor((y - grid.origin_y) / grid.cell_size);
  const double fc = std::floor((x - grid.origin_x) / grid.cell_size);
  require(fr >= 0.0 && fc >= 0.0 && fr < static_cast<double>(grid.n_rows) &&
              fc < static_cast<double>(grid.n_cols),
          ErrorKind::out_of_range, "assign_grid_cell: point outside the grid extent");
  return {static_cast<std::size_t>(fr), static_cast<std::size_t>(fc)};
}

}  // namespace ccftl::features
