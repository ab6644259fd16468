#include "ccftl/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

#include "ccftl/error.hpp"
#include "ccftl/rng.hpp"

namespace ccftl::synth {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void check_weights(std::span<const double> w, const char* what) {
  require(!w.empty(), ErrorKind::invalid_argument, std::string("generate_city: empty ") + what);
  double sum = 0.0;
  for (double v : w) {
    require(v >= 0.0 && std::isfinite(v), ErrorKind::invalid_argument,
            std::string("generate_city: negative ") + what);
    sum += v;
  }
  require(std::abs(sum - 1.0) < 1e-9, ErrorKind::invalid_argument,
          std::string("generate_city: ") + what + " must sum to 1");
}

void validate(const CityGenConfig& cfg) {
  check_weights(cfg.poi_category_weights, "poi_category_weights");
  check_weights(cfg.road_category_weights, "road_category_weights");
  require(cfg.n_regions > 0, ErrorKind::invalid_argument, "generate_city: n_regions must be positive");
  require(cfg.noise_sigma >= 0.0, ErrorKind::invalid_argument, "generate_city: noise_sigma must be >= 0");
  require(cfg.poi_volume_scale > 0.0 && cfg.pop_scale > 0.0, ErrorKind::invalid_argument,
          "generate_city: scales must be positive");
  require(cfg.label_skew > 1.0, ErrorKind::invalid_argument, "generate_city: label_skew must exceed 1");
  require(cfg.cell_size > 0.0, ErrorKind::invalid_argument, "generate_city: cell_size must be positive");
}

}  // namespace

bool CityDataset::has_consumption() const {
  return std::all_of(raw.begin(), raw.end(), [](const auto& r) { return r.consumption_pop.has_value(); });
}

double relational_oracle(const features::SpatialContextVector& normalized, const RelationalGroundTruth& g,
                         const features::FeatureLayout& layout) {
  const auto& v = normalized.values;
  require(v.size() >= layout.base_width(), ErrorKind::dimension_mismatch,
          "relational_oracle: feature vector narrower than the layout");
  const double z = g.beta[0] + g.beta[1] * v[layout.poi_entropy()] + g.beta[2] * v[layout.residential_pop()] +
                   g.beta[3] * v[layout.working_pop()] + g.beta[4] * v[layout.poi_total()];
  return sigmoid(z);
}

std::array<double, kNumLevels> level_shares(double skew) {
  require(skew > 1.0, ErrorKind::invalid_argument, "label skew must exceed 1");
  std::array<double, kNumLevels> shares{};
  double total = 0.0;
  for (int k = 0; k < kNumLevels; ++k) {
    shares[k] = std::pow(skew, -static_cast<double>(k));
    total += shares[k];
  }
  for (double& s : shares) s /= total;
  return shares;
}

std::vector<int> assign_labels(std::span<const double> latent_scores, double skew) {
  require(!latent_scores.empty(), ErrorKind::invalid_argument, "assign_labels: no scores");
  const auto shares = level_shares(skew);
  const std::size_t n = latent_scores.size();

  // Target count per level; levels 2..5 get floor(share*n), level 1 takes the rest.
  std::array<std::size_t, kNumLevels> counts{};
  std::size_t upper = 0;
  for (int k = 1; k < kNumLevels; ++k) {
    counts[k] = static_cast<std::size_t>(std::floor(shares[k] * static_cast<double>(n)));
    if (n >= 100) counts[k] = std::max<std::size_t>(counts[k], 1);
    upper += counts[k];
  }
  counts[0] = n - std::min(upper, n);

  std::vector<double> sorted(latent_scores.begin(), latent_scores.end());
  std::sort(sorted.begin(), sorted.end());
  // thresholds[k-1] is the largest score that stays at level <= k.
  std::array<double, kNumLevels - 1> thresholds{};
  std::size_t boundary = 0;
  for (int k = 0; k < kNumLevels - 1; ++k) {
    boundary += counts[k];
    thresholds[k] = sorted[std::clamp<std::size_t>(boundary, 1, n) - 1];
  }

  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    int level = 1;
    for (double t : thresholds) level += latent_scores[i] > t ? 1 : 0;
    labels[i] = level;
  }
  if (sorted.front() == sorted.back()) {
    std::cerr << "warning: assign_labels received constant scores; all regions share one level\n";
  }
  return labels;
}

CityDataset generate_city(const CityGenConfig& cfg, const RelationalGroundTruth& g) {
  validate(cfg);
  Rng rng(cfg.seed);
  const std::size_t n = cfg.n_regions;
  const auto n_cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  const std::size_t n_rows = (n + n_cols - 1) / n_cols;
  const features::GridSpec grid{0.0, 0.0, cfg.cell_size, n_rows, n_cols};

  CityDataset city;
  city.city_id = cfg.city_id;
  city.regions.reserve(n);
  city.raw.reserve(n);

  const std::size_t n_poi = cfg.poi_category_weights.size();
  std::vector<double> mix(n_poi);
  for (std::size_t i = 0; i < n; ++i) {
    // Cell centre, mapped back through the grid to keep region ids consistent.
    const double x = (static_cast<double>(i % n_cols) + 0.5) * cfg.cell_size;
    const double y = (static_cast<double>(i / n_cols) + 0.5) * cfg.cell_size;
    const auto cell = features::assign_grid_cell(x, y, grid);
    city.regions.push_back({cfg.city_id, cell.row, cell.col});

    const double activity = 0.2 + 1.8 * rng.uniform();
    features::RawRegionData raw;

    // Region-level perturbation of the city's category mix drives entropy.
    double mix_total = 0.0;
    for (std::size_t k = 0; k < n_poi; ++k) {
      mix[k] = cfg.poi_category_weights[k] * std::exp(rng.normal());
      mix_total += mix[k];
    }
    const double poi_mean = cfg.poi_volume_scale * activity;
    raw.poi_counts.resize(n_poi);
    for (std::size_t k = 0; k < n_poi; ++k) {
      raw.poi_counts[k] = static_cast<double>(rng.poisson(poi_mean * mix[k] / mix_total));
    }
    raw.road_counts.resize(cfg.road_category_weights.size());
    for (std::size_t k = 0; k < raw.road_counts.size(); ++k) {
      raw.road_counts[k] =
          static_cast<double>(rng.poisson(24.0 * (0.5 + activity) * cfg.road_category_weights[k]));
    }
    raw.working_pop = std::round(cfg.pop_scale * 0.6 * activity * std::exp(0.2 * rng.normal()));
    raw.residential_pop = std::round(cfg.pop_scale * (0.3 + 1.2 * rng.uniform()));
    city.raw.push_back(std::move(raw));
  }

  // The relation is defined on this city's own min-max normalized features.
  std::vector<features::SpatialContextVector> rows;
  rows.reserve(n);
  for (const auto& r : city.raw) rows.push_back(features::build_feature_vector(r));
  const auto norm = features::fit_normalizer(rows);
  const features::FeatureLayout layout{n_poi, cfg.road_category_weights.size()};

  city.ground_truth_cp.resize(n);
  std::vector<double> latent(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double clean = relational_oracle(features::apply_normalizer(norm, rows[i]), g, layout);
    const double noisy = cfg.noise_sigma > 0.0 ? clean + rng.normal(0.0, cfg.noise_sigma) : clean;
    const double cp = cfg.pop_scale * std::max(noisy, 0.0);
    city.ground_truth_cp[i] = cp;
    city.raw[i].consumption_pop = cp;
    latent[i] = cp;
  }
  const auto levels = assign_labels(latent, cfg.label_skew);
  city.labels.assign(levels.begin(), levels.end());
  return city;
}

CityDataset as_target(const CityDataset& city) {
  CityDataset out = city;
  for (auto& r : out.raw) r.consumption_pop.reset();
  return out;
}

}  // namespace ccftl::synth
