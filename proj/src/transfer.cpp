#include "ccftl/transfer.hpp"

#include <algorithm>
#include <cmath>

#include "ccftl/error.hpp"
#include "ccftl/rng.hpp"

namespace ccftl::transfer {

namespace {

std::vector<features::SpatialContextVector> feature_rows(const synth::CityDataset& city) {
  std::vector<features::SpatialContextVector> rows;
  rows.reserve(city.size());
  for (const auto& r : city.raw) rows.push_back(features::build_feature_vector(r));
  return rows;
}

Tensor2D to_tensor(const std::vector<features::SpatialContextVector>& rows, std::size_t width) {
  Tensor2D t(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < width; ++j) t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i].values[j];
  }
  return t;
}

std::vector<int> required_labels(const synth::CityDataset& city) {
  std::vector<int> out;
  out.reserve(city.size());
  for (const auto& l : city.labels) {
    require(l.has_value(), ErrorKind::invalid_argument, "city " + city.city_id + " has unlabeled regions");
    out.push_back(*l);
  }
  return out;
}

}  // namespace

ScenarioSpec default_scenario_spec() {
  ScenarioSpec spec;
  synth::CityGenConfig a;
  a.city_id = "src_a";
  a.poi_category_weights = {0.30, 0.20, 0.15, 0.10, 0.10, 0.05, 0.05, 0.05};
  a.road_category_weights = {0.40, 0.30, 0.20, 0.10};
  a.poi_volume_scale = 40.0;
  a.pop_scale = 1000.0;
  a.seed = 11;
  synth::CityGenConfig b;
  b.city_id = "src_b";
  b.poi_category_weights = {0.05, 0.05, 0.10, 0.10, 0.15, 0.15, 0.20, 0.20};
  b.road_category_weights = {0.10, 0.20, 0.30, 0.40};
  b.poi_volume_scale = 60.0;
  b.pop_scale = 1500.0;
  b.seed = 12;
  synth::CityGenConfig t;
  t.city_id = "tgt";
  t.poi_category_weights = {0.10, 0.30, 0.05, 0.20, 0.05, 0.10, 0.05, 0.15};
  t.road_category_weights = {0.25, 0.25, 0.25, 0.25};
  t.poi_volume_scale = 30.0;
  t.pop_scale = 800.0;
  t.seed = 13;
  spec.sources = {a, b};
  spec.target = t;
  return spec;
}

ScenarioSpec with_source_count(const ScenarioSpec& spec, std::size_t n_sources) {
  require(n_sources >= 1, ErrorKind::invalid_argument, "scenario needs at least one source city");
  require(!spec.sources.empty(), ErrorKind::invalid_argument, "scenario spec has no source template");
  ScenarioSpec out = spec;
  out.sources.resize(std::min(n_sources, spec.sources.size()));
  for (std::size_t k = out.sources.size(); k < n_sources; ++k) {
    synth::CityGenConfig c = spec.sources[k % spec.sources.size()];
    c.city_id = "src_" + std::to_string(k + 1);
    c.seed = 1000 + k;
    Rng rng(derive_seed(0x5eed, k));
    double total = 0.0;
    for (double& w : c.poi_category_weights) {
      w = 0.2 + rng.uniform();
      total += w;
    }
    for (double& w : c.poi_category_weights) w /= total;
    c.poi_volume_scale = rng.uniform(25.0, 65.0);
    out.sources.push_back(std::move(c));
  }
  return out;
}

Scenario make_scenario(const ScenarioSpec& spec, std::uint64_t seed) {
  Scenario s;
  for (auto cfg : spec.sources) {
    cfg.seed = derive_seed(seed, cfg.seed);
    s.sources.push_back(synth::generate_city(cfg, spec.relation));
  }
  auto tcfg = spec.target;
  tcfg.seed = derive_seed(seed, tcfg.seed);
  s.target = synth::as_target(synth::generate_city(tcfg, spec.relation));
  return s;
}

models::TrainingTable prepare_source(const synth::CityDataset& city, std::size_t domain_index,
                                     std::size_t n_domains) {
  require(city.size() > 0, ErrorKind::invalid_argument, "source city " + city.city_id + " is empty");
  require(city.has_consumption(), ErrorKind::invalid_argument,
          "source city " + city.city_id + " lacks consumption population");
  const auto rows = feature_rows(city);
  const auto norm = features::fit_normalizer(rows);
  std::vector<features::SpatialContextVector> normalized;
  normalized.reserve(rows.size());
  for (const auto& r : rows) normalized.push_back(features::apply_normalizer(norm, r));

  const std::size_t width = rows.front().values.size() - 1;
  models::TrainingTable t;
  t.x_base = to_tensor(normalized, width);
  t.cp.reserve(rows.size());
  for (const auto& r : normalized) t.cp.push_back(r.values.back());
  t.labels = required_labels(city);
  t.domain_index = domain_index;
  t.n_domains = n_domains;
  return t;
}

TargetTable prepare_target(const synth::CityDataset& city) {
  require(city.size() > 0, ErrorKind::invalid_argument, "target city is empty");
  auto rows = feature_rows(city);
  for (auto& r : rows) {
    if (r.has_cp) {
      r.values.pop_back();
      r.has_cp = false;
    }
  }
  const auto norm = features::fit_normalizer(rows);
  std::vector<features::SpatialContextVector> normalized;
  normalized.reserve(rows.size());
  for (const auto& r : rows) normalized.push_back(features::apply_normalizer(norm, r));

  TargetTable t;
  t.city_id = city.city_id;
  t.regions = city.regions;
  t.x_base = to_tensor(normalized, rows.front().values.size());
  t.labels = required_labels(city);
  if (city.ground_truth_cp.size() == city.size()) {
    const auto [lo, hi] = std::minmax_element(city.ground_truth_cp.begin(), city.ground_truth_cp.end());
    for (double v : city.ground_truth_cp) t.cp_truth.push_back(features::normalize_value(v, *lo, *hi));
  }
  return t;
}

PreparedScenario prepare_scenario(const Scenario& scenario) {
  require(!scenario.sources.empty(), ErrorKind::invalid_argument, "scenario has no source cities");
  PreparedScenario p;
  for (std::size_t i = 0; i < scenario.sources.size(); ++i) {
    p.sources.push_back(prepare_source(scenario.sources[i], i, scenario.sources.size()));
    p.source_ids.push_back(scenario.sources[i].city_id);
  }
  p.target = prepare_target(scenario.target);
  p.base_width = static_cast<std::size_t>(p.target.x_base.cols());
  for (const auto& s : p.sources) {
    require(static_cast<std::size_t>(s.x_base.cols()) == p.base_width, ErrorKind::dimension_mismatch,
            "source and target feature layouts differ");
  }
  return p;
}

TargetSplit make_split(std::size_t n, double label_fraction, std::uint64_t seed) {
  require(label_fraction > 0.0 && label_fraction < 1.0, ErrorKind::invalid_argument,
          "label fraction must be in (0, 1)");
  require(n > 0, ErrorKind::invalid_argument, "make_split: no regions");
  Rng rng(seed);
  const auto order = rng.permutation(n);
  auto n_labeled = static_cast<std::size_t>(std::llround(label_fraction * static_cast<double>(n)));
  if (n >= 2) n_labeled = std::clamp<std::size_t>(n_labeled, 1, n - 1);
  else n_labeled = 1;
  TargetSplit s;
  s.label_fraction = label_fraction;
  s.labeled.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_labeled));
  s.unlabeled.assign(order.begin() + static_cast<std::ptrdiff_t>(n_labeled), order.end());
  std::sort(s.labeled.begin(), s.labeled.end());
  std::sort(s.unlabeled.begin(), s.unlabeled.end());
  return s;
}

std::vector<double> impute_missing(const models::DarklModel& darkl, const Tensor2D& target_features) {
  require(static_cast<std::size_t>(target_features.cols()) == darkl.input_dim(), ErrorKind::dimension_mismatch,
          "impute_missing: target features do not match the regressor input");
  return models::darkl_impute(darkl, target_features);
}

FineTuneResult fine_tune(const models::UtpModel& utp, const Tensor2D& x_full, std::span<const int> labels,
                         const TargetSplit& split, const FineTuneOptions& opts, std::uint64_t seed) {
  require(!split.labeled.empty(), ErrorKind::invalid_argument, "fine_tune: empty labeled split");
  require(static_cast<std::size_t>(x_full.rows()) == labels.size(), ErrorKind::dimension_mismatch,
          "fine_tune: labels and rows differ");
  const Tensor2D x = models::gather_rows(x_full, split.labeled);
  std::vector<int> y;
  y.reserve(split.labeled.size());
  for (std::size_t i : split.labeled) y.push_back(labels[i]);
  const Tensor2D y_hot = models::one_hot(y, utp.net.output_dim());

  FineTuneResult out{utp, 0.0, 0.0};
  out.initial_loss = models::cross_entropy(models::utp_forward(utp, x), y_hot);
  for (std::size_t e = 0; e < opts.epochs; ++e) {
    models::train_utp_epoch(out.utp, x, y, opts.lr, opts.batch_size, derive_seed(seed, e));
  }
  out.final_loss = opts.epochs ? models::cross_entropy(models::utp_forward(out.utp, x), y_hot) : out.initial_loss;
  return out;
}

std::vector<int> predict(const models::UtpModel& utp, const Tensor2D& x_full) {
  require(static_cast<std::size_t>(x_full.cols()) == utp.input_dim(), ErrorKind::dimension_mismatch,
          "predict: feature width does not match the task predictor");
  return eval::argmax_labels(models::utp_forward(utp, x_full));
}

const char* to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::no_darkl: return "no_darkl";
    case Variant::no_utp: return "no_utp";
    case Variant::no_finetune: return "no_finetune";
    case Variant::no_domain_classifier: return "no_domain_classifier";
    case Variant::target_only: return "target_only";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  for (Variant v : kAllVariants) {
    if (s == to_string(v)) return v;
  }
  fail(ErrorKind::invalid_argument, "unknown variant '" + s + "'");
}

Stage1Result run_stage1(const PreparedScenario& scenario, const ExperimentSettings& settings, double lambda,
                        std::uint64_t seed, bool train_utp, const fed::RoundObserver& observer) {
  const std::size_t n_domains = scenario.sources.size();
  const auto darkl = models::init_darkl(scenario.base_width, n_domains, settings.dims, lambda, derive_seed(seed, 10));
  const auto utp = models::init_utp(scenario.base_width + 1, settings.dims, derive_seed(seed, 11));

  std::vector<fed::ClientState> clients;
  for (std::size_t i = 0; i < scenario.sources.size(); ++i) {
    clients.push_back({scenario.source_ids[i], scenario.sources[i], darkl, utp});
  }
  fed::FederatedConfig cfg;
  cfg.rounds = settings.rounds;
  cfg.local_epochs = settings.local_epochs;
  cfg.train.lr = settings.lr;
  cfg.train.batch_size = settings.batch_size;
  cfg.train.train_utp = train_utp;
  cfg.mode = settings.mode;
  cfg.key_bits = settings.key_bits;
  cfg.scale_bits = settings.scale_bits;
  cfg.seed = derive_seed(seed, 12);
  cfg.record_timing = settings.record_timing;

  auto fr = fed::run_federated_training(std::move(clients), cfg, observer);
  Stage1Result out{std::move(fr.darkl), std::move(fr.utp), std::move(fr.round_log), 0.0};
  if (settings.record_timing && !out.round_log.empty()) {
    double total = 0.0;
    for (const auto& r : out.round_log) total += r.wall_time_s;
    out.epoch_time_s = total / static_cast<double>(out.round_log.size() * settings.local_epochs);
  }
  return out;
}

TransferOutcome run_stage2(const PreparedScenario& scenario, const ExperimentSettings& settings,
                           const models::DarklModel* darkl, const models::UtpModel* utp, bool finetune,
                           std::uint64_t seed) {
  const auto& target = scenario.target;
  const std::size_t n = static_cast<std::size_t>(target.x_base.rows());
  TransferOutcome out;
  out.cp_hat = darkl ? impute_missing(*darkl, target.x_base) : std::vector<double>(n, kUninformativeCp);
  const Tensor2D x_full = models::append_column(target.x_base, out.cp_hat);
  out.split = make_split(n, settings.label_fraction, derive_seed(seed, 20));

  models::UtpModel model = utp ? *utp : models::init_utp(scenario.base_width + 1, settings.dims, derive_seed(seed, 21));
  if (finetune) {
    FineTuneOptions opts{settings.fine_tune_epochs, settings.lr, settings.batch_size};
    model = fine_tune(model, x_full, target.labels, out.split, opts, derive_seed(seed, 22)).utp;
  }
  out.predicted = predict(model, x_full);

  std::vector<int> y;
  std::vector<int> yhat;
  for (std::size_t i : out.split.unlabeled) {
    y.push_back(target.labels[i]);
    yhat.push_back(out.predicted[i]);
  }
  const auto cls = eval::macro_prf1(y, yhat, static_cast<int>(models::kNumClasses));
  out.report.precision = cls.precision;
  out.report.recall = cls.recall;
  out.report.f1 = cls.f1;
  out.report.class_counts = cls.support;
  if (target.cp_truth.size() == n) {
    const auto err = eval::mae_mse(target.cp_truth, out.cp_hat);
    out.report.mae = err.mae;
    out.report.mse = err.mse;
  }
  out.tuned = std::move(model);
  return out;
}

const Stage1Result& Stage1Cache::get(const PreparedScenario& scenario, const ExperimentSettings& settings,
                                     double lambda, std::uint64_t seed) {
  for (const auto& [l, r] : entries_) {
    if (l == lambda) return r;
  }
  entries_.emplace_back(lambda, run_stage1(scenario, settings, lambda, seed));
  return entries_.back().second;
}

VariantResult run_variant(Variant variant, const PreparedScenario& scenario, const ExperimentSettings& settings,
                          std::uint64_t seed, Stage1Cache* cache) {
  Stage1Cache local;
  Stage1Cache& c = cache ? *cache : local;
  VariantResult out{variant, {}};
  const Stage1Result* s1 = nullptr;
  switch (variant) {
    case Variant::full:
      s1 = &c.get(scenario, settings, settings.lambda, seed);
      out.outcome = run_stage2(scenario, settings, &s1->darkl, &s1->utp, true, seed);
      break;
    case Variant::no_darkl:
      s1 = &c.get(scenario, settings, settings.lambda, seed);
      out.outcome = run_stage2(scenario, settings, nullptr, &s1->utp, true, seed);
      break;
    case Variant::no_utp:
      s1 = &c.get(scenario, settings, settings.lambda, seed);
      out.outcome = run_stage2(scenario, settings, &s1->darkl, nullptr, true, seed);
      break;
    case Variant::no_finetune:
      s1 = &c.get(scenario, settings, settings.lambda, seed);
      out.outcome = run_stage2(scenario, settings, &s1->darkl, &s1->utp, false, seed);
      break;
    case Variant::no_domain_classifier:
      s1 = &c.get(scenario, settings, 0.0, seed);
      out.outcome = run_stage2(scenario, settings, &s1->darkl, &s1->utp, true, seed);
      break;
    case Variant::target_only:
      out.outcome = run_stage2(scenario, settings, nullptr, nullptr, true, seed);
      break;
  }
  if (s1) out.outcome.report.epoch_time_s = s1->epoch_time_s;
  return out;
}

const char* to_string(SweepKind k) {
  switch (k) {
    case SweepKind::lambda: return "lambda";
    case SweepKind::label_fraction: return "label_fraction";
    case SweepKind::client_count: return "client_count";
  }
  return "?";
}

SweepKind parse_sweep_kind(const std::string& s) {
  for (SweepKind k : {SweepKind::lambda, SweepKind::label_fraction, SweepKind::client_count}) {
    if (s == to_string(k)) return k;
  }
  fail(ErrorKind::invalid_argument, "unknown sweep kind '" + s + "' (expected lambda|label_fraction|client_count)");
}

std::vector<double> default_grid(SweepKind k) {
  switch (k) {
    case SweepKind::lambda: return {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    case SweepKind::label_fraction: return {0.05, 0.10, 0.15, 0.20, 0.25};
    case SweepKind::client_count: return {1, 2, 3, 4};
  }
  return {};
}

void validate_grid(SweepKind k, std::span<const double> grid) {
  require(!grid.empty(), ErrorKind::invalid_argument, "sweep grid is empty");
  for (double v : grid) {
    switch (k) {
      case SweepKind::lambda:
        require(v >= 0.0 && v <= 1.0, ErrorKind::invalid_argument, "lambda grid values must lie in [0, 1]");
        break;
      case SweepKind::label_fraction:
        require(v > 0.0 && v < 1.0, ErrorKind::invalid_argument, "label fraction grid values must lie in (0, 1)");
        break;
      case SweepKind::client_count:
        require(v >= 1.0 && v == std::floor(v), ErrorKind::invalid_argument,
                "client count grid values must be integers >= 1");
        break;
    }
  }
}

std::vector<SweepRow> sweep(SweepKind kind, std::span<const double> grid, const ScenarioSpec& spec,
                            const ExperimentSettings& settings, std::span<const std::uint64_t> seeds) {
  validate_grid(kind, grid);
  require(!seeds.empty(), ErrorKind::invalid_argument, "sweep needs at least one seed");
  std::vector<SweepRow> rows;
  for (std::uint64_t seed : seeds) {
    // Lambda and label-fraction points share one scenario per seed; label
    // fractions also share the federated stage.
    std::optional<PreparedScenario> shared;
    if (kind != SweepKind::client_count) shared = prepare_scenario(make_scenario(spec, seed));
    Stage1Cache cache;
    for (double value : grid) {
      ExperimentSettings s = settings;
      if (kind == SweepKind::lambda) s.lambda = value;
      if (kind == SweepKind::label_fraction) s.label_fraction = value;
      if (kind == SweepKind::client_count) {
        const auto prepared =
            prepare_scenario(make_scenario(with_source_count(spec, static_cast<std::size_t>(value)), seed));
        rows.push_back({kind, value, seed, run_variant(Variant::full, prepared, s, seed).outcome.report});
      } else {
        rows.push_back({kind, value, seed, run_variant(Variant::full, *shared, s, seed, &cache).outcome.report});
      }
    }
  }
  return rows;
}

}  // namespace ccftl::transfer
