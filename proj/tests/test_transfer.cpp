#include <algorithm>
#include <numeric>
#include <set>

#include "ccftl/transfer.hpp"
#include "test_util.hpp"

using namespace ccftl;
using namespace ccftl::transfer;

namespace {

ScenarioSpec small_spec(std::size_t n = 240) {
  auto spec = default_scenario_spec();
  for (auto& c : spec.sources) c.n_regions = n;
  spec.target.n_regions = n;
  return spec;
}

ExperimentSettings small_settings() {
  ExperimentSettings s;
  s.dims.feature_extractor = {16, 8};
  s.dims.data_regressor = {8};
  s.dims.domain_classifier = {8};
  s.dims.task_predictor = {16, 8};
  s.rounds = 3;
  s.fine_tune_epochs = 3;
  s.batch_size = 32;
  return s;
}

const PreparedScenario& small_prepared() {
  static const PreparedScenario p = prepare_scenario(make_scenario(small_spec(), 1));
  return p;
}

}  // namespace

TEST_CASE("default scenario shape") {
  const auto spec = default_scenario_spec();
  CHECK(spec.sources.size() == 2);
  CHECK(spec.sources[0].n_regions == 3000);
  CHECK(spec.target.n_regions == 3000);
  CHECK(spec.sources[0].poi_category_weights != spec.sources[1].poi_category_weights);
  CHECK(spec.sources[0].poi_category_weights != spec.target.poi_category_weights);
  CHECK(spec.sources[0].noise_sigma == 0.05);
}

TEST_CASE("extra sources get distinct ids and valid mixes") {
  const auto spec = with_source_count(small_spec(), 4);
  REQUIRE(spec.sources.size() == 4);
  std::set<std::string> ids;
  for (const auto& c : spec.sources) {
    ids.insert(c.city_id);
    CHECK(std::accumulate(c.poi_category_weights.begin(), c.poi_category_weights.end(), 0.0) ==
          doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(ids.size() == 4);
  CHECK(with_source_count(small_spec(), 1).sources.size() == 1);
  CHECK_ERROR_KIND(with_source_count(small_spec(), 0), ErrorKind::invalid_argument);
}

TEST_CASE("prepared scenario keeps the target's consumption out of its features") {
  const auto& p = small_prepared();
  CHECK(p.base_width == 16);
  CHECK(p.sources.size() == 2);
  CHECK(p.target.x_base.cols() == 16);
  CHECK(p.target.x_base.minCoeff() >= 0.0);
  CHECK(p.target.x_base.maxCoeff() <= 1.0);
  CHECK(p.target.cp_truth.size() == 240);
  CHECK(*std::max_element(p.target.cp_truth.begin(), p.target.cp_truth.end()) == 1.0);
  CHECK(p.sources[1].domain_index == 1);
  CHECK(p.sources[0].n_domains == 2);
  for (const auto& s : p.sources) {
    CHECK(s.cp.size() == s.size());
    CHECK(*std::min_element(s.cp.begin(), s.cp.end()) == 0.0);
  }
}

TEST_CASE("labeled split") {
  const auto s = make_split(100, 0.2, 3);
  CHECK(s.labeled.size() == 20);
  CHECK(s.unlabeled.size() == 80);
  std::vector<std::size_t> all = s.labeled;
  all.insert(all.end(), s.unlabeled.begin(), s.unlabeled.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < 100; ++i) CHECK(all[i] == i);
  CHECK(make_split(100, 0.2, 3).labeled == s.labeled);
  CHECK_FALSE(make_split(100, 0.2, 4).labeled == s.labeled);
  CHECK(make_split(10, 0.01, 1).labeled.size() == 1);
  CHECK(make_split(10, 0.99, 1).unlabeled.size() == 1);
  CHECK_ERROR_KIND(make_split(10, 0.0, 1), ErrorKind::invalid_argument);
  CHECK_ERROR_KIND(make_split(10, 1.0, 1), ErrorKind::invalid_argument);
}

TEST_CASE("fine-tuning lowers the labeled loss") {
  const auto& p = small_prepared();
  const auto s = small_settings();
  const auto utp = models::init_utp(17, s.dims, 5);
  const auto x = models::append_column(p.target.x_base, std::vector<double>(240, kUninformativeCp));
  const auto split = make_split(240, 0.5, 2);
  const auto r = fine_tune(utp, x, p.target.labels, split, {40, 0.05, 16}, 7);
  CHECK(r.final_loss < r.initial_loss);
  const auto none = fine_tune(utp, x, p.target.labels, split, {0, 0.05, 16}, 7);
  CHECK(none.utp == utp);
  TargetSplit empty;
  CHECK_ERROR_KIND(fine_tune(utp, x, p.target.labels, empty, {}, 1), ErrorKind::invalid_argument);
  CHECK_ERROR_KIND(predict(utp, p.target.x_base), ErrorKind::dimension_mismatch);
}

TEST_CASE("imputation checks the feature width") {
  const auto s = small_settings();
  const auto darkl = models::init_darkl(15, 2, s.dims, 0.6, 1);
  CHECK_ERROR_KIND(impute_missing(darkl, small_prepared().target.x_base), ErrorKind::dimension_mismatch);
}

TEST_CASE("variants are wired as described") {
  const auto& p = small_prepared();
  const auto s = small_settings();
  Stage1Cache cache;
  const auto full = run_variant(Variant::full, p, s, 2, &cache);
  const auto no_darkl = run_variant(Variant::no_darkl, p, s, 2, &cache);
  const auto no_ft = run_variant(Variant::no_finetune, p, s, 2, &cache);
  const auto no_dc = run_variant(Variant::no_domain_classifier, p, s, 2, &cache);
  const auto target_only = run_variant(Variant::target_only, p, s, 2, &cache);

  const auto& s1 = cache.get(p, s, s.lambda, 2);
  CHECK(&s1 == &cache.get(p, s, s.lambda, 2));
  CHECK(full.outcome.cp_hat == impute_missing(s1.darkl, p.target.x_base));
  CHECK(std::all_of(no_darkl.outcome.cp_hat.begin(), no_darkl.outcome.cp_hat.end(),
                    [](double v) { return v == kUninformativeCp; }));
  CHECK(*no_ft.outcome.tuned == s1.utp);
  CHECK(no_ft.outcome.cp_hat == full.outcome.cp_hat);

  // Only lambda separates full from the no-domain-classifier variant.
  const auto s1_zero = run_stage1(p, s, 0.0, 2);
  CHECK(s1_zero.darkl.lambda == 0.0);
  CHECK(no_dc.outcome.cp_hat == impute_missing(s1_zero.darkl, p.target.x_base));
  const auto manual = run_stage2(p, s, &s1_zero.darkl, &s1_zero.utp, true, 2);
  CHECK(manual.report.f1 == no_dc.outcome.report.f1);

  // The target-only baseline never looks at source data.
  auto scrambled = p;
  for (auto& src : scrambled.sources) {
    src.x_base.setConstant(0.123);
    std::fill(src.cp.begin(), src.cp.end(), 0.9);
  }
  const auto target_only2 = run_variant(Variant::target_only, scrambled, s, 2);
  CHECK(target_only2.outcome.predicted == target_only.outcome.predicted);
  CHECK(target_only2.outcome.report.f1 == target_only.outcome.report.f1);

  // Evaluation uses the unlabeled regions only.
  CHECK(full.outcome.split.unlabeled.size() == 192);
  std::size_t support = 0;
  for (auto c : full.outcome.report.class_counts) support += c;
  CHECK(support == 192);
}

TEST_CASE("variant and sweep names") {
  for (auto v : kAllVariants) CHECK(parse_variant(to_string(v)) == v);
  CHECK(std::size(kAllVariants) == 6);
  CHECK_ERROR_KIND(parse_variant("bogus"), ErrorKind::invalid_argument);
  CHECK(parse_sweep_kind("label_fraction") == SweepKind::label_fraction);
  CHECK_ERROR_KIND(parse_sweep_kind("rounds"), ErrorKind::invalid_argument);
  CHECK(default_grid(SweepKind::lambda) == std::vector<double>{0.0, 0.2, 0.4, 0.6, 0.8, 1.0});
  CHECK(default_grid(SweepKind::label_fraction) == std::vector<double>{0.05, 0.10, 0.15, 0.20, 0.25});
  CHECK(default_grid(SweepKind::client_count) == std::vector<double>{1, 2, 3, 4});
  CHECK_ERROR_KIND(validate_grid(SweepKind::lambda, std::vector<double>{1.5}), ErrorKind::invalid_argument);
  CHECK_ERROR_KIND(validate_grid(SweepKind::label_fraction, std::vector<double>{0.0}), ErrorKind::invalid_argument);
  CHECK_ERROR_KIND(validate_grid(SweepKind::client_count, std::vector<double>{0.5}), ErrorKind::invalid_argument);
  CHECK_ERROR_KIND(validate_grid(SweepKind::lambda, std::vector<double>{}), ErrorKind::invalid_argument);
}

TEST_CASE("sweeps emit one row per grid point and seed") {
  auto s = small_settings();
  s.rounds = 1;
  const std::uint64_t seeds[] = {1, 2};
  const double grid[] = {0.1, 0.3};
  const auto rows = sweep(SweepKind::label_fraction, grid, small_spec(120), s, seeds);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].seed == 1);
  CHECK(rows[1].value == 0.3);
  CHECK(rows[3].seed == 2);
  const double clients[] = {1, 3};
  const auto crow = sweep(SweepKind::client_count, clients, small_spec(120), s, std::span(seeds).first(1));
  CHECK(crow.size() == 2);
}
