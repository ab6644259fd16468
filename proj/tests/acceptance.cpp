#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "ccftl/federation.hpp"
#include "ccftl/features.hpp"
#include "ccftl/metrics.hpp"
#include "ccftl/models.hpp"
#include "ccftl/paillier.hpp"
#include "ccftl/transfer.hpp"
#include "oracles.hpp"

using namespace ccftl;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

constexpr std::size_t kSeeds = 10;
constexpr double kLambdaGrid[] = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
constexpr double kFractionGrid[] = {0.05, 0.10, 0.15, 0.20, 0.25};

// ---------------------------------------------------------------------------
// Property criteria

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  Rng rng(101);
  double worst = 0.0;
  std::size_t checked = 0, skipped = 0;
  while (checked < 100) {
    const auto mlp = oracle::random_net(rng);
    const auto x = oracle::random_matrix(rng, 4, static_cast<Eigen::Index>(mlp.input_dim()));
    if (oracle::min_relu_margin(mlp, x) < 1e-3) {
      ++skipped;
      continue;
    }
    const auto w = oracle::random_matrix(rng, 4, static_cast<Eigen::Index>(mlp.output_dim()));
    worst = std::max(worst, oracle::gradient_check(mlp, x, w, 1e-5));
    ++checked;
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-4 && t < 30.0,
          fmt("100 nets, max rel err %.3g (<= 1e-4), %zu kink draws redrawn, %.2f s (< 30 s)", worst, skipped, t)};
}

Outcome reversal_identity() {
  Rng rng(202);
  const double lambdas[] = {0.0, 0.6, 1.0, 0.25, 0.9};
  models::ModelDims dims;
  dims.feature_extractor = {12, 8};
  dims.data_regressor = {6};
  dims.domain_classifier = {5};
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const double lambda = lambdas[t % 5];
    const std::size_t domains = 2 + rng.below(3);
    const std::size_t width = 3 + rng.below(6);
    const auto m = models::init_darkl(width, domains, dims, lambda, rng.next_u64());
    models::DarklBatch b;
    b.x = oracle::random_matrix(rng, 10, static_cast<Eigen::Index>(width));
    std::vector<int> dom;
    for (int i = 0; i < 10; ++i) {
      b.cp_target.push_back(rng.uniform());
      dom.push_back(1 + static_cast<int>(rng.below(domains)));
    }
    b.domain_label = models::one_hot(dom, domains);
    const auto got = models::darkl_loss_and_grads(m, b).grads;
    const auto want = oracle::reversal_fe_gradient(m, b);
    for (std::size_t k = 0; k < want.size(); ++k) worst = std::max(worst, std::abs(got[k] - want[k]));
  }
  return {worst <= 1e-12, fmt("20 cases, max |diff| %.3g (<= 1e-12)", worst)};
}

std::vector<fed::ClientState> tiny_clients(Rng& rng, std::size_t n) {
  models::ModelDims dims;
  dims.feature_extractor = {8, 6};
  dims.data_regressor = {4};
  dims.domain_classifier = {4};
  dims.task_predictor = {8, 4};
  const auto darkl = models::init_darkl(5, n, dims, 0.6, rng.next_u64());
  const auto utp = models::init_utp(6, dims, rng.next_u64());
  std::vector<fed::ClientState> out;
  for (std::size_t i = 0; i < n; ++i) {
    models::TrainingTable t;
    const std::size_t rows = 20 + rng.below(30);
    t.x_base = oracle::random_matrix(rng, static_cast<Eigen::Index>(rows), 5, 0.5);
    for (std::size_t r = 0; r < rows; ++r) {
      t.cp.push_back(rng.uniform());
      t.labels.push_back(1 + static_cast<int>(rng.below(5)));
    }
    t.domain_index = i;
    t.n_domains = n;
    out.push_back({"client_" + std::to_string(i), std::move(t), darkl, utp});
  }
  return out;
}

Outcome fedavg_oracle() {
  Rng rng(303);
  std::size_t exact = 0, permuted = 0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t clients = 1 + rng.below(6);
    const std::size_t len = 1 + rng.below(40);
    std::vector<std::vector<double>> raw;
    std::vector<fed::ParamVector> params;
    std::vector<std::size_t> n;
    for (std::size_t c = 0; c < clients; ++c) {
      std::vector<double> v(len);
      for (auto& x : v) x = rng.normal(0.0, 2.0);
      raw.push_back(v);
      params.emplace_back(v);
      n.push_back(1 + rng.below(5000));
    }
    if (fed::fedavg(params, n).values == oracle::weighted_mean(raw, n)) ++exact;

    std::vector<std::size_t> order(clients);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = clients; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    std::vector<fed::ParamVector> p2;
    std::vector<std::size_t> n2;
    for (auto i : order) {
      p2.push_back(params[i]);
      n2.push_back(n[i]);
    }
    const auto a = fed::fedavg(params, n), b = fed::fedavg(p2, n2);
    double worst = 0.0;
    for (std::size_t j = 0; j < len; ++j) worst = std::max(worst, std::abs(a[j] - b[j]) / std::max(1.0, std::abs(a[j])));
    if (worst <= 1e-14) ++permuted;
  }
  // Shuffled client lists.
  Rng crng(304);
  auto clients = tiny_clients(crng, 4);
  fed::FederatedConfig cfg;
  cfg.rounds = 3;
  cfg.train.batch_size = 16;
  const auto a = fed::run_federated_training(clients, cfg);
  std::swap(clients[0], clients[3]);
  std::swap(clients[1], clients[2]);
  const auto b = fed::run_federated_training(clients, cfg);
  const bool run_invariant = a.global_rk == b.global_rk && a.global_task == b.global_task;
  return {exact == 50 && permuted == 50 && run_invariant,
          fmt("%zu/50 exact weighted means, %zu/50 permutations within 1e-14, shuffled federated run %s", exact,
              permuted, run_invariant ? "bit-identical" : "DIFFERS")};
}

Outcome paillier_correctness() {
  const auto t0 = Clock::now();
  const auto keys = fed::keygen(512, 404);
  gmp_randclass draw(gmp_randinit_mt);
  draw.seed(405);
  fed::NonceSource nonces(406);
  std::size_t ok = 0;
  for (int i = 0; i < 1000; ++i) {
    const mpz_class a = draw.get_z_range(keys.pub.n), b = draw.get_z_range(keys.pub.n);
    const auto ca = fed::encrypt(keys.pub, a, nonces.draw(keys.pub));
    const auto cb = fed::encrypt(keys.pub, b, nonces.draw(keys.pub));
    const mpz_class want = (a + b) % keys.pub.n;
    if (fed::decrypt(keys.pub, keys.sec, fed::add_ciphertexts(keys.pub, ca, cb)) == want) ++ok;
  }
  const auto toy = fed::keypair_from_primes(5, 7);
  std::size_t toy_ok = 0, toy_total = 0;
  for (int a = 0; a < 35; ++a) {
    for (int b = 0; b < 35; ++b) {
      for (int r = 1; r < 35; ++r) {
        if (std::gcd(r, 35) != 1) continue;
        const int s = 1 + (r * 11) % 34;
        if (std::gcd(s, 35) != 1) continue;
        ++toy_total;
        const auto sum = fed::add_ciphertexts(toy.pub, fed::encrypt(toy.pub, a, r), fed::encrypt(toy.pub, b, s));
        if (fed::decrypt(toy.pub, toy.sec, sum) == (a + b) % 35) ++toy_ok;
      }
    }
  }
  const double t = seconds_since(t0);
  return {ok == 1000 && toy_ok == toy_total && t < 60.0,
          fmt("512-bit key: %zu/1000 sums exact; n=35: %zu/%zu exact; %.2f s (< 60 s)", ok, toy_ok, toy_total, t)};
}

Outcome encrypted_matches_plaintext() {
  const auto prep = transfer::prepare_scenario(transfer::make_scenario(transfer::default_scenario_spec(), 1));
  transfer::ExperimentSettings s;
  s.rounds = 10;
  s.key_bits = 512;
  const double bound = static_cast<double>(prep.sources.size()) * std::ldexp(1.0, -16);

  std::vector<std::vector<double>> plain_traj, enc_traj;
  transfer::run_stage1(prep, s, s.lambda, 1, true,
                       [&](const fed::RoundSnapshot& snap) { plain_traj.push_back(snap.global.values); });
  // Each encrypted round is compared with plaintext aggregation of the same uploads.
  double worst_round = 0.0;
  std::size_t rounds_ok = 0;
  s.mode = fed::AggregationMode::encrypted;
  transfer::run_stage1(prep, s, s.lambda, 1, true, [&](const fed::RoundSnapshot& snap) {
    enc_traj.push_back(snap.global.values);
    const auto plain = fed::fedavg(snap.uploads, snap.weights);
    double w = 0.0;
    for (std::size_t j = 0; j < plain.size(); ++j) w = std::max(w, std::abs(plain[j] - snap.global[j]));
    worst_round = std::max(worst_round, w);
    if (w <= bound) ++rounds_ok;
  });
  double drift = 0.0;
  for (std::size_t r = 0; r < std::min(plain_traj.size(), enc_traj.size()); ++r) {
    for (std::size_t j = 0; j < plain_traj[r].size(); ++j) {
      drift = std::max(drift, std::abs(plain_traj[r][j] - enc_traj[r][j]));
    }
  }
  return {rounds_ok == 10,
          fmt("%zu/10 rounds within |C|*2^-16 = %.3g (worst %.3g); independent-run drift after 10 rounds %.3g",
              rounds_ok, bound, worst_round, drift)};
}

Outcome single_client_reduction() {
  const auto scenario = transfer::make_scenario(transfer::default_scenario_spec(), 6);
  auto table = transfer::prepare_source(scenario.sources[0], 0, 1);
  const transfer::ExperimentSettings s;
  const auto darkl0 = models::init_darkl(static_cast<std::size_t>(table.x_base.cols()), 1, s.dims, s.lambda, 61);
  const auto utp0 = models::init_utp(static_cast<std::size_t>(table.x_base.cols()) + 1, s.dims, 62);
  fed::FederatedConfig cfg;
  cfg.rounds = 50;
  cfg.seed = 63;
  const std::string id = scenario.sources[0].city_id;
  const auto fed_run = fed::run_federated_training({{id, table, darkl0, utp0}}, cfg);
  auto darkl = darkl0;
  auto utp = utp0;
  for (std::size_t r = 1; r <= cfg.rounds; ++r) {
    models::local_train_epoch(darkl, utp, table, cfg.train, fed::client_epoch_seed(cfg.seed, id, r, 1));
  }
  const auto rk = models::flatten(darkl), task = models::flatten(utp);
  double worst = 0.0;
  for (std::size_t i = 0; i < rk.size(); ++i) worst = std::max(worst, std::abs(rk[i] - fed_run.global_rk[i]));
  for (std::size_t i = 0; i < task.size(); ++i) worst = std::max(worst, std::abs(task[i] - fed_run.global_task[i]));
  return {worst <= 1e-12, fmt("50 rounds on a %zu-region city, max |diff| %.3g (<= 1e-12)", table.size(), worst)};
}

Outcome metric_oracles() {
  Rng rng(1212);
  std::size_t exact = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + rng.below(200);
    std::vector<int> y(n), yhat(n);
    const std::size_t used = 1 + rng.below(5);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = 1 + static_cast<int>(rng.below(used));
      yhat[i] = 1 + static_cast<int>(rng.below(5));
    }
    const auto got = eval::macro_prf1(y, yhat, 5);
    const auto want = oracle::brute_macro_prf1(y, yhat, 5);
    if (got.precision == want.precision && got.recall == want.recall && got.f1 == want.f1) ++exact;
  }
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> counts(8);
    for (auto& c : counts) c = rng.uniform() < 0.2 ? 0.0 : static_cast<double>(rng.below(500));
    worst = std::max(worst, std::abs(features::poi_entropy(counts) - oracle::direct_entropy(counts)));
  }
  return {exact == 1000 && worst <= 1e-12,
          fmt("%zu/1000 macro P/R/F1 exact; entropy max |diff| %.3g (<= 1e-12)", exact, worst)};
}

// ---------------------------------------------------------------------------
// Trend criteria on the default scenario

struct SeedRun {
  std::map<transfer::Variant, double> f1;
  std::vector<double> mae_by_lambda;
  std::vector<double> f1_by_fraction;
  double full_and_target_only_s = 0.0;
};

double target_mae(const transfer::PreparedScenario& prep, const models::DarklModel& darkl) {
  return eval::mae_mse(prep.target.cp_truth, transfer::impute_missing(darkl, prep.target.x_base)).mae;
}

SeedRun run_seed(std::uint64_t seed, bool trends) {
  SeedRun out;
  const auto spec = transfer::default_scenario_spec();
  const auto prep = transfer::prepare_scenario(transfer::make_scenario(spec, seed));
  const transfer::ExperimentSettings settings;
  transfer::Stage1Cache cache;

  auto t0 = Clock::now();
  out.f1[transfer::Variant::full] = transfer::run_variant(transfer::Variant::full, prep, settings, seed, &cache).outcome.report.f1;
  out.f1[transfer::Variant::target_only] =
      transfer::run_variant(transfer::Variant::target_only, prep, settings, seed, &cache).outcome.report.f1;
  out.full_and_target_only_s = seconds_since(t0);
  if (!trends) return out;

  for (auto v : {transfer::Variant::no_finetune, transfer::Variant::no_darkl}) {
    out.f1[v] = transfer::run_variant(v, prep, settings, seed, &cache).outcome.report.f1;
  }
  for (double lambda : kLambdaGrid) {
    if (lambda == settings.lambda) {
      out.mae_by_lambda.push_back(target_mae(prep, cache.get(prep, settings, settings.lambda, seed).darkl));
    } else {
      out.mae_by_lambda.push_back(target_mae(prep, transfer::run_stage1(prep, settings, lambda, seed, false).darkl));
    }
  }
  for (double fraction : kFractionGrid) {
    auto s = settings;
    s.label_fraction = fraction;
    out.f1_by_fraction.push_back(transfer::run_variant(transfer::Variant::full, prep, s, seed, &cache).outcome.report.f1);
  }
  return out;
}

struct TrendResults {
  std::vector<SeedRun> seeds;
  double mean(transfer::Variant v) const {
    double s = 0.0;
    for (const auto& r : seeds) s += r.f1.at(v);
    return s / static_cast<double>(seeds.size());
  }
};

const TrendResults& trend_results(bool need_trends) {
  static TrendResults results;
  static bool have_trends = false;
  if (results.seeds.empty() || (need_trends && !have_trends)) {
    results.seeds.clear();
    for (std::uint64_t seed = 1; seed <= kSeeds; ++seed) {
      const auto t0 = Clock::now();
      results.seeds.push_back(run_seed(seed, need_trends));
      std::fprintf(stderr, "  [seed %llu done in %.1f s]\n", static_cast<unsigned long long>(seed), seconds_since(t0));
    }
    have_trends = need_trends;
  }
  return results;
}

bool g_need_trends = true;

Outcome transfer_gain() {
  const auto& r = trend_results(g_need_trends);
  const double full = r.mean(transfer::Variant::full), target = r.mean(transfer::Variant::target_only);
  double t = 0.0;
  for (const auto& s : r.seeds) t += s.full_and_target_only_s;
  return {full - target >= 0.03 && t <= 600.0,
          fmt("mean F1 full %.4f vs target_only %.4f, gain %.4f (>= 0.03); %.1f s (<= 600 s)", full, target,
              full - target, t)};
}

Outcome ablation_ordering() {
  const auto& r = trend_results(true);
  const double full = r.mean(transfer::Variant::full);
  const double no_ft = r.mean(transfer::Variant::no_finetune);
  const double no_darkl = r.mean(transfer::Variant::no_darkl);
  const bool ok = full >= no_ft - 0.005 && no_ft >= no_darkl - 0.005;
  return {ok, fmt("mean F1 full %.4f, no_finetune %.4f, no_darkl %.4f (ordered within 0.005)", full, no_ft, no_darkl)};
}

double mean_mae_at(const TrendResults& r, std::size_t grid_index) {
  double s = 0.0;
  for (const auto& seed : r.seeds) s += seed.mae_by_lambda[grid_index];
  return s / static_cast<double>(r.seeds.size());
}

Outcome domain_classifier_effect() {
  const auto& r = trend_results(true);
  const double at0 = mean_mae_at(r, 0), at06 = mean_mae_at(r, 3);
  return {at06 <= at0, fmt("mean target MAE lambda=0.6 %.4f vs lambda=0 %.4f", at06, at0)};
}

Outcome lambda_sweep_shape() {
  const auto& r = trend_results(true);
  const std::size_t last = std::size(kLambdaGrid) - 1;
  std::size_t interior = 0;
  for (const auto& seed : r.seeds) {
    const auto it = std::min_element(seed.mae_by_lambda.begin(), seed.mae_by_lambda.end());
    const auto at = static_cast<std::size_t>(it - seed.mae_by_lambda.begin());
    if (at != 0 && at != last) ++interior;
  }
  std::string curve;
  std::size_t best = 0;
  for (std::size_t i = 0; i <= last; ++i) {
    curve += fmt("%s%.1f:%.4f", i ? " " : "", kLambdaGrid[i], mean_mae_at(r, i));
    if (mean_mae_at(r, i) < mean_mae_at(r, best)) best = i;
  }
  return {interior >= 7, fmt("interior minimum in %zu/10 seeds (>= 7); mean curve [%s], argmin lambda %.1f", interior,
                             curve.c_str(), kLambdaGrid[best])};
}

Outcome label_fraction_sweep() {
  const auto& r = trend_results(true);
  std::vector<double> mean(std::size(kFractionGrid), 0.0);
  for (const auto& seed : r.seeds) {
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += seed.f1_by_fraction[i] / static_cast<double>(r.seeds.size());
  }
  bool ok = true;
  std::string curve;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    if (i > 0 && mean[i] < mean[i - 1] - 0.01) ok = false;
    curve += fmt("%s%.2f:%.4f", i ? " " : "", kFractionGrid[i], mean[i]);
  }
  return {ok, fmt("mean F1 [%s] (non-decreasing within 0.01)", curve.c_str())};
}

// ---------------------------------------------------------------------------
// End to end

const char* kDeterminismConfig = R"(
seed: 9
seeds: [9, 10]
rounds: 4
fine_tune_epochs: 3
batch_size: 32
mode: encrypted
key_bits: 256
fe_dims: [16, 8]
dr_dims: [8]
dc_dims: [8]
utp_dims: [16, 8]
sweep_kind: lambda
sweep_grid: [0.0, 0.5, 1.0]
sources:
  - {id: alpha, n_regions: 300}
  - {id: beta, n_regions: 260, poi_weights: [0.05, 0.05, 0.1, 0.1, 0.15, 0.15, 0.2, 0.2]}
target:
  id: gamma
  n_regions: 240
)";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = slurp(e.path());
  }
  return files;
}

Outcome determinism() {
  const auto dir = fs::temp_directory_path() / "ccftl_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    std::ofstream(dir / "cfg.yaml") << kDeterminismConfig;
  }
  int codes[2];
  for (int i = 0; i < 2; ++i) {
    const auto out = dir / ("run" + std::to_string(i));
    const std::string cmd = std::string(CCFTL_CLI_PATH) + " all --config " + (dir / "cfg.yaml").string() + " --out " +
                            out.string() + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    codes[i] = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  const auto a = snapshot(dir / "run0"), b = snapshot(dir / "run1");
  const bool same = !a.empty() && a == b;
  return {codes[0] == 0 && codes[1] == 0 && same,
          fmt("exit codes %d/%d, %zu files, output trees %s", codes[0], codes[1], a.size(),
              same ? "byte-identical" : "DIFFER")};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
  bool trend;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "gradient suite", gradient_suite, false},
      {2, "reversal identity", reversal_identity, false},
      {3, "fedavg oracle", fedavg_oracle, false},
      {4, "homomorphic sums", paillier_correctness, false},
      {5, "encrypted matches plaintext", encrypted_matches_plaintext, false},
      {6, "single-client reduction", single_client_reduction, false},
      {7, "transfer gain", transfer_gain, false},
      {8, "ablation ordering", ablation_ordering, true},
      {9, "domain classifier effect", domain_classifier_effect, true},
      {10, "lambda sweep shape", lambda_sweep_shape, true},
      {11, "label fraction sweep", label_fraction_sweep, true},
      {12, "metric oracles", metric_oracles, false},
      {13, "determinism", determinism, false},
  };
  std::set<int> chosen;
  for (int i = 1; i < argc; ++i) chosen.insert(std::atoi(argv[i]));
  g_need_trends = chosen.empty();
  for (const auto& c : all) {
    if (chosen.count(c.id) && c.trend) g_need_trends = true;
  }

  int failed = 0;
  for (const auto& c : all) {
    if (!chosen.empty() && !chosen.count(c.id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s criterion %2d (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
