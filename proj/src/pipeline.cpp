#include "ccftl/pipeline.hpp"

#include "ccftl/dataset_io.hpp"
#include "ccftl/error.hpp"

namespace ccftl::pipeline {

namespace {

namespace fs = std::filesystem;

fs::path data_dir(const config::ExperimentConfig& cfg) { return cfg.output_dir / "data"; }
fs::path train_dir(const config::ExperimentConfig& cfg) { return cfg.output_dir / "train"; }
fs::path transfer_dir(const config::ExperimentConfig& cfg) { return cfg.output_dir / "transfer"; }

fs::path city_path(const config::ExperimentConfig& cfg, const std::string& id) {
  return data_dir(cfg) / (id + ".csv");
}

fs::path truth_path(const config::ExperimentConfig& cfg) {
  return data_dir(cfg) / (cfg.scenario.target.city_id + "_truth.csv");
}

void require_artifact(const fs::path& p, const std::string& producer) {
  require(fs::exists(p), ErrorKind::missing_artifact,
          "missing " + p.string() + " (run '" + producer + "' first)");
}

transfer::Scenario load_scenario(const config::ExperimentConfig& cfg) {
  transfer::Scenario s;
  for (const auto& c : cfg.scenario.sources) {
    const auto p = city_path(cfg, c.city_id);
    require_artifact(p, "generate");
    s.sources.push_back(io::read_city_csv(p));
  }
  const auto tp = city_path(cfg, cfg.scenario.target.city_id);
  require_artifact(tp, "generate");
  s.target = io::read_city_csv(tp);
  require_artifact(truth_path(cfg), "generate");
  io::read_truth_csv(truth_path(cfg), s.target);
  return s;
}

std::vector<io::MetricsRow> variant_rows(const transfer::PreparedScenario& prepared,
                                         const config::ExperimentConfig& cfg, std::uint64_t seed) {
  transfer::Stage1Cache cache;
  std::vector<io::MetricsRow> rows;
  for (auto v : transfer::kAllVariants) {
    auto r = transfer::run_variant(v, prepared, cfg.settings, seed, &cache);
    rows.push_back({transfer::to_string(v), scenario_label(cfg.scenario), seed, r.outcome.report});
  }
  return rows;
}

}  // namespace

std::string scenario_label(const transfer::ScenarioSpec& spec) {
  std::string out;
  for (const auto& c : spec.sources) out += (out.empty() ? "" : "+") + c.city_id;
  return out + "->" + spec.target.city_id;
}

void generate(const config::ExperimentConfig& cfg) {
  const auto scenario = transfer::make_scenario(cfg.scenario, cfg.seed);
  for (const auto& c : scenario.sources) io::write_city_csv(city_path(cfg, c.city_id), c);
  io::write_city_csv(city_path(cfg, scenario.target.city_id), scenario.target);
  io::write_truth_csv(truth_path(cfg), scenario.target);
}

void train(const config::ExperimentConfig& cfg) {
  const auto prepared = transfer::prepare_scenario(load_scenario(cfg));
  const auto s1 = transfer::run_stage1(prepared, cfg.settings, cfg.settings.lambda, cfg.seed);
  io::save_checkpoint(train_dir(cfg) / "darkl.ckpt", s1.darkl);
  io::save_checkpoint(train_dir(cfg) / "utp.ckpt", s1.utp);
  io::write_round_log(train_dir(cfg) / "round_log.csv", s1.round_log);
}

void transfer_stage(const config::ExperimentConfig& cfg) {
  const auto darkl_path = train_dir(cfg) / "darkl.ckpt";
  const auto utp_path = train_dir(cfg) / "utp.ckpt";
  require_artifact(darkl_path, "train");
  require_artifact(utp_path, "train");
  const auto prepared = transfer::prepare_scenario(load_scenario(cfg));
  const auto darkl = io::load_darkl_checkpoint(darkl_path);
  const auto utp = io::load_utp_checkpoint(utp_path);
  const auto out = transfer::run_stage2(prepared, cfg.settings, &darkl, &utp, true, cfg.seed);

  const auto& t = prepared.target;
  std::vector<io::PredictionRow> rows;
  for (std::size_t i = 0; i < t.regions.size(); ++i) {
    rows.push_back({t.city_id, t.regions[i].row, t.regions[i].col, out.predicted[i], out.cp_hat[i]});
  }
  io::write_predictions_csv(transfer_dir(cfg) / "predictions.csv", rows);
  io::write_split_csv(transfer_dir(cfg) / "split.csv", out.split, t.regions.size());
  io::save_checkpoint(transfer_dir(cfg) / "utp_finetuned.ckpt", *out.tuned);
}

void evaluate(const config::ExperimentConfig& cfg) {
  const auto pred_path = transfer_dir(cfg) / "predictions.csv";
  const auto split_path = transfer_dir(cfg) / "split.csv";
  require_artifact(pred_path, "transfer");
  require_artifact(split_path, "transfer");
  const auto target = transfer::prepare_target(load_scenario(cfg).target);
  const auto preds = io::read_predictions_csv(pred_path);
  const auto split = io::read_split_csv(split_path);
  require(preds.size() == target.regions.size(), ErrorKind::io, "predictions do not cover the target city");

  std::vector<int> y;
  std::vector<int> yhat;
  for (std::size_t i : split.unlabeled) {
    require(i < preds.size(), ErrorKind::io, "split index outside the target city");
    y.push_back(target.labels[i]);
    yhat.push_back(preds[i].predicted_level);
  }
  std::vector<double> cp_hat;
  for (const auto& p : preds) cp_hat.push_back(p.cp_hat);

  transfer::MetricsReport report;
  const auto cls = eval::macro_prf1(y, yhat, static_cast<int>(models::kNumClasses));
  report.precision = cls.precision;
  report.recall = cls.recall;
  report.f1 = cls.f1;
  report.class_counts = cls.support;
  const auto err = eval::mae_mse(target.cp_truth, cp_hat);
  report.mae = err.mae;
  report.mse = err.mse;
  io::write_metrics_csv(cfg.output_dir / "eval" / "metrics.csv",
                        {{"full", scenario_label(cfg.scenario), cfg.seed, report}}, false);
}

void ablate(const config::ExperimentConfig& cfg) {
  std::vector<io::MetricsRow> rows;
  for (auto seed : cfg.effective_seeds()) {
    const auto prepared = transfer::prepare_scenario(transfer::make_scenario(cfg.scenario, seed));
    auto r = variant_rows(prepared, cfg, seed);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  io::write_metrics_csv(cfg.output_dir / "ablate" / "metrics.csv", rows, cfg.settings.record_timing);
}

void sweep(const config::ExperimentConfig& cfg) {
  const auto grid = cfg.effective_grid();
  const auto seeds = cfg.effective_seeds();
  const auto rows = transfer::sweep(cfg.sweep_kind, grid, cfg.scenario, cfg.settings, seeds);
  io::write_sweep_csv(cfg.output_dir / "sweep" / (std::string(transfer::to_string(cfg.sweep_kind)) + ".csv"), rows,
                      cfg.settings.record_timing);
}

void run_all(const config::ExperimentConfig& cfg) {
  generate(cfg);
  train(cfg);
  transfer_stage(cfg);
  evaluate(cfg);
  ablate(cfg);
  sweep(cfg);
}

void run_command(const std::string& command, const config::ExperimentConfig& cfg) {
  if (command == "generate") return generate(cfg);
  if (command == "train") return train(cfg);
  if (command == "transfer") return transfer_stage(cfg);
  if (command == "evaluate") return evaluate(cfg);
  if (command == "ablate") return ablate(cfg);
  if (command == "sweep") return sweep(cfg);
  if (command == "all") return run_all(cfg);
  fail(ErrorKind::invalid_argument, "unknown command '" + command + "'");
}

}  // namespace ccftl::pipeline
