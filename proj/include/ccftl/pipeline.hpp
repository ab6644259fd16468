#pragma once

#include <filesystem>
#include <string>

#include "ccftl/config.hpp"

namespace ccftl::pipeline {

/// Output layout under ExperimentConfig::output_dir:
///   data/<city>.csv, data/<target>_truth.csv       generate
///   train/darkl.ckpt, train/utp.ckpt, train/round_log.csv
///   transfer/predictions.csv, transfer/split.csv, transfer/utp_finetuned.ckpt
///   eval/metrics.csv
///   ablate/metrics.csv                              six rows per seed
///   sweep/<kind>.csv
void generate(const config::ExperimentConfig& cfg);
void train(const config::ExperimentConfig& cfg);
void transfer_stage(const config::ExperimentConfig& cfg);
void evaluate(const config::ExperimentConfig& cfg);
void ablate(const config::ExperimentConfig& cfg);
void sweep(const config::ExperimentConfig& cfg);
/// generate, train, transfer, evaluate, ablate, sweep in that order.
void run_all(const config::ExperimentConfig& cfg);

/// Dispatches a command name; unknown names raise ErrorKind::invalid_argument.
void run_command(const std::string& command, const config::ExperimentConfig& cfg);

/// Label used in the metrics "scenario" column, e.g. "src_a+src_b->tgt".
std::string scenario_label(const transfer::ScenarioSpec& spec);

}  // namespace ccftl::pipeline
