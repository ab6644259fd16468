#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ccftl/nn.hpp"

namespace ccftl::models {

using nn::Mlp;
using nn::ParamVector;
using nn::Tensor2D;

inline constexpr double kDefaultLambda = 0.6;
inline constexpr double kDefaultLearningRate = 0.01;
inline constexpr std::size_t kDefaultBatchSize = 128;
inline constexpr std::size_t kNumClasses = 5;
/// Added inside log() of every cross-entropy term.
inline constexpr double kLogEpsilon = 1e-12;

/// Hidden widths of each stack; heads are fixed (1 sigmoid unit for the
/// regressor, one softmax unit per domain or class for the classifiers).
struct ModelDims {
  std::vector<std::size_t> feature_extractor{256, 128};
  std::vector<std::size_t> data_regressor{64, 32};
  std::vector<std::size_t> domain_classifier{64};
  std::vector<std::size_t> task_predictor{256, 64, 32};

  bool operator==(const ModelDims&) const = default;
};

/// Feature extractor feeding a data regressor and, through gradient reversal,
/// a domain classifier.
struct DarklModel {
  Mlp feature_extractor;
  Mlp data_regressor;
  Mlp domain_classifier;
  double lambda = kDefaultLambda;

  std::size_t input_dim() const { return feature_extractor.input_dim(); }
  std::size_t n_domains() const { return domain_classifier.output_dim(); }
  std::size_t param_count() const;
  bool operator==(const DarklModel&) const = default;
};

struct UtpModel {
  Mlp net;

  std::size_t input_dim() const { return net.input_dim(); }
  bool operator==(const UtpModel&) const = default;
};

DarklModel init_darkl(std::size_t input_dim, std::size_t n_domains, const ModelDims& dims, double lambda,
                      std::uint64_t seed);
UtpModel init_utp(std::size_t input_dim, const ModelDims& dims, std::uint64_t seed);

/// Layout: feature extractor, then regressor, then domain classifier.
ParamVector flatten(const DarklModel& m);
DarklModel unflatten(const DarklModel& templ, std::span<const double> vec);
ParamVector flatten(const UtpModel& m);
UtpModel unflatten(const UtpModel& templ, std::span<const double> vec);

struct DarklOutput {
  std::vector<double> cp_hat;
  Tensor2D domain_probs;
};

DarklOutput darkl_forward(const DarklModel& m, const Tensor2D& x);
/// Regressor path only.
std::vector<double> darkl_impute(const DarklModel& m, const Tensor2D& x);
Tensor2D utp_forward(const UtpModel& m, const Tensor2D& x);

double loss_dr(std::span<const double> cp_hat, std::span<const double> target);
double loss_dc(const Tensor2D& domain_probs, const Tensor2D& one_hot);
/// Mean cross-entropy of softmax outputs against one-hot rows.
double cross_entropy(const Tensor2D& probs, const Tensor2D& one_hot);

struct DarklBatch {
  Tensor2D x;                     // normalized features without consumption
  std::vector<double> cp_target;  // normalized consumption in [0,1]
  Tensor2D domain_label;          // one-hot over domains
};

struct UtpBatch {
  Tensor2D x;           // normalized features with consumption appended
  Tensor2D task_label;  // one-hot over the 5 levels
};

struct DarklLoss {
  double l1 = 0.0;  // l_dr - lambda * l_dc
  double l_dr = 0.0;
  double l_dc = 0.0;
  ParamVector grads;
};

/// Regressor and domain classifier descend their own losses; the feature
/// extractor receives dL_dr - lambda * dL_dc through the reversal layer.
DarklLoss darkl_loss_and_grads(const DarklModel& m, const DarklBatch& batch);

struct UtpLoss {
  double l2 = 0.0;
  ParamVector grads;
};

UtpLoss utp_loss_and_grads(const UtpModel& m, const UtpBatch& batch);

/// One client's prepared, normalized training rows.
struct TrainingTable {
  Tensor2D x_base;                // features without consumption
  std::vector<double> cp;         // normalized consumption target
  std::vector<int> labels;        // levels 1..5
  std::size_t domain_index = 0;
  std::size_t n_domains = 1;

  std::size_t size() const { return static_cast<std::size_t>(x_base.rows()); }
  /// x_base with cp appended as the last column.
  Tensor2D x_full() const;
};

Tensor2D one_hot(std::span<const int> labels_1_based, std::size_t n_classes);
Tensor2D append_column(const Tensor2D& x, std::span<const double> column);
Tensor2D gather_rows(const Tensor2D& x, std::span<const std::size_t> rows);

struct TrainOptions {
  double lr = kDefaultLearningRate;
  std::size_t batch_size = kDefaultBatchSize;
  bool train_darkl = true;
  bool train_utp = true;
};

struct EpochStats {
  double mean_l1 = 0.0;
  double mean_l_dr = 0.0;
  double mean_l_dc = 0.0;
  double mean_l2 = 0.0;
};

/// One shuffled pass of mini-batch SGD over `data`; the last partial batch is kept.
EpochStats local_train_epoch(DarklModel& darkl, UtpModel& utp, const TrainingTable& data,
                             const TrainOptions& opts, std::uint64_t seed);

/// Mini-batch SGD on the task predictor alone over explicit inputs.
double train_utp_epoch(UtpModel& utp, const Tensor2D& x, std::span<const int> labels, double lr,
                       std::size_t batch_size, std::uint64_t seed);

}  // namespace ccftl::models
