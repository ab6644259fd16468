#pragma once

#include <span>
#include <vector>

#include "ccftl/nn.hpp"

namespace ccftl::eval {

struct ErrorMetrics {
  double mae = 0.0;
  double mse = 0.0;
};

ErrorMetrics mae_mse(std::span<const double> y, std::span<const double> yhat);

/// confusion[t][p] counts rows with true class t+1 predicted as p+1.
using ConfusionMatrix = std::vector<std::vector<std::size_t>>;

ConfusionMatrix confusion_matrix(std::span<const int> y, std::span<const int> yhat, int n_classes);

struct ClassificationMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::vector<std::size_t> support;  // true count per class
};

/// Unweighted mean over all classes of per-class precision, recall and F1.
/// Any zero denominator yields 0 for that class.
ClassificationMetrics macro_prf1(std::span<const int> y, std::span<const int> yhat, int n_classes = 5);

/// Row-wise argmax as a 1-based class; ties go to the lowest index.
std::vector<int> argmax_labels(const nn::Tensor2D& probs);

}  // namespace ccftl::eval
