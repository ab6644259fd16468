#include "ccftl/metrics.hpp"

#include <cmath>
#include <string>

#include "ccftl/error.hpp"

namespace ccftl::eval {

ErrorMetrics mae_mse(std::span<const double> y, std::span<const double> yhat) {
  require(!y.empty(), ErrorKind::invalid_argument, "mae_mse: empty input");
  require(y.size() == yhat.size(), ErrorKind::dimension_mismatch, "mae_mse: length mismatch");
  ErrorMetrics m;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - yhat[i];
    m.mae += std::abs(d);
    m.mse += d * d;
  }
  m.mae /= static_cast<double>(y.size());
  m.mse /= static_cast<double>(y.size());
  return m;
}

ConfusionMatrix confusion_matrix(std::span<const int> y, std::span<const int> yhat, int n_classes) {
  require(n_classes >= 1, ErrorKind::invalid_argument, "confusion_matrix: need at least one class");
  require(y.size() == yhat.size(), ErrorKind::dimension_mismatch, "confusion_matrix: length mismatch");
  ConfusionMatrix cm(static_cast<std::size_t>(n_classes), std::vector<std::size_t>(static_cast<std::size_t>(n_classes), 0));
  for (std::size_t i = 0; i < y.size(); ++i) {
    require(y[i] >= 1 && y[i] <= n_classes && yhat[i] >= 1 && yhat[i] <= n_classes, ErrorKind::out_of_range,
            "confusion_matrix: label outside 1.." + std::to_string(n_classes));
    ++cm[static_cast<std::size_t>(y[i] - 1)][static_cast<std::size_t>(yhat[i] - 1)];
  }
  return cm;
}

ClassificationMetrics macro_prf1(std::span<const int> y, std::span<const int> yhat, int n_classes) {
  require(!y.empty(), ErrorKind::invalid_argument, "macro_prf1: empty input");
  const auto cm = confusion_matrix(y, yhat, n_classes);
  const auto k = static_cast<std::size_t>(n_classes);
  ClassificationMetrics out;
  out.support.assign(k, 0);
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t predicted = 0;
    std::size_t actual = 0;
    for (std::size_t j = 0; j < k; ++j) {
      predicted += cm[j][c];
      actual += cm[c][j];
    }
    out.support[c] = actual;
    const double tp = static_cast<double>(cm[c][c]);
    const double p = predicted ? tp / static_cast<double>(predicted) : 0.0;
    const double r = actual ? tp / static_cast<double>(actual) : 0.0;
    const double f = (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    out.precision += p;
    out.recall += r;
    out.f1 += f;
  }
  out.precision /= static_cast<double>(k);
  out.recall /= static_cast<double>(k);
  out.f1 /= static_cast<double>(k);
  return out;
}

std::vector<int> argmax_labels(const nn::Tensor2D& probs) {
  std::vector<int> out(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < probs.cols(); ++c) {
      if (probs(r, c) > probs(r, best)) best = c;
    }
    out[static_cast<std::size_t>(r)] = static_cast<int>(best) + 1;
  }
  return out;
}

}  // namespace ccftl::eval
