#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace ccftl::nn {

/// Row-major batch matrix: one sample per row.
using Tensor2D = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class Activation { relu, sigmoid, softmax, identity };

const char* to_string(Activation act);

/// Fully connected layer y = act(W x + b) with W stored out x in.
struct DenseLayer {
  Tensor2D weights;
  Vector bias;
  Activation activation = Activation::identity;

  std::size_t in_dim() const { return static_cast<std::size_t>(weights.cols()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(weights.rows()); }
  std::size_t param_count() const { return out_dim() * in_dim() + out_dim(); }

  bool operator==(const DenseLayer& other) const;
};

struct Mlp {
  std::vector<DenseLayer> layers;

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t param_count() const;

  bool operator==(const Mlp& other) const = default;
};

/// Flat parameter layout: for each layer in order, weights row-major then bias.
struct ParamVector {
  std::vector<double> values;

  ParamVector() = default;
  explicit ParamVector(std::size_t n, double fill = 0.0) : values(n, fill) {}
  explicit ParamVector(std::vector<double> v) : values(std::move(v)) {}

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }

  bool operator==(const ParamVector& other) const = default;
};

/// Concatenates parameter vectors in argument order.
ParamVector concat(std::span<const ParamVector> parts);

/// Per-layer values recorded by forward() and consumed by backward().
struct ForwardCache {
  std::vector<Tensor2D> inputs;       // input to layer i
  std::vector<Tensor2D> activations;  // output of layer i
};

struct ForwardResult {
  Tensor2D output;
  ForwardCache cache;
};

struct BackwardResult {
  ParamVector param_grads;
  Tensor2D input_grad;
};

/// Uniform weights (He limit for ReLU layers, Glorot otherwise), zero biases. `layer_dims` has one more entry than
/// `activations`; consecutive entries give each layer's (in, out).
Mlp init_mlp(std::span<const std::size_t> layer_dims, std::span<const Activation> activations,
             std::uint64_t seed);

ForwardResult forward(const Mlp& mlp, const Tensor2D& batch);

/// Output-only forward pass, skips cache bookkeeping.
Tensor2D predict(const Mlp& mlp, const Tensor2D& batch);

/// Backpropagates `output_grad` (dLoss/dOutput, already carrying any batch
/// averaging) through the cached pass. Parameter gradients are summed over rows.
BackwardResult backward(const Mlp& mlp, const ForwardCache& cache, const Tensor2D& output_grad);

ParamVector sgd_step(const ParamVector& params, const ParamVector& grads, double lr);

ParamVector flatten_params(const Mlp& mlp);
Mlp unflatten_params(const Mlp& templ, const ParamVector& vec);
/// Same as unflatten_params but reads a window of a larger vector.
Mlp unflatten_params(const Mlp& templ, std::span<const double> vec);

/// In-place `params -= lr * grads` over the flat layout of `mlp`.
void apply_sgd(Mlp& mlp, std::span<const double> grads, double lr);

bool all_finite(const Tensor2D& t);

}  // namespace ccftl::nn
