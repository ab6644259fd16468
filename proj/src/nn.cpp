#include "ccftl/nn.hpp"

#include <cmath>
#include <string>

#include "ccftl/error.hpp"
#include "ccftl/rng.hpp"

namespace ccftl::nn {

namespace {

void activate(Activation act, Tensor2D& z) {
  switch (act) {
    case Activation::identity:
      return;
    case Activation::relu:
      z = z.cwiseMax(0.0);
      return;
    case Activation::sigmoid:
      z = z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
      return;
    case Activation::softmax:
      for (Eigen::Index r = 0; r < z.rows(); ++r) {
        auto row = z.row(r);
        row.array() -= row.maxCoeff();
        row = row.array().exp().matrix();
        row /= row.sum();
      }
      return;
  }
}

// Converts dL/dA into dL/dZ in place, given the layer's activation output A.
void activation_backward(Activation act, const Tensor2D& a, Tensor2D& grad) {
  switch (act) {
    case Activation::identity:
      return;
    case Activation::relu:
      grad = (a.array() > 0.0).select(grad, 0.0);
      return;
    case Activation::sigmoid:
      grad.array() *= a.array() * (1.0 - a.array());
      return;
    case Activation::softmax:
      for (Eigen::Index r = 0; r < grad.rows(); ++r) {
        const double dot = grad.row(r).dot(a.row(r));
        grad.row(r) = (a.row(r).array() * (grad.row(r).array() - dot)).matrix();
      }
      return;
  }
}

void check_input(const Mlp& mlp, const Tensor2D& batch) {
  require(!mlp.layers.empty(), ErrorKind::invalid_argument, "forward: empty network");
  require(static_cast<std::size_t>(batch.cols()) == mlp.input_dim(), ErrorKind::dimension_mismatch,
          "forward: batch has " + std::to_string(batch.cols()) + " columns, network expects " +
              std::to_string(mlp.input_dim()));
  require(all_finite(batch), ErrorKind::non_finite, "forward: non-finite input");
}

}  // namespace

const char* to_string(Activation act) {
  switch (act) {
    case Activation::relu:
      return "relu";
    case Activation::sigmoid:
      return "sigmoid";
    case Activation::softmax:
      return "softmax";
    case Activation::identity:
      return "identity";
  }
  return "?";
}

bool DenseLayer::operator==(const DenseLayer& other) const {
  return activation == other.activation && weights.rows() == other.weights.rows() &&
         weights.cols() == other.weights.cols() && bias.size() == other.bias.size() &&
         weights == other.weights && bias == other.bias;
}

std::size_t Mlp::input_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
std::size_t Mlp::output_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }

std::size_t Mlp::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.param_count();
  return n;
}

ParamVector concat(std::span<const ParamVector> parts) {
  ParamVector out;
  std::size_t n = 0;
  for (const auto& p : parts) n += p.size();
  out.values.reserve(n);
  for (const auto& p : parts) out.values.insert(out.values.end(), p.values.begin(), p.values.end());
  return out;
}

bool all_finite(const Tensor2D& t) { return t.allFinite(); }

Mlp init_mlp(std::span<const std::size_t> layer_dims, std::span<const Activation> activations,
             std::uint64_t seed) {
  require(layer_dims.size() >= 2, ErrorKind::invalid_argument, "init_mlp: need at least one layer");
  require(activations.size() + 1 == layer_dims.size(), ErrorKind::invalid_argument,
          "init_mlp: activations must have one entry per layer");
  for (std::size_t d : layer_dims) {
    require(d > 0, ErrorKind::invalid_argument, "init_mlp: zero layer dimension");
  }
  Rng rng(seed);
  Mlp mlp;
  mlp.layers.reserve(activations.size());
  for (std::size_t i = 0; i < activations.size(); ++i) {
    const std::size_t in = layer_dims[i];
    const std::size_t out = layer_dims[i + 1];
    const double limit = activations[i] == Activation::relu ? std::sqrt(6.0 / static_cast<double>(in)) : std::sqrt(6.0 / static_cast<double>(in + out));
    DenseLayer layer;
    layer.weights.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
        layer.weights(r, c) = rng.uniform(-limit, limit);
      }
    }
    layer.bias = Vector::Zero(static_cast<Eigen::Index>(out));
    layer.activation = activations[i];
    mlp.layers.push_back(std::move(layer));
  }
  return mlp;
}

ForwardResult forward(const Mlp& mlp, const Tensor2D& batch) {
  check_input(mlp, batch);
  ForwardResult result;
  result.cache.inputs.reserve(mlp.layers.size());
  result.cache.activations.reserve(mlp.layers.size());
  const Tensor2D* x = &batch;
  for (const auto& layer : mlp.layers) {
    result.cache.inputs.push_back(*x);
    Tensor2D z = (*x) * layer.weights.transpose();
    z.rowwise() += layer.bias.transpose();
    activate(layer.activation, z);
    result.cache.activations.push_back(std::move(z));
    x = &result.cache.activations.back();
  }
  result.output = result.cache.activations.back();
  return result;
}

Tensor2D predict(const Mlp& mlp, const Tensor2D& batch) {
  check_input(mlp, batch);
  Tensor2D x = batch;
  for (const auto& layer : mlp.layers) {
    Tensor2D z = x * layer.weights.transpose();
    z.rowwise() += layer.bias.transpose();
    activate(layer.activation, z);
    x = std::move(z);
  }
  return x;
}

BackwardResult backward(const Mlp& mlp, const ForwardCache& cache, const Tensor2D& output_grad) {
  const std::size_t n_layers = mlp.layers.size();
  require(n_layers > 0, ErrorKind::invalid_argument, "backward: empty network");
  require(cache.inputs.size() == n_layers && cache.activations.size() == n_layers,
          ErrorKind::dimension_mismatch, "backward: cache does not match network depth");
  for (std::size_t i = 0; i < n_layers; ++i) {
    const auto& layer = mlp.layers[i];
    require(static_cast<std::size_t>(cache.inputs[i].cols()) == layer.in_dim() &&
                static_cast<std::size_t>(cache.activations[i].cols()) == layer.out_dim() &&
                cache.inputs[i].rows() == output_grad.rows() &&
                cache.activations[i].rows() == output_grad.rows(),
            ErrorKind::dimension_mismatch, "backward: stale or mismatched cache");
  }
  require(output_grad.cols() == cache.activations.back().cols(), ErrorKind::dimension_mismatch,
          "backward: output gradient shape differs from forward output");

  BackwardResult result;
  result.param_grads = ParamVector(mlp.param_count());
  // Offsets of each layer's block in the flat layout.
  std::vector<std::size_t> offsets(n_layers);
  std::size_t off = 0;
  for (std::size_t i = 0; i < n_layers; ++i) {
    offsets[i] = off;
    off += mlp.layers[i].param_count();
  }

  Tensor2D grad = output_grad;
  for (std::size_t k = n_layers; k-- > 0;) {
    const auto& layer = mlp.layers[k];
    activation_backward(layer.activation, cache.activations[k], grad);
    double* base = result.param_grads.values.data() + offsets[k];
    const Tensor2D dw = grad.transpose() * cache.inputs[k];
    const Vector db = grad.colwise().sum().transpose();
    Eigen::Map<Tensor2D>(base, dw.rows(), dw.cols()) = dw;
    Eigen::Map<Vector>(base + dw.size(), db.size()) = db;
    Tensor2D next = grad * layer.weights;
    grad = std::move(next);
  }
  result.input_grad = std::move(grad);
  return result;
}

ParamVector sgd_step(const ParamVector& params, const ParamVector& grads, double lr) {
  require(params.size() == grads.size(), ErrorKind::dimension_mismatch,
          "sgd_step: parameter and gradient lengths differ");
  require(lr >= 0.0 && std::isfinite(lr), ErrorKind::invalid_argument,
          "sgd_step: learning rate must be finite and non-negative");
  ParamVector out(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    require(std::isfinite(grads[i]), ErrorKind::non_finite, "sgd_step: non-finite gradient");
    out[i] = params[i] - lr * grads[i];
  }
  return out;
}

ParamVector flatten_params(const Mlp& mlp) {
  ParamVector out(mlp.param_count());
  std::size_t off = 0;
  for (const auto& layer : mlp.layers) {
    Eigen::Map<Tensor2D>(out.values.data() + off, layer.weights.rows(), layer.weights.cols()) =
        layer.weights;
    off += layer.weights.size();
    Eigen::Map<Vector>(out.values.data() + off, layer.bias.size()) = layer.bias;
    off += layer.bias.size();
  }
  return out;
}

Mlp unflatten_params(const Mlp& templ, std::span<const double> vec) {
  require(vec.size() == templ.param_count(), ErrorKind::dimension_mismatch,
          "unflatten_params: vector has " + std::to_string(vec.size()) + " values, model needs " +
              std::to_string(templ.param_count()));
  Mlp out = templ;
  std::size_t off = 0;
  for (auto& layer : out.layers) {
    layer.weights = Eigen::Map<const Tensor2D>(vec.data() + off, layer.weights.rows(),
                                               layer.weights.cols());
    off += layer.weights.size();
    layer.bias = Eigen::Map<const Vector>(vec.data() + off, layer.bias.size());
    off += layer.bias.size();
  }
  return out;
}

Mlp unflatten_params(const Mlp& templ, const ParamVector& vec) {
  return unflatten_params(templ, std::span<const double>(vec.values));
}

void apply_sgd(Mlp& mlp, std::span<const double> grads, double lr) {
  require(grads.size() == mlp.param_count(), ErrorKind::dimension_mismatch,
          "apply_sgd: gradient length differs from model");
  std::size_t off = 0;
  for (auto& layer : mlp.layers) {
    layer.weights -= lr * Eigen::Map<const Tensor2D>(grads.data() + off, layer.weights.rows(),
                                                     layer.weights.cols());
    off += layer.weights.size();
    layer.bias -= lr * Eigen::Map<const Vector>(grads.data() + off, layer.bias.size());
    off += layer.bias.size();
  }
}

}  // namespace ccftl::nn
