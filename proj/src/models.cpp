#include "ccftl/models.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ccftl/error.hpp"
#include "ccftl/rng.hpp"

namespace ccftl::models {

namespace {

using nn::Activation;

Mlp make_stack(std::size_t in, std::span<const std::size_t> hidden, std::size_t out, Activation head,
               std::uint64_t seed) {
  std::vector<std::size_t> dims{in};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out);
  std::vector<Activation> acts(hidden.size(), Activation::relu);
  acts.push_back(head);
  return nn::init_mlp(dims, acts, seed);
}

Tensor2D column(std::span<const double> v) {
  Tensor2D t(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) t(static_cast<Eigen::Index>(i), 0) = v[i];
  return t;
}

// dL/dp for mean cross-entropy with the log epsilon guard.
Tensor2D cross_entropy_grad(const Tensor2D& probs, const Tensor2D& one_hot) {
  const double inv_n = 1.0 / static_cast<double>(probs.rows());
  return (-inv_n * one_hot.array() / (probs.array() + kLogEpsilon)).matrix();
}

void check_one_hot(const Tensor2D& probs, const Tensor2D& labels, const char* who) {
  require(probs.rows() > 0, ErrorKind::invalid_argument, std::string(who) + ": empty batch");
  require(probs.rows() == labels.rows() && probs.cols() == labels.cols(), ErrorKind::dimension_mismatch,
          std::string(who) + ": label shape differs from predictions");
}

void copy_into(std::vector<double>& dst, std::size_t offset, const ParamVector& src) {
  std::copy(src.values.begin(), src.values.end(), dst.begin() + static_cast<std::ptrdiff_t>(offset));
}

}  // namespace

std::size_t DarklModel::param_count() const {
  return feature_extractor.param_count() + data_regressor.param_count() + domain_classifier.param_count();
}

DarklModel init_darkl(std::size_t input_dim, std::size_t n_domains, const ModelDims& dims, double lambda,
                      std::uint64_t seed) {
  require(!dims.feature_extractor.empty(), ErrorKind::invalid_argument,
          "init_darkl: feature extractor needs at least one layer");
  require(n_domains >= 1, ErrorKind::invalid_argument, "init_darkl: need at least one domain");
  require(lambda >= 0.0 && std::isfinite(lambda), ErrorKind::invalid_argument, "init_darkl: lambda must be >= 0");
  DarklModel m;
  const std::span<const std::size_t> fe_dims(dims.feature_extractor);
  const std::size_t fe_out = fe_dims.back();
  m.feature_extractor =
      make_stack(input_dim, fe_dims.first(fe_dims.size() - 1), fe_out, Activation::relu, derive_seed(seed, 1));
  m.data_regressor = make_stack(fe_out, dims.data_regressor, 1, Activation::sigmoid, derive_seed(seed, 2));
  m.domain_classifier =
      make_stack(fe_out, dims.domain_classifier, n_domains, Activation::softmax, derive_seed(seed, 3));
  m.lambda = lambda;
  return m;
}

UtpModel init_utp(std::size_t input_dim, const ModelDims& dims, std::uint64_t seed) {
  return {make_stack(input_dim, dims.task_predictor, kNumClasses, Activation::softmax, derive_seed(seed, 4))};
}

ParamVector flatten(const DarklModel& m) {
  const ParamVector parts[] = {nn::flatten_params(m.feature_extractor), nn::flatten_params(m.data_regressor),
                               nn::flatten_params(m.domain_classifier)};
  return nn::concat(parts);
}

DarklModel unflatten(const DarklModel& templ, std::span<const double> vec) {
  require(vec.size() == templ.param_count(), ErrorKind::dimension_mismatch,
          "unflatten: DARKL vector length mismatch");
  const std::size_t n_fe = templ.feature_extractor.param_count();
  const std::size_t n_dr = templ.data_regressor.param_count();
  DarklModel out;
  out.feature_extractor = nn::unflatten_params(templ.feature_extractor, vec.subspan(0, n_fe));
  out.data_regressor = nn::unflatten_params(templ.data_regressor, vec.subspan(n_fe, n_dr));
  out.domain_classifier = nn::unflatten_params(templ.domain_classifier, vec.subspan(n_fe + n_dr));
  out.lambda = templ.lambda;
  return out;
}

ParamVector flatten(const UtpModel& m) { return nn::flatten_params(m.net); }

UtpModel unflatten(const UtpModel& templ, std::span<const double> vec) {
  return {nn::unflatten_params(templ.net, vec)};
}

DarklOutput darkl_forward(const DarklModel& m, const Tensor2D& x) {
  const Tensor2D h = nn::predict(m.feature_extractor, x);
  const Tensor2D a = nn::predict(m.data_regressor, h);
  DarklOutput out;
  out.cp_hat.assign(a.data(), a.data() + a.size());
  out.domain_probs = nn::predict(m.domain_classifier, h);
  return out;
}

std::vector<double> darkl_impute(const DarklModel& m, const Tensor2D& x) {
  const Tensor2D a = nn::predict(m.data_regressor, nn::predict(m.feature_extractor, x));
  return {a.data(), a.data() + a.size()};
}

Tensor2D utp_forward(const UtpModel& m, const Tensor2D& x) { return nn::predict(m.net, x); }

double loss_dr(std::span<const double> cp_hat, std::span<const double> target) {
  require(!cp_hat.empty(), ErrorKind::invalid_argument, "loss_dr: empty batch");
  require(cp_hat.size() == target.size(), ErrorKind::dimension_mismatch, "loss_dr: length mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < cp_hat.size(); ++i) {
    const double r = target[i] - cp_hat[i];
    sum += r * r;
  }
  return sum / static_cast<double>(cp_hat.size());
}

double cross_entropy(const Tensor2D& probs, const Tensor2D& one_hot) {
  check_one_hot(probs, one_hot, "cross_entropy");
  const double total = -(one_hot.array() * (probs.array() + kLogEpsilon).log()).sum();
  return total / static_cast<double>(probs.rows());
}

double loss_dc(const Tensor2D& domain_probs, const Tensor2D& one_hot) { return cross_entropy(domain_probs, one_hot); }

DarklLoss darkl_loss_and_grads(const DarklModel& m, const DarklBatch& batch) {
  const auto n = batch.x.rows();
  require(n > 0, ErrorKind::invalid_argument, "darkl_loss_and_grads: empty batch");
  require(static_cast<Eigen::Index>(batch.cp_target.size()) == n, ErrorKind::invalid_argument,
          "darkl_loss_and_grads: missing consumption targets");
  require(batch.domain_label.rows() == n &&
              static_cast<std::size_t>(batch.domain_label.cols()) == m.n_domains(),
          ErrorKind::invalid_argument, "darkl_loss_and_grads: missing or malformed domain labels");

  const auto fe = nn::forward(m.feature_extractor, batch.x);
  const auto dr = nn::forward(m.data_regressor, fe.output);
  const auto dc = nn::forward(m.domain_classifier, fe.output);

  const std::span<const double> cp_hat(dr.output.data(), static_cast<std::size_t>(dr.output.size()));
  DarklLoss out;
  out.l_dr = loss_dr(cp_hat, batch.cp_target);
  out.l_dc = loss_dc(dc.output, batch.domain_label);
  out.l1 = out.l_dr - m.lambda * out.l_dc;

  const Tensor2D dr_grad = (2.0 / static_cast<double>(n)) * (dr.output - column(batch.cp_target));
  const auto dr_back = nn::backward(m.data_regressor, dr.cache, dr_grad);
  const auto dc_back = nn::backward(m.domain_classifier, dc.cache, cross_entropy_grad(dc.output, batch.domain_label));
  // Gradient reversal between the extractor and the domain classifier.
  const Tensor2D fe_grad = dr_back.input_grad - m.lambda * dc_back.input_grad;
  const auto fe_back = nn::backward(m.feature_extractor, fe.cache, fe_grad);

  out.grads = ParamVector(m.param_count());
  copy_into(out.grads.values, 0, fe_back.param_grads);
  copy_into(out.grads.values, fe_back.param_grads.size(), dr_back.param_grads);
  copy_into(out.grads.values, fe_back.param_grads.size() + dr_back.param_grads.size(), dc_back.param_grads);
  return out;
}

UtpLoss utp_loss_and_grads(const UtpModel& m, const UtpBatch& batch) {
  require(batch.task_label.rows() == batch.x.rows() &&
              static_cast<std::size_t>(batch.task_label.cols()) == m.net.output_dim(),
          ErrorKind::invalid_argument, "utp_loss_and_grads: missing or malformed task labels");
  const auto fwd = nn::forward(m.net, batch.x);
  UtpLoss out;
  out.l2 = cross_entropy(fwd.output, batch.task_label);
  out.grads = nn::backward(m.net, fwd.cache, cross_entropy_grad(fwd.output, batch.task_label)).param_grads;
  return out;
}

Tensor2D TrainingTable::x_full() const { return append_column(x_base, cp); }

Tensor2D one_hot(std::span<const int> labels_1_based, std::size_t n_classes) {
  Tensor2D t = Tensor2D::Zero(static_cast<Eigen::Index>(labels_1_based.size()), static_cast<Eigen::Index>(n_classes));
  for (std::size_t i = 0; i < labels_1_based.size(); ++i) {
    const int l = labels_1_based[i];
    require(l >= 1 && static_cast<std::size_t>(l) <= n_classes, ErrorKind::out_of_range,
            "one_hot: label " + std::to_string(l) + " outside 1.." + std::to_string(n_classes));
    t(static_cast<Eigen::Index>(i), l - 1) = 1.0;
  }
  return t;
}

Tensor2D append_column(const Tensor2D& x, std::span<const double> column) {
  require(static_cast<Eigen::Index>(column.size()) == x.rows(), ErrorKind::dimension_mismatch,
          "append_column: length mismatch");
  Tensor2D out(x.rows(), x.cols() + 1);
  out.leftCols(x.cols()) = x;
  for (Eigen::Index i = 0; i < x.rows(); ++i) out(i, x.cols()) = column[static_cast<std::size_t>(i)];
  return out;
}

Tensor2D gather_rows(const Tensor2D& x, std::span<const std::size_t> rows) {
  Tensor2D out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

EpochStats local_train_epoch(DarklModel& darkl, UtpModel& utp, const TrainingTable& data, const TrainOptions& opts,
                             std::uint64_t seed) {
  const std::size_t n = data.size();
  require(n > 0, ErrorKind::invalid_argument, "local_train_epoch: empty dataset");
  require(opts.batch_size > 0, ErrorKind::invalid_argument, "local_train_epoch: batch size must be positive");
  require(data.cp.size() == n && data.labels.size() == n, ErrorKind::invalid_argument,
          "local_train_epoch: source data needs consumption and labels for every region");
  require(data.domain_index < data.n_domains, ErrorKind::invalid_argument,
          "local_train_epoch: domain index out of range");

  Rng rng(seed);
  const auto order = rng.permutation(n);
  const Tensor2D x_full = opts.train_utp ? data.x_full() : Tensor2D{};

  EpochStats stats;
  std::size_t batches = 0;
  for (std::size_t start = 0; start < n; start += opts.batch_size) {
    const std::size_t stop = std::min(n, start + opts.batch_size);
    const std::span<const std::size_t> idx(order.data() + start, stop - start);
    std::vector<int> labels(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) labels[i] = data.labels[idx[i]];

    if (opts.train_darkl) {
      DarklBatch b;
      b.x = gather_rows(data.x_base, idx);
      b.cp_target.resize(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) b.cp_target[i] = data.cp[idx[i]];
      b.domain_label = Tensor2D::Zero(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(data.n_domains));
      b.domain_label.col(static_cast<Eigen::Index>(data.domain_index)).setOnes();
      const auto loss = darkl_loss_and_grads(darkl, b);
      const std::span<const double> g(loss.grads.values);
      const std::size_t n_fe = darkl.feature_extractor.param_count();
      const std::size_t n_dr = darkl.data_regressor.param_count();
      nn::apply_sgd(darkl.feature_extractor, g.subspan(0, n_fe), opts.lr);
      nn::apply_sgd(darkl.data_regressor, g.subspan(n_fe, n_dr), opts.lr);
      nn::apply_sgd(darkl.domain_classifier, g.subspan(n_fe + n_dr), opts.lr);
      stats.mean_l1 += loss.l1;
      stats.mean_l_dr += loss.l_dr;
      stats.mean_l_dc += loss.l_dc;
    }
    if (opts.train_utp) {
      UtpBatch b{gather_rows(x_full, idx), one_hot(labels, utp.net.output_dim())};
      const auto loss = utp_loss_and_grads(utp, b);
      nn::apply_sgd(utp.net, loss.grads.values, opts.lr);
      stats.mean_l2 += loss.l2;
    }
    ++batches;
  }
  const double inv = 1.0 / static_cast<double>(batches);
  stats.mean_l1 *= inv;
  stats.mean_l_dr *= inv;
  stats.mean_l_dc *= inv;
  stats.mean_l2 *= inv;
  return stats;
}

double train_utp_epoch(UtpModel& utp, const Tensor2D& x, std::span<const int> labels, double lr,
                       std::size_t batch_size, std::uint64_t seed) {
  const std::size_t n = static_cast<std::size_t>(x.rows());
  require(n > 0 && labels.size() == n, ErrorKind::invalid_argument, "train_utp_epoch: empty or unlabeled data");
  require(batch_size > 0, ErrorKind::invalid_argument, "train_utp_epoch: batch size must be positive");
  Rng rng(seed);
  const auto order = rng.permutation(n);
  double total = 0.0;
  std::size_t batches = 0;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t stop = std::min(n, start + batch_size);
    const std::span<const std::size_t> idx(order.data() + start, stop - start);
    std::vector<int> l(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) l[i] = labels[idx[i]];
    const auto loss = utp_loss_and_grads(utp, {gather_rows(x, idx), one_hot(l, utp.net.output_dim())});
    nn::apply_sgd(utp.net, loss.grads.values, lr);
    total += loss.l2;
    ++batches;
  }
  return total / static_cast<double>(batches);
}

}  // namespace ccftl::models
