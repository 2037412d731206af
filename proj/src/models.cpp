#include "softprune/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

namespace softprune {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kLinear: return "linear";
    case ModelKind::kLogistic: return "logistic";
    case ModelKind::kMlp2: return "mlp2";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view name) {
  for (auto kind : {ModelKind::kLinear, ModelKind::kLogistic, ModelKind::kMlp2}) {
    if (name == to_string(kind)) return kind;
  }
  throw std::invalid_argument(fmt::format("unknown model kind '{}'", name));
}

Model Model::linear(std::size_t input_dim) {
  Model m;
  m.kind = ModelKind::kLinear;
  m.input_dim = input_dim;
  m.params = Vector::Zero(static_cast<Eigen::Index>(input_dim));
  return m;
}

Model Model::logistic(std::size_t input_dim) {
  Model m = linear(input_dim);
  m.kind = ModelKind::kLogistic;
  return m;
}

Model Model::mlp2(std::size_t input_dim, std::size_t hidden_dim, std::uint64_t seed) {
  Model m;
  m.kind = ModelKind::kMlp2;
  m.input_dim = input_dim;
  m.hidden_dim = hidden_dim;
  m.params.resize(static_cast<Eigen::Index>(m.parameter_count()));
  Rng rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(input_dim, 1)));
  for (Eigen::Index i = 0; i < m.params.size(); ++i) m.params[i] = scale * rng.normal();
  return m;
}

std::size_t Model::parameter_count() const {
  switch (kind) {
    case ModelKind::kLinear:
    case ModelKind::kLogistic: return input_dim;
    case ModelKind::kMlp2: return hidden_dim * input_dim + 2 * hidden_dim + 1;
  }
  return 0;
}

void Dataset::validate() const {
  if (inputs.rows() != targets.size()) {
    throw std::invalid_argument(fmt::format("dataset has {} input rows but {} targets",
                                            inputs.rows(), targets.size()));
  }
  if (!inputs.allFinite()) throw std::invalid_argument("dataset inputs are not finite");
  require_finite(targets, "dataset targets");
}

namespace {

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

LossGrad linear_like(const Model& model, const Vector& w, const Dataset& data,
                     std::span<const std::size_t> batch) {
  LossGrad out{0.0, Vector::Zero(w.size())};
  for (std::size_t idx : batch) {
    const auto x = data.inputs.row(static_cast<Eigen::Index>(idx));
    const double y = data.targets[static_cast<Eigen::Index>(idx)];
    const double z = x.dot(w);
    double residual = 0.0;
    if (model.kind == ModelKind::kLinear) {
      residual = z - y;
      out.loss += 0.5 * residual * residual;
    } else {
      residual = logistic(z) - y;
      out.loss += softplus(z) - y * z;
    }
    out.grad += residual * x.transpose();
  }
  return out;
}

LossGrad mlp2_loss(const Model& model, const Vector& p, const Dataset& data,
                   std::span<const std::size_t> batch) {
  const auto in = static_cast<Eigen::Index>(model.input_dim);
  const auto hid = static_cast<Eigen::Index>(model.hidden_dim);
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Map<const RowMajor> w1(p.data(), hid, in);
  const auto b1 = p.segment(hid * in, hid);
  const auto w2 = p.segment(hid * in + hid, hid);
  const double b2 = p[hid * in + 2 * hid];

  LossGrad out{0.0, Vector::Zero(p.size())};
  Eigen::Map<RowMajor> g_w1(out.grad.data(), hid, in);
  auto g_b1 = out.grad.segment(hid * in, hid);
  auto g_w2 = out.grad.segment(hid * in + hid, hid);
  double& g_b2 = out.grad[hid * in + 2 * hid];

  for (std::size_t idx : batch) {
    const Vector x = data.inputs.row(static_cast<Eigen::Index>(idx)).transpose();
    const double y = data.targets[static_cast<Eigen::Index>(idx)];
    const Vector hidden = (w1 * x + b1).array().tanh().matrix();
    const double residual = w2.dot(hidden) + b2 - y;
    out.loss += 0.5 * residual * residual;
    // Backpropagate through tanh: d tanh(u) / du = 1 - tanh(u)^2.
    const Vector delta =
        (residual * w2.array() * (1.0 - hidden.array().square())).matrix();
    g_w1 += delta * x.transpose();
    g_b1 += delta;
    g_w2 += residual * hidden;
    g_b2 += residual;
  }
  return out;
}

}  // namespace

LossGrad loss_and_grad(const Model& model, const Vector& params, const Dataset& data,
                       std::span<const std::size_t> batch) {
  if (batch.empty()) throw std::domain_error("loss_and_grad needs a non-empty batch");
  if (static_cast<std::size_t>(params.size()) != model.parameter_count()) {
    throw std::invalid_argument(fmt::format("model expects {} parameters, got {}",
                                            model.parameter_count(), params.size()));
  }
  if (data.features() != model.input_dim) {
    throw std::invalid_argument(fmt::format("model input dim {} does not match {} features",
                                            model.input_dim, data.features()));
  }
  for (std::size_t idx : batch) {
    if (idx >= data.size()) {
      throw std::out_of_range(fmt::format("batch index {} beyond {} samples", idx, data.size()));
    }
  }
  LossGrad out = model.kind == ModelKind::kMlp2 ? mlp2_loss(model, params, data, batch)
                                                : linear_like(model, params, data, batch);
  const double scale = 1.0 / static_cast<double>(batch.size());
  out.loss *= scale;
  out.grad *= scale;
  return out;
}

namespace {

Vector plant_weights(Rng& rng, std::size_t n_features, std::size_t k_nonzero,
                     std::vector<std::size_t>& support) {
  if (k_nonzero > n_features) {
    throw std::invalid_argument(
        fmt::format("cannot plant {} non-zeros in {} features", k_nonzero, n_features));
  }
  std::vector<std::size_t> order = all_indices(n_features);
  rng.shuffle(order);
  support.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k_nonzero));
  std::sort(support.begin(), support.end());
  Vector w = Vector::Zero(static_cast<Eigen::Index>(n_features));
  for (std::size_t j : support) {
    const double magnitude = 1.0 + std::abs(rng.normal());
    w[static_cast<Eigen::Index>(j)] = rng.uniform() < 0.5 ? -magnitude : magnitude;
  }
  return w;
}

Matrix gaussian_design(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix x(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = rng.normal();
  }
  return x;
}

}  // namespace

Dataset gen_sparse_regression(std::size_t n_samples, std::size_t n_features,
                              std::size_t k_nonzero, double noise_std, std::uint64_t seed) {
  if (!(noise_std >= 0.0)) throw std::invalid_argument("noise_std must be >= 0");
  Rng rng(seed);
  Dataset data;
  data.true_weights = plant_weights(rng, n_features, k_nonzero, data.true_support);
  data.inputs = gaussian_design(rng, n_samples, n_features);
  data.targets = data.inputs * data.true_weights;
  if (noise_std > 0.0) {
    for (Eigen::Index i = 0; i < data.targets.size(); ++i) {
      data.targets[i] += noise_std * rng.normal();
    }
  }
  return data;
}

Dataset gen_sparse_classification(std::size_t n_samples, std::size_t n_features,
                                  std::size_t k_nonzero, std::uint64_t seed) {
  Rng rng(seed);
  Dataset data;
  data.true_weights = plant_weights(rng, n_features, k_nonzero, data.true_support);
  data.inputs = gaussian_design(rng, n_samples, n_features);
  data.targets.resize(static_cast<Eigen::Index>(n_samples));
  for (Eigen::Index i = 0; i < data.targets.size(); ++i) {
    const double p = logistic(data.inputs.row(i).dot(data.true_weights));
    data.targets[i] = rng.uniform() < p ? 1.0 : 0.0;
  }
  return data;
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> out(n);
  std::iota(out.begin(), out.end(), std::size_t{0});
  return out;
}

}  // namespace softprune
