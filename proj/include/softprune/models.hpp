#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "softprune/core_math.hpp"

namespace softprune {

enum class ModelKind { kLinear, kLogistic, kMlp2 };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

/// A differentiable model with a flat parameter vector.
///
/// - linear:   prediction x . w, squared loss 1/2 (pred - y)^2
/// - logistic: logit x . w, cross-entropy against labels in {0, 1}
/// - mlp2:     w2 . tanh(W1 x + b1) + b2, squared loss. Parameters are laid
///             out as [W1 (row-major, hidden x input), b1, w2, b2].
///
/// Losses and gradients are averaged over the batch.
struct Model {
  ModelKind kind = ModelKind::kLinear;
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;  // mlp2 only
  std::size_t output_dim = 1;
  Vector params;

  static Model linear(std::size_t input_dim);
  static Model logistic(std::size_t input_dim);
  /// Small random weights drawn from `seed`.
  static Model mlp2(std::size_t input_dim, std::size_t hidden_dim, std::uint64_t seed);

  std::size_t parameter_count() const;
};

struct Dataset {
  Matrix inputs;
  Vector targets;
  /// Planted weights when the data is synthetic; empty otherwise.
  Vector true_weights;
  std::vector<std::size_t> true_support;

  std::size_t size() const { return static_cast<std::size_t>(inputs.rows()); }
  std::size_t features() const { return static_cast<std::size_t>(inputs.cols()); }
  void validate() const;
};

struct LossGrad {
  double loss = 0.0;
  Vector grad;
};

/// Exact mini-batch loss and gradient at `params`.
LossGrad loss_and_grad(const Model& model, const Vector& params, const Dataset& data,
                       std::span<const std::size_t> batch);

inline LossGrad loss_and_grad(const Model& model, const Dataset& data,
                              std::span<const std::size_t> batch) {
  return loss_and_grad(model, model.params, data, batch);
}

/// Gaussian design, k planted non-zeros of magnitude >= 1 with random signs,
/// targets = X w_true + noise_std * N(0, 1).
Dataset gen_sparse_regression(std::size_t n_samples, std::size_t n_features,
                              std::size_t k_nonzero, double noise_std, std::uint64_t seed);

/// Labels drawn from a logistic model with planted sparse weights.
Dataset gen_sparse_classification(std::size_t n_samples, std::size_t n_features,
                                  std::size_t k_nonzero, std::uint64_t seed);

std::vector<std::size_t> all_indices(std::size_t n);

}  // namespace softprune
