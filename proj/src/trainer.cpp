#include "softprune/trainer.hpp"

#include <cmath>

#include <fmt/format.h>

namespace softprune {

std::string_view to_string(GradientMode mode) {
  switch (mode) {
    case GradientMode::kStrSubgradient: return "str-subgradient";
    case GradientMode::kStdsIdentity: return "stds-identity";
  }
  return "?";
}

GradientMode parse_gradient_mode(std::string_view name) {
  for (auto mode : {GradientMode::kStrSubgradient, GradientMode::kStdsIdentity}) {
    if (name == to_string(mode)) return mode;
  }
  throw std::invalid_argument(fmt::format("unknown gradient mode '{}'", name));
}

void TrainerConfig::validate() const {
  scheduler.validate();
  lr.validate();
  if (!(std::isfinite(weight_decay) && weight_decay >= 0.0)) {
    throw std::invalid_argument("trainer.weight_decay must be >= 0");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw std::invalid_argument("trainer.momentum must lie in [0, 1)");
  }
  if (scheduler.kind == SchedulerKind::kTrainableStr && mode != GradientMode::kStrSubgradient) {
    throw std::invalid_argument("trainable-str thresholds require str-subgradient mode");
  }
}

TrainState init(const Vector& w0, const TrainerConfig& cfg) {
  require_finite(w0, "initial weights");
  TrainState state;
  state.theta = w0;
  switch (cfg.scheduler.kind) {
    case SchedulerKind::kTrainableStr:
      state.s = cfg.scheduler.s_init;
      state.d = sigmoid(state.s);
      break;
    case SchedulerKind::kPruneAtInit:
      // Magnitude pruning right after initialization.
      state.d = cfg.scheduler.final_threshold;
      break;
    default:
      state.d = threshold_at(cfg.scheduler, cfg.lr, 0);
      break;
  }
  state.w = soft_threshold(state.theta, state.d);
  if (cfg.momentum > 0.0) state.velocity = Vector::Zero(w0.size());
  return state;
}

TrainState train_step(const TrainState& state, const Vector& grad_w, const TrainerConfig& cfg) {
  const std::size_t total = cfg.lr.total_iterations();
  if (state.t >= total) {
    throw RunComplete(fmt::format("all {} scheduled steps are done", total));
  }
  if (grad_w.size() != state.theta.size()) {
    throw std::invalid_argument(fmt::format("gradient has {} entries, parameters have {}",
                                            grad_w.size(), state.theta.size()));
  }
  const double eta = lr_at_iteration(cfg.lr, state.t);

  Vector hidden_grad = grad_w;
  if (cfg.mode == GradientMode::kStrSubgradient) {
    for (Eigen::Index i = 0; i < hidden_grad.size(); ++i) {
      if (!(std::abs(state.theta[i]) > state.d)) hidden_grad[i] = 0.0;
    }
  }

  TrainState next = state;
  if (cfg.weight_decay > 0.0) hidden_grad += cfg.weight_decay * state.theta;
  if (cfg.momentum > 0.0) {
    next.velocity = cfg.momentum * state.velocity + hidden_grad;
    next.theta = state.theta - eta * next.velocity;
  } else {
    next.theta = state.theta - eta * hidden_grad;
  }

  if (cfg.scheduler.kind == SchedulerKind::kTrainableStr) {
    const double grad_s = str_threshold_gradient(
        state.s, {grad_w.data(), static_cast<std::size_t>(grad_w.size())},
        {state.theta.data(), static_cast<std::size_t>(state.theta.size())},
        {state.w.data(), static_cast<std::size_t>(state.w.size())});
    const auto step = str_trainable_threshold_step(state.s, grad_s, eta, cfg.weight_decay);
    next.s = step.logit;
    next.d = step.threshold;
  } else {
    next.d = threshold_at(cfg.scheduler, cfg.lr, state.t + 1);
  }

  next.w = soft_threshold(next.theta, next.d);
  next.t = state.t + 1;
  next.lr_accum = state.lr_accum + eta;
  return next;
}

namespace {

std::string dump_state(const TrainState& s) {
  return fmt::format("t={} d={} lr_accum={} s={} |theta|_inf={} nonfinite_theta={}", s.t, s.d,
                     s.lr_accum, s.s, s.theta.size() ? s.theta.cwiseAbs().maxCoeff() : 0.0,
                     (!s.theta.array().isFinite()).count());
}

}  // namespace

RunResult run(const TrainerConfig& cfg, const Model& model, const Dataset& data,
              const StepObserver& observer) {
  cfg.validate();
  data.validate();
  if (static_cast<std::size_t>(model.params.size()) != model.parameter_count()) {
    throw std::invalid_argument("model parameters do not match its architecture");
  }
  const std::size_t n = data.size();
  const std::size_t batches = cfg.lr.batches;
  if (n < batches) {
    throw std::invalid_argument(
        fmt::format("{} samples cannot fill {} batches per epoch", n, batches));
  }

  Rng rng(cfg.seed);
  RunResult out;
  TrainState state = init(model.params, cfg);
  std::vector<std::size_t> order = all_indices(n);

  for (std::size_t epoch = 0; epoch < cfg.lr.epochs; ++epoch) {
    rng.shuffle(order);
    const double epoch_d0 = state.d;
    const double epoch_lr0 = state.lr_accum;
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t lo = b * n / batches;
      const std::size_t hi = (b + 1) * n / batches;
      const std::span<const std::size_t> batch(order.data() + lo, hi - lo);
      const LossGrad lg = loss_and_grad(model, state.w, data, batch);
      if (!std::isfinite(lg.loss) || !lg.grad.allFinite()) {
        throw TrainingDiverged("non-finite loss or gradient: " + dump_state(state), state);
      }
      const double eta = lr_at_iteration(cfg.lr, state.t);
      TrainState next = train_step(state, lg.grad, cfg);
      if (observer) observer(StepEvent{state, next, lg.grad, eta});
      if (cfg.record_trace) {
        out.metrics.push_back(
            {next.t, lg.loss, sparsity(next.w), next.d, (next.d - state.d) / eta});
      }
      epoch_loss += lg.loss;
      state = std::move(next);
    }
    if (!cfg.record_trace) {
      const double lr_sum = state.lr_accum - epoch_lr0;
      out.metrics.push_back({state.t, epoch_loss / static_cast<double>(batches),
                             sparsity(state.w), state.d, (state.d - epoch_d0) / lr_sum});
    }
  }

  out.w = state.w;
  out.final_state = std::move(state);
  return out;
}

}  // namespace softprune
