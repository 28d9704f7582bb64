#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>

#include "dynlab/matrix.hpp"

namespace dynlab {

// Which way a player moves along its gradient: the maximizing player
// ascends, the minimizing player descends.
enum class StepDirection { ascend, descend };

inline double direction_sign(StepDirection d) { return d == StepDirection::ascend ? 1.0 : -1.0; }

// Forecast of the next gradient used by the optimistic steppers.
struct Predictor {
  enum class Kind { last_gradient, running_average, discounted };
  Kind kind = Kind::last_gradient;
  double lambda = 0.9;  // discounted only, must lie in (0,1)

  static Predictor last_gradient() { return {Kind::last_gradient, 0.0}; }
  static Predictor running_average() { return {Kind::running_average, 0.0}; }
  static Predictor discounted(double lambda) { return {Kind::discounted, lambda}; }
};

enum class OptimizerKind { gd, omd, momentum, nesterov, adagrad, adam, optimistic_adam };

inline std::string to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::gd: return "gd";
    case OptimizerKind::omd: return "omd";
    case OptimizerKind::momentum: return "momentum";
    case OptimizerKind::nesterov: return "nesterov";
    case OptimizerKind::adagrad: return "adagrad";
    case OptimizerKind::adam: return "adam";
    case OptimizerKind::optimistic_adam: return "optimistic_adam";
  }
  return "?";
}

// Single-player stepper state. One instance per player; mutated in place by
// the step functions below. Only the fields used by the configured rule are
// touched.
struct OptimizerState {
  Vector params;
  double eta = 0.1;

  // omd
  Predictor predictor = Predictor::last_gradient();
  Vector predictor_m;        // M_t, zero before the first step
  long predictor_count = 0;  // gradients folded into the running average

  // momentum / nesterov
  double gamma = 0.9;
  Vector velocity;

  // adagrad / adam family
  double epsilon = 1e-8;
  Vector accumulator;
  double beta1 = 0.9, beta2 = 0.999;
  Vector first_moment, second_moment;
  long timestep = 0;
  Vector prev_precond_step;  // optimistic adam

  explicit OptimizerState(Vector initial = {}, double eta_ = 0.1)
      : params(std::move(initial)), eta(eta_) {
    const std::size_t n = params.size();
    predictor_m.assign(n, 0.0);
    velocity.assign(n, 0.0);
    accumulator.assign(n, 0.0);
    first_moment.assign(n, 0.0);
    second_moment.assign(n, 0.0);
    prev_precond_step.assign(n, 0.0);
  }

  void validate_hyperparams() const {
    require(eta > 0.0, "optimizer: eta must be positive");
    require(gamma >= 0.0 && gamma < 1.0, "optimizer: gamma must lie in [0,1)");
    require(epsilon > 0.0, "optimizer: epsilon must be positive");
    require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0,
            "optimizer: beta1/beta2 must lie in [0,1)");
  }
};

namespace detail {
inline void check_gradient(const OptimizerState& s, std::span<const double> g) {
  require(g.size() == s.params.size(), "optimizer step: gradient length mismatch");
  require(all_finite(g), "optimizer step: non-finite gradient");
}
}  // namespace detail

// params' = params +- eta * g
inline void gd_step(OptimizerState& s, std::span<const double> g, StepDirection dir) {
  detail::check_gradient(s, g);
  const double c = direction_sign(dir) * s.eta;
  for (std::size_t i = 0; i < g.size(); ++i) s.params[i] += c * g[i];
}

// Advance the predictor with a new gradient; returns M_{t+1} and updates the
// stored state. v1: M = g. v2: M = mean of all gradients seen. v3:
// M' = lambda*M + (1-lambda)*g.
inline Vector predictor_update(const Predictor& p, Vector& m, long& count,
                               std::span<const double> g) {
  require(m.size() == g.size(), "predictor_update: length mismatch");
  Vector next(m.size());
  switch (p.kind) {
    case Predictor::Kind::last_gradient:
      for (std::size_t i = 0; i < g.size(); ++i) next[i] = g[i];
      break;
    case Predictor::Kind::running_average: {
      const double n = static_cast<double>(count + 1);
      for (std::size_t i = 0; i < g.size(); ++i) next[i] = m[i] + (g[i] - m[i]) / n;
      break;
    }
    case Predictor::Kind::discounted:
      require(p.lambda > 0.0 && p.lambda < 1.0, "predictor_update: lambda must lie in (0,1)");
      for (std::size_t i = 0; i < g.size(); ++i)
        next[i] = p.lambda * m[i] + (1.0 - p.lambda) * g[i];
      break;
  }
  m = next;
  ++count;
  return next;
}

// params' = params +- eta * (g + M_{t+1} - M_t). With the last-gradient
// predictor this is exactly params +- (2 eta g_t - eta g_{t-1}).
inline void omd_step(OptimizerState& s, std::span<const double> g, StepDirection dir) {
  detail::check_gradient(s, g);
  const Vector m_prev = s.predictor_m;
  const Vector m_next = predictor_update(s.predictor, s.predictor_m, s.predictor_count, g);
  const double c = direction_sign(dir) * s.eta;
  for (std::size_t i = 0; i < g.size(); ++i) s.params[i] += c * (g[i] + m_next[i] - m_prev[i]);
}

// v' = gamma v + eta g ; params' = params +- v'
inline void momentum_step(OptimizerState& s, std::span<const double> g, StepDirection dir) {
  detail::check_gradient(s, g);
  const double sign = direction_sign(dir);
  for (std::size_t i = 0; i < g.size(); ++i) {
    s.velocity[i] = s.gamma * s.velocity[i] + s.eta * g[i];
    s.params[i] += sign * s.velocity[i];
  }
}

using GradientAt = std::function<Vector(const Vector&)>;

// Evaluates the gradient at the lookahead point params +- gamma v, then
// v' = gamma v + eta g(lookahead); params' = params +- v'. The caller owns
// the gradient evaluation (two-phase contract).
inline void nesterov_step(OptimizerState& s, const GradientAt& gradient_at, StepDirection dir) {
  const double sign = direction_sign(dir);
  Vector lookahead(s.params.size());
  for (std::size_t i = 0; i < lookahead.size(); ++i)
    lookahead[i] = s.params[i] + sign * s.gamma * s.velocity[i];
  const Vector g = gradient_at(lookahead);
  detail::check_gradient(s, g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    s.velocity[i] = s.gamma * s.velocity[i] + s.eta * g[i];
    s.params[i] += sign * s.velocity[i];
  }
}

// accumulator' += g^2 ; params' = params +- eta/(sqrt(accumulator') + eps) * g
inline void adagrad_step(OptimizerState& s, std::span<const double> g, StepDirection dir) {
  detail::check_gradient(s, g);
  const double sign = direction_sign(dir);
  for (std::size_t i = 0; i < g.size(); ++i) {
    s.accumulator[i] += g[i] * g[i];
    s.params[i] += sign * s.eta * g[i] / (std::sqrt(s.accumulator[i]) + s.epsilon);
  }
}

namespace detail {
// Shared moment update; returns the bias-corrected preconditioned step
// m_hat / (sqrt(v_hat) + eps).
inline Vector adam_precond(OptimizerState& s, std::span<const double> g) {
  ++s.timestep;
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.timestep));
  const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.timestep));
  Vector p(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    s.first_moment[i] = s.beta1 * s.first_moment[i] + (1.0 - s.beta1) * g[i];
    s.second_moment[i] = s.beta2 * s.second_moment[i] + (1.0 - s.beta2) * g[i] * g[i];
    const double mh = s.first_moment[i] / bc1;
    const double vh = s.second_moment[i] / bc2;
    p[i] = mh / (std::sqrt(vh) + s.epsilon);
  }
  return p;
}
}  // namespace detail

inline void adam_step(OptimizerState& s, std::span<const double> g, StepDirection dir) {
  detail::check_gradient(s, g);
  const Vector p = detail::adam_precond(s, g);
  const double c = direction_sign(dir) * s.eta;
  for (std::size_t i = 0; i < g.size(); ++i) s.params[i] += c * p[i];
}

// The optimistic template applied to the bias-corrected preconditioned step:
// params' = params +- (2 eta p_t - eta p_{t-1}).
inline void optimistic_adam_step(OptimizerState& s, std::span<const double> g, StepDirection dir) {
  detail::check_gradient(s, g);
  const Vector p = detail::adam_precond(s, g);
  const double c = direction_sign(dir) * s.eta;
  for (std::size_t i = 0; i < g.size(); ++i) {
    s.params[i] += c * (2.0 * p[i] - s.prev_precond_step[i]);
    s.prev_precond_step[i] = p[i];
  }
}

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::gd;
  double eta = 0.1;
  Predictor predictor = Predictor::last_gradient();
  double gamma = 0.9;
  double epsilon = 1e-8;
  double beta1 = 0.9;
  double beta2 = 0.999;
};

// Configured stepper owning its state; dispatches to the step functions.
class Optimizer {
 public:
  Optimizer(const OptimizerConfig& cfg, Vector initial)
      : kind_(cfg.kind), state_(std::move(initial), cfg.eta) {
    state_.predictor = cfg.predictor;
    state_.gamma = cfg.gamma;
    state_.epsilon = cfg.epsilon;
    state_.beta1 = cfg.beta1;
    state_.beta2 = cfg.beta2;
    state_.validate_hyperparams();
  }

  // gradient_at(p) evaluates the player's gradient at parameters p with the
  // opponent fixed; only nesterov evaluates away from the current iterate.
  void step(const GradientAt& gradient_at, StepDirection dir) {
    if (kind_ == OptimizerKind::nesterov) {
      nesterov_step(state_, gradient_at, dir);
      return;
    }
    const Vector g = gradient_at(state_.params);
    switch (kind_) {
      case OptimizerKind::gd: gd_step(state_, g, dir); break;
      case OptimizerKind::omd: omd_step(state_, g, dir); break;
      case OptimizerKind::momentum: momentum_step(state_, g, dir); break;
      case OptimizerKind::adagrad: adagrad_step(state_, g, dir); break;
      case OptimizerKind::adam: adam_step(state_, g, dir); break;
      case OptimizerKind::optimistic_adam: optimistic_adam_step(state_, g, dir); break;
      case OptimizerKind::nesterov: break;  // handled above
    }
  }

  OptimizerKind kind() const { return kind_; }
  const Vector& params() const { return state_.params; }
  Vector& mutable_params() { return state_.params; }
  const OptimizerState& state() const { return state_; }

 private:
  OptimizerKind kind_;
  OptimizerState state_;
};

}  // namespace dynlab
