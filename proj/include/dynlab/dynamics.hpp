#pragma once

#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "dynlab/games.hpp"
#include "dynlab/linalg.hpp"
#include "dynlab/matrix.hpp"
#include "dynlab/optimizers.hpp"
#include "dynlab/rng.hpp"

namespace dynlab {

struct Schedule {
  long d_steps_per_g_step = 1;
  void validate() const { require(d_steps_per_g_step >= 1, "Schedule: ratio must be >= 1"); }
};

struct TrajectoryRecord {
  long iteration = 0;   // generator update index, 1-based
  long substep = 0;     // 0 for the per-round row; 1..k for verbose substep rows
  Vector gen_params;
  Vector disc_params;
  double grad_norm_gen = 0.0;
  double grad_norm_disc = 0.0;
  double loss = 0.0;
  std::vector<double> diagnostics;  // per game, see GameSpec::diagnostic_names
};

struct Trajectory {
  std::vector<std::string> diagnostic_names;
  std::vector<TrajectoryRecord> records;
  bool diverged = false;
  long halt_iteration = -1;

  const TrajectoryRecord& back() const { return records.back(); }
};

struct StochasticConfig {
  std::size_t batch_size = 0;  // 0 = exact gradients
};

struct RunOptions {
  bool record_substeps = false;
  long record_every = 1;           // keep every n-th per-round row
  double divergence_guard = 1e12;  // halt when any |param| exceeds this
};

// Simultaneous training loop. Per round: d_steps_per_g_step discriminator
// updates (clipped after each when the game specifies a clip), then one
// generator update. With a 1:1 schedule both players see the opponent's
// pre-round parameters, reproducing the simultaneous update displays; with a
// k:1 schedule the discriminator substeps are sequential and the generator
// sees the final discriminator iterate.
inline Trajectory run_dynamics(const GameSpec& game, const OptimizerConfig& gen_cfg,
                               const Vector& gen_init, const OptimizerConfig& disc_cfg,
                               const Vector& disc_init, Schedule schedule, long iterations,
                               StochasticConfig stochastic = {}, std::uint64_t seed = 0,
                               RunOptions options = {}) {
  schedule.validate();
  require(gen_init.size() == game.gen_dim(), "run_dynamics: generator shape mismatch");
  require(disc_init.size() == game.disc_dim(), "run_dynamics: discriminator shape mismatch");
  const bool use_batches = stochastic.batch_size > 0;
  if (use_batches) require(game.has_stochastic(), "run_dynamics: game has no stochastic oracle");

  Optimizer gen(gen_cfg, gen_init);
  Optimizer disc(disc_cfg, disc_init);
  NormalStream rng(seed);

  Trajectory traj;
  traj.diagnostic_names = game.diagnostic_names();
  traj.records.reserve(static_cast<std::size_t>(iterations / std::max<long>(1, options.record_every)) + 1);

  const auto player_grad = [&](const BatchContext* ctx, bool for_gen, const Vector& own,
                               const Vector& opp) {
    Vector ggen, gdisc;
    if (for_gen)
      game.gradients(ctx, own, opp, ggen, gdisc);
    else
      game.gradients(ctx, opp, own, ggen, gdisc);
    return for_gen ? ggen : gdisc;
  };

  const auto finite_and_bounded = [&](const Vector& v) {
    return all_finite(v) && norm_inf(v) <= options.divergence_guard;
  };

  const bool simultaneous = schedule.d_steps_per_g_step == 1;

  for (long t = 1; t <= iterations; ++t) {
    const Vector gen_pre = gen.params();
    const Vector disc_pre = disc.params();
    double last_disc_grad_norm = 0.0;

    // 1:1 rounds share a single batch between the two players (the
    // simultaneous form substitutes the same estimates into both updates);
    // k:1 rounds draw a fresh batch per step.
    std::unique_ptr<BatchContext> shared_ctx;
    if (use_batches && simultaneous)
      shared_ctx = game.draw_batch(gen_pre, stochastic.batch_size, rng);

    for (long k = 0; k < schedule.d_steps_per_g_step; ++k) {
      std::unique_ptr<BatchContext> fresh_ctx;
      if (use_batches && !simultaneous)
        fresh_ctx = game.draw_batch(gen_pre, stochastic.batch_size, rng);
      const BatchContext* ctx = simultaneous ? shared_ctx.get() : fresh_ctx.get();
      const GradientAt disc_grad_at = [&](const Vector& w_at) {
        return player_grad(ctx, false, w_at, gen_pre);
      };
      last_disc_grad_norm = norm2(disc_grad_at(disc.params()));
      disc.step(disc_grad_at, game.disc_direction());
      if (auto c = game.clip_value()) disc.mutable_params() = clip_weights(disc.params(), *c);
      if (options.record_substeps) {
        TrajectoryRecord rec;
        rec.iteration = t;
        rec.substep = k + 1;
        rec.gen_params = gen.params();
        rec.disc_params = disc.params();
        rec.grad_norm_disc = last_disc_grad_norm;
        rec.loss = game.loss(gen.params(), disc.params());
        rec.diagnostics = game.diagnostics(gen.params(), disc.params());
        traj.records.push_back(std::move(rec));
      }
    }

    // Simultaneous rounds evaluate the generator against the pre-round
    // discriminator; k:1 rounds against the latest iterate.
    const Vector& disc_for_gen = simultaneous ? disc_pre : disc.params();
    std::unique_ptr<BatchContext> gen_ctx;
    if (use_batches && !simultaneous)
      gen_ctx = game.draw_batch(gen_pre, stochastic.batch_size, rng);
    const BatchContext* ctx_for_gen = simultaneous ? shared_ctx.get() : gen_ctx.get();
    const GradientAt gen_grad_at = [&](const Vector& g_at) {
      return player_grad(ctx_for_gen, true, g_at, disc_for_gen);
    };
    const double gen_grad_norm = norm2(gen_grad_at(gen.params()));
    gen.step(gen_grad_at, game.gen_direction());

    if (!finite_and_bounded(gen.params()) || !finite_and_bounded(disc.params())) {
      traj.diverged = true;
      traj.halt_iteration = t;
      break;
    }

    if (t % std::max<long>(1, options.record_every) == 0 || t == iterations) {
      TrajectoryRecord rec;
      rec.iteration = t;
      rec.gen_params = gen.params();
      rec.disc_params = disc.params();
      rec.grad_norm_gen = gen_grad_norm;
      rec.grad_norm_disc = last_disc_grad_norm;
      rec.loss = game.loss(gen.params(), disc.params());
      rec.diagnostics = game.diagnostics(gen.params(), disc.params());
      traj.records.push_back(std::move(rec));
    }
  }
  return traj;
}

// ---------------------------------------------------------------------------
// Specialized optimistic dynamics for min_x max_y x^T A y:
//   x_t = x_{t-1} - 2 eta A y_{t-1} + eta A y_{t-2}
//   y_t = y_{t-1} + 2 eta A^T x_{t-1} - eta A^T x_{t-2}
// with x_{-1} = 2 x_0, y_{-1} = 2 y_0 and the pseudoinverse-based x_{-2},
// y_{-2} that make the recursion's two-step history well defined.
// ---------------------------------------------------------------------------

struct BilinearOmdState {
  Matrix a;
  double eta = 0.0;
  long t = 0;  // index of the current iterate
  Vector x_t, x_tm1, x_tm2;
  Vector y_t, y_tm1, y_tm2;
};

inline BilinearOmdState omd_bilinear_init(const Matrix& a, const Vector& x0, const Vector& y0,
                                          double eta) {
  require(eta > 0.0, "omd_bilinear_init: eta must be positive");
  require(x0.size() == a.rows() && y0.size() == a.cols(), "omd_bilinear_init: dimension mismatch");
  const double range_tol = 1e-9;
  const Vector px = project_onto_range(a, x0);
  const double rx = norm2(x0 - px);
  require(rx <= range_tol * std::max(1.0, norm2(x0)),
          "omd_bilinear_init: x0 outside the column space of A, projection residual " +
              std::to_string(rx));
  const Matrix at = a.transposed();
  const Vector py = project_onto_range(at, y0);
  const double ry = norm2(y0 - py);
  require(ry <= range_tol * std::max(1.0, norm2(y0)),
          "omd_bilinear_init: y0 outside the column space of A^T, projection residual " +
              std::to_string(ry));

  BilinearOmdState s;
  s.a = a;
  s.eta = eta;
  s.t = 0;
  s.x_t = x0;
  s.x_tm1 = 2.0 * x0;
  s.y_t = y0;
  s.y_tm1 = 2.0 * y0;
  // x_{-2} = 4 x_0 + (1/eta) (A^T)+ y_0 ;  y_{-2} = 4 y_0 - (1/eta) A+ x_0
  const Matrix pinv_a = pseudoinverse(a);
  const Matrix pinv_at = pseudoinverse(at);
  s.x_tm2 = 4.0 * x0;
  axpy(1.0 / eta, pinv_at.apply(y0), s.x_tm2);
  s.y_tm2 = 4.0 * y0;
  axpy(-1.0 / eta, pinv_a.apply(x0), s.y_tm2);
  return s;
}

inline void omd_bilinear_step(BilinearOmdState& s) {
  Vector x_new = s.x_t;
  axpy(-2.0 * s.eta, s.a.apply(s.y_t), x_new);
  axpy(s.eta, s.a.apply(s.y_tm1), x_new);
  Vector y_new = s.y_t;
  axpy(2.0 * s.eta, s.a.apply_transposed(s.x_t), y_new);
  axpy(-s.eta, s.a.apply_transposed(s.x_tm1), y_new);
  s.x_tm2 = std::move(s.x_tm1);
  s.x_tm1 = std::move(s.x_t);
  s.x_t = std::move(x_new);
  s.y_tm2 = std::move(s.y_tm1);
  s.y_tm1 = std::move(s.y_t);
  s.y_t = std::move(y_new);
  ++s.t;
}

// Full iterate history including the virtual pre-start iterates, indexed from
// t = -2 so the exact step-identity checks can reach x_{t-4} at t = 2.
struct BilinearOmdHistory {
  Matrix a;
  double eta = 0.0;
  std::vector<Vector> xs, ys;  // xs[t + 2] is x_t

  const Vector& x(long t) const { return xs[static_cast<std::size_t>(t + 2)]; }
  const Vector& y(long t) const { return ys[static_cast<std::size_t>(t + 2)]; }
  long last_t() const { return static_cast<long>(xs.size()) - 3; }
};

inline BilinearOmdHistory run_bilinear_omd(const Matrix& a, const Vector& x0, const Vector& y0,
                                           double eta, long steps) {
  BilinearOmdState s = omd_bilinear_init(a, x0, y0, eta);
  BilinearOmdHistory h;
  h.a = a;
  h.eta = eta;
  h.xs = {s.x_tm2, s.x_tm1, s.x_t};
  h.ys = {s.y_tm2, s.y_tm1, s.y_t};
  for (long t = 0; t < steps; ++t) {
    omd_bilinear_step(s);
    h.xs.push_back(s.x_t);
    h.ys.push_back(s.y_t);
  }
  return h;
}

}  // namespace dynlab
