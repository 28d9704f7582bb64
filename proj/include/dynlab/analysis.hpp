#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "dynlab/dynamics.hpp"
#include "dynlab/linalg.hpp"
#include "dynlab/matrix.hpp"
#include "dynlab/report.hpp"

namespace dynlab {

// ---------------------------------------------------------------------------
// Ladder norms. With i = 2k + j (j in {0,1}), M_i = A^j (A^T A)^k and
// N_i = (A^T)^j (A A^T)^k. Levels are evaluated by alternating applications
// of A and A^T to cached vectors rather than forming matrix powers.
// ---------------------------------------------------------------------------

namespace ladder {

// M_level A^T w for w in the x-space.
inline Vector apply_m(const Matrix& a, const Vector& w, long level) {
  Vector p = a.apply_transposed(w);
  for (long i = 0; i < level; ++i) p = (i % 2 == 0) ? a.apply(p) : a.apply_transposed(p);
  return p;
}

// N_level A w for w in the y-space.
inline Vector apply_n(const Matrix& a, const Vector& w, long level) {
  Vector q = a.apply(w);
  for (long i = 0; i < level; ++i) q = (i % 2 == 0) ? a.apply_transposed(q) : a.apply(q);
  return q;
}

// <u, v> through the level-i M ladder: (M_i A^T u) . (M_i A^T v).
inline double inner_m(const Matrix& a, const Vector& u, const Vector& v, long level) {
  return dot(apply_m(a, u, level), apply_m(a, v, level));
}

// <u, v> through the level-i N ladder: (N_i A u) . (N_i A v).
inline double inner_n(const Matrix& a, const Vector& u, const Vector& v, long level) {
  return dot(apply_n(a, u, level), apply_n(a, v, level));
}

}  // namespace ladder

// delta(a, x, y, i) = ||N_i A y||^2 + ||M_i A^T x||^2. Level 0 equals the
// squared game norm.
inline double delta(const Matrix& a, const Vector& x, const Vector& y, long i) {
  require(i >= 0, "delta: level must be nonnegative");
  require(x.size() == a.rows() && y.size() == a.cols(), "delta: dimension mismatch");
  const Vector p = ladder::apply_m(a, x, i);
  const Vector q = ladder::apply_n(a, y, i);
  return dot(q, q) + dot(p, p);
}

// Step-size/contraction constants of the convergence analysis.
struct ConvergenceParams {
  double gamma = 0.0;       // spectral norm of (A A^T)+, i.e. 1/sigma_min_nonzero^2
  double lambda_inf = 0.0;  // max(||A||, ||A^T||) = sigma_max
  double eta = 0.0;

  bool preconditions_hold(double tol = 1e-12) const {
    if (gamma == 0.0) return lambda_inf <= 1.0 + tol;  // zero matrix: degenerate but fine
    return lambda_inf <= 1.0 + tol && eta < 1.0 / (3.0 * gamma * gamma);
  }

  static ConvergenceParams from_matrix(const Matrix& a, double eta) {
    ConvergenceParams p;
    p.eta = eta;
    const SvdResult f = svd(a);
    const double cut = pinv_cutoff(a, f.singular_values);
    p.lambda_inf = f.singular_values.empty() ? 0.0 : f.singular_values.front();
    double smin = 0.0;
    for (double s : f.singular_values)
      if (s > cut && s > 0.0) smin = s;  // descending order: last kept value is the smallest
    p.gamma = smin > 0.0 ? 1.0 / (smin * smin) : 0.0;
    return p;
  }
};

// ---------------------------------------------------------------------------
// Identity and inequality checks over the specialized bilinear dynamics.
// ---------------------------------------------------------------------------

// The three ladder inner-product identities relating levels i and i+1:
//   <A u', A v'>_{M_i}     = <u', v'>_{N_{i+1}}     (u' = A^T u, v' = v)
//   <A^T u, A^T (A v)>_{N_i} = <u, A v>_{M_{i+1}}
//   <u, A v>_{M_i}         = <v, A^T u>_{N_i}
// u lives in the x-space, v in the y-space.
inline VerificationReport check_ladder_inner_identities(const Matrix& a, const Vector& u,
                                                        const Vector& v, long i,
                                                        double tol = 1e-10) {
  require(u.size() == a.rows() && v.size() == a.cols(),
          "check_ladder_inner_identities: dimension mismatch");
  VerificationReport rep;
  rep.instance = "ladder inner-product identities, level " + std::to_string(i);
  const Vector atu = a.apply_transposed(u);
  const Vector av = a.apply(v);

  const auto record = [&](const std::string& name, double lhs, double rhs) {
    const double scale = std::max({std::abs(lhs), std::abs(rhs), 1.0});
    const double resid = std::abs(lhs - rhs) - tol * scale;
    rep.add(name, std::nullopt, i, lhs, rhs, resid, resid <= 0.0);
  };

  record("m_to_n_shift", ladder::inner_m(a, a.apply(atu), av, i),
         ladder::inner_n(a, atu, v, i + 1));
  record("n_to_m_shift", ladder::inner_n(a, atu, a.apply_transposed(av), i),
         ladder::inner_m(a, u, av, i + 1));
  record("cross_transpose", ladder::inner_m(a, u, av, i), ladder::inner_n(a, v, atu, i));
  return rep;
}

// Exact one-step expansion of the level-i ladder along the dynamics:
//   delta_t^i - delta_{t-1}^i = 4 eta^2 delta_{t-1}^{i+1}
//                             - 5 eta^2 delta_{t-2}^{i+1}
//                             - 2 eta^3 (<x_{t-2}, A y_{t-4}>_{M_{i+1}}
//                                        - <y_{t-2}, A^T x_{t-4}>_{N_{i+1}}).
// Requires t >= 2; history supplies the virtual iterates down to t = -2.
// Returns |lhs - rhs|.
inline double check_delta_step_identity(const BilinearOmdHistory& h, long i, long t) {
  require(t >= 2, "check_delta_step_identity: t must be >= 2");
  require(t <= h.last_t(), "check_delta_step_identity: t beyond recorded history");
  const Matrix& a = h.a;
  const double eta = h.eta;
  const double lhs = delta(a, h.x(t), h.y(t), i) - delta(a, h.x(t - 1), h.y(t - 1), i);
  const double ip = ladder::inner_m(a, h.x(t - 2), a.apply(h.y(t - 4)), i + 1) -
                    ladder::inner_n(a, h.y(t - 2), a.apply_transposed(h.x(t - 4)), i + 1);
  const double rhs = 4.0 * eta * eta * delta(a, h.x(t - 1), h.y(t - 1), i + 1) -
                     5.0 * eta * eta * delta(a, h.x(t - 2), h.y(t - 2), i + 1) -
                     2.0 * eta * eta * eta * ip;
  return std::abs(lhs - rhs);
}

// Per-step geometric decay of the ladder values, plus the two structural
// level bounds used to prove it:
//   delta_1^i = delta_0^i
//   delta_2^i <= (1+eta)^2 delta_0^i
//   t >= 3:  delta_t^i <= (1 - eta^2/gamma^2) delta_{t-1}^i + 16 eta^3 delta_0^0
//   level monotonicity  delta_t^{i+1} <= delta_t^i
//   level lower bound   delta_t^{i+2} >= delta_t^i / gamma^2
// Precondition violations are reported as failed "precondition" checks and
// the remaining checks are skipped rather than vacuously passing.
inline VerificationReport check_geometric_decay(const BilinearOmdHistory& h,
                                                const ConvergenceParams& params, long max_t,
                                                long max_i, double slack_scale = 1e-9) {
  VerificationReport rep;
  rep.instance = "geometric decay, max_t=" + std::to_string(max_t) +
                 " max_i=" + std::to_string(max_i);
  if (!params.preconditions_hold()) {
    rep.add("precondition_lambda_inf<=1", std::nullopt, std::nullopt, params.lambda_inf, 1.0, 0.0,
            params.lambda_inf <= 1.0 + 1e-12);
    const double cap = params.gamma > 0.0
                           ? 1.0 / (3.0 * params.gamma * params.gamma)
                           : std::numeric_limits<double>::infinity();
    rep.add("precondition_eta<1/(3gamma^2)", std::nullopt, std::nullopt, params.eta, cap, 0.0,
            params.eta < cap);
    return rep;
  }
  require(max_t <= h.last_t(), "check_geometric_decay: history too short");

  const Matrix& a = h.a;
  const double eta = params.eta;
  const double gamma2 = params.gamma * params.gamma;
  const double d00 = delta(a, h.x(0), h.y(0), 0);
  const double slack = slack_scale * std::max(d00, std::numeric_limits<double>::min());

  // cache delta values up to level max_i + 2
  std::vector<std::vector<double>> d(static_cast<std::size_t>(max_t) + 1);
  for (long t = 0; t <= max_t; ++t) {
    d[static_cast<std::size_t>(t)].resize(static_cast<std::size_t>(max_i) + 3);
    for (long i = 0; i <= max_i + 2; ++i)
      d[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)] = delta(a, h.x(t), h.y(t), i);
  }
  const auto dv = [&](long t, long i) {
    return d[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)];
  };

  for (long i = 0; i <= max_i; ++i) {
    {
      const double resid = std::abs(dv(1, i) - dv(0, i)) - slack;
      rep.add("first_step_identity", 1, i, dv(1, i), dv(0, i), resid, resid <= 0.0);
    }
    if (max_t >= 2) {
      const double bound = (1.0 + eta) * (1.0 + eta) * dv(0, i);
      const double resid = dv(2, i) - bound - slack;
      rep.add("second_step_bound", 2, i, dv(2, i), bound, resid, resid <= 0.0);
    }
    for (long t = 3; t <= max_t; ++t) {
      const double bound = (1.0 - eta * eta / gamma2) * dv(t - 1, i) + 16.0 * eta * eta * eta * d00;
      const double resid = dv(t, i) - bound - slack;
      rep.add("decay", t, i, dv(t, i), bound, resid, resid <= 0.0);
    }
  }
  for (long t = 0; t <= max_t; ++t) {
    for (long i = 0; i <= max_i; ++i) {
      {
        const double resid = dv(t, i + 1) - dv(t, i) - slack;
        rep.add("level_monotonicity", t, i, dv(t, i + 1), dv(t, i), resid, resid <= 0.0);
      }
      {
        const double bound = dv(t, i) / gamma2;
        const double resid = bound - dv(t, i + 2) - slack;
        rep.add("level_lower_bound", t, i, dv(t, i + 2), bound, resid, resid <= 0.0);
      }
    }
  }
  return rep;
}

// Unrolled tail bound for the level-0 ladder value:
//   t >= 2: delta_t^0 <= (1 - eta^2/gamma^2)^(t-2) (1+eta)^2 delta_0^0
//                        + 16 eta gamma^2 delta_0^0.
inline VerificationReport check_tail_bound(const BilinearOmdHistory& h,
                                           const ConvergenceParams& params, long max_t,
                                           double slack_scale = 1e-9) {
  VerificationReport rep;
  rep.instance = "tail bound, max_t=" + std::to_string(max_t);
  if (!params.preconditions_hold()) {
    rep.add("precondition", std::nullopt, std::nullopt, 0.0, 0.0, 1.0, false);
    return rep;
  }
  require(max_t <= h.last_t(), "check_tail_bound: history too short");
  const double eta = params.eta;
  const double gamma2 = params.gamma * params.gamma;
  const double d00 = delta(h.a, h.x(0), h.y(0), 0);
  const double slack = slack_scale * std::max(d00, std::numeric_limits<double>::min());
  const double tail = 16.0 * eta * gamma2 * d00;
  const double rate = 1.0 - eta * eta / gamma2;
  double geom = (1.0 + eta) * (1.0 + eta) * d00;  // value of the decaying term at t = 2
  for (long t = 2; t <= max_t; ++t) {
    const double dt = delta(h.a, h.x(t), h.y(t), 0);
    const double bound = geom + tail;
    const double resid = dt - bound - slack;
    rep.add("tail_bound", t, std::nullopt, dt, bound, resid, resid <= 0.0);
    geom *= rate;
  }
  return rep;
}

// GD on the homogeneous game with a = identity expands the squared distance
// d(t) = ||x_t||^2 + ||y_t||^2 by exactly (1 + eta^2) per step. Verifies the
// ratio on a recorded trajectory and that d(t) strictly increases; a zero
// start is reported as stationary (excluded by hypothesis).
inline VerificationReport check_gd_divergence(const std::vector<Vector>& xs,
                                              const std::vector<Vector>& ys, double eta,
                                              double rel_tol = 1e-12) {
  require(xs.size() == ys.size() && xs.size() >= 2, "check_gd_divergence: need >= 2 iterates");
  VerificationReport rep;
  rep.instance = "gd divergence recursion, eta=" + std::to_string(eta);
  const double factor = 1.0 + eta * eta;
  const double d0 = dot(xs[0], xs[0]) + dot(ys[0], ys[0]);
  if (d0 == 0.0) {
    rep.add("stationary_start", 0, std::nullopt, 0.0, 0.0, 1.0, false);
    return rep;
  }
  double prev = d0;
  for (std::size_t t = 1; t < xs.size(); ++t) {
    const double cur = dot(xs[t], xs[t]) + dot(ys[t], ys[t]);
    const double expect = factor * prev;
    const double resid = std::abs(cur - expect) - rel_tol * cur;
    rep.add("distance_ratio", static_cast<long>(t), std::nullopt, cur, expect, resid, resid <= 0.0);
    rep.add("strictly_increasing", static_cast<long>(t), std::nullopt, cur, prev, prev - cur,
            cur > prev);
    prev = cur;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// General bilinear game reduction.
// ---------------------------------------------------------------------------

// Splits the linear terms of x^T A y + b^T x + c^T y along the column spaces:
// b = b1 + b2 (b1 in R(A), A^T b2 = 0), c = c1 + c2 (c1 in R(A^T), A c2 = 0),
// and the preimages A c3 = b1, A^T b3 = c1.
struct GeneralDecomposition {
  Vector b1, b2, b3, c1, c2, c3;
};

inline GeneralDecomposition general_decompose(const Matrix& a, const Vector& b, const Vector& c) {
  require(b.size() == a.rows() && c.size() == a.cols(), "general_decompose: dimension mismatch");
  GeneralDecomposition d;
  const Matrix pinv = pseudoinverse(a);
  d.c3 = pinv.apply(b);
  d.b1 = a.apply(d.c3);  // A A+ b
  d.b2 = b - d.b1;
  const Matrix pinv_t = pseudoinverse(a.transposed());
  d.b3 = pinv_t.apply(c);
  d.c1 = a.apply_transposed(d.b3);  // A+ A c
  d.c2 = c - d.c1;
  return d;
}

// History of the optimistic recursion on the general game,
//   x_t = x_{t-1} - 2 eta (A y_{t-1} + b) + eta (A y_{t-2} + b)
//   y_t = y_{t-1} + 2 eta (A^T x_{t-1} + c) - eta (A^T x_{t-2} + c),
// with xs[t + 1] = x_t (history from t = -1).
struct GeneralOmdHistory {
  Matrix a;
  Vector b, c;
  double eta = 0.0;
  std::vector<Vector> xs, ys;

  const Vector& x(long t) const { return xs[static_cast<std::size_t>(t + 1)]; }
  const Vector& y(long t) const { return ys[static_cast<std::size_t>(t + 1)]; }
  long last_t() const { return static_cast<long>(xs.size()) - 2; }
};

inline GeneralOmdHistory run_general_omd(const Matrix& a, const Vector& b, const Vector& c,
                                         const Vector& x0, const Vector& xm1, const Vector& y0,
                                         const Vector& ym1, double eta, long steps) {
  GeneralOmdHistory h;
  h.a = a;
  h.b = b;
  h.c = c;
  h.eta = eta;
  h.xs = {xm1, x0};
  h.ys = {ym1, y0};
  for (long t = 1; t <= steps; ++t) {
    const Vector& x1 = h.x(t - 1);
    const Vector& x2 = h.x(t - 2);
    const Vector& y1 = h.y(t - 1);
    const Vector& y2 = h.y(t - 2);
    Vector xn = x1;
    axpy(-2.0 * eta, a.apply(y1), xn);
    axpy(eta, a.apply(y2), xn);
    axpy(-eta, b, xn);
    Vector yn = y1;
    axpy(2.0 * eta, a.apply_transposed(x1), yn);
    axpy(-eta, a.apply_transposed(x2), yn);
    axpy(eta, c, yn);
    h.xs.push_back(std::move(xn));
    h.ys.push_back(std::move(yn));
  }
  return h;
}

struct TransformedIterates {
  std::vector<Vector> alphas, betas;  // indexed from t = -1, like the history
  const Vector& alpha(long t) const { return alphas[static_cast<std::size_t>(t + 1)]; }
  const Vector& beta(long t) const { return betas[static_cast<std::size_t>(t + 1)]; }
  long last_t() const { return static_cast<long>(alphas.size()) - 2; }

  // Max residual of the homogeneous recursion
  // alpha_{t+1} = alpha_t - 2 eta A beta_t + eta A beta_{t-1} (and its mirror)
  // over all recorded steps.
  double recursion_residual(const Matrix& a, double eta) const {
    double worst = 0.0;
    for (long t = 0; t + 1 <= last_t(); ++t) {
      Vector ax = alpha(t);
      axpy(-2.0 * eta, a.apply(beta(t)), ax);
      axpy(eta, a.apply(beta(t - 1)), ax);
      worst = std::max(worst, norm2(alpha(t + 1) - ax));
      Vector by = beta(t);
      axpy(2.0 * eta, a.apply_transposed(alpha(t)), by);
      axpy(-eta, a.apply_transposed(alpha(t - 1)), by);
      worst = std::max(worst, norm2(beta(t + 1) - by));
    }
    return worst;
  }
};

// alpha_t = x_t + eta t b2 + b3 ; beta_t = y_t - eta t c2 + c3. The
// transformed pair follows the homogeneous optimistic recursion.
inline TransformedIterates transform_iterates(const GeneralOmdHistory& h,
                                              const GeneralDecomposition& dec, double eta) {
  require(h.xs.size() >= 3, "transform_iterates: trajectory too short");
  TransformedIterates out;
  for (long t = -1; t <= h.last_t(); ++t) {
    Vector al = h.x(t);
    axpy(eta * static_cast<double>(t), dec.b2, al);
    axpy(1.0, dec.b3, al);
    out.alphas.push_back(std::move(al));
    Vector be = h.y(t);
    axpy(-eta * static_cast<double>(t), dec.c2, be);
    axpy(1.0, dec.c3, be);
    out.betas.push_back(std::move(be));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Series classification and divergence evaluators.
// ---------------------------------------------------------------------------

enum class SeriesVerdict { converged, cycling, diverged, undetermined };

inline std::string to_string(SeriesVerdict v) {
  switch (v) {
    case SeriesVerdict::converged: return "converged";
    case SeriesVerdict::cycling: return "cycling";
    case SeriesVerdict::diverged: return "diverged";
    case SeriesVerdict::undetermined: return "undetermined";
  }
  return "?";
}

struct LimitCycleOptions {
  double conv_tol = 1e-3;
  double cycle_tol = 5e-2;
  double diverge_tol = 1e10;
};

// Trailing-window classification: diameter below conv_tol = converged;
// magnitude past the guard = diverged; diameter above cycle_tol with bounded
// magnitude = cycling; anything else undetermined.
inline SeriesVerdict detect_limit_cycle(const std::vector<double>& series, std::size_t window,
                                        LimitCycleOptions opt = {}) {
  require(window >= 1 && series.size() >= 2 * window,
          "detect_limit_cycle: series must cover at least two windows");
  double lo = series.back(), hi = series.back(), mag = 0.0;
  for (std::size_t idx = series.size() - window; idx < series.size(); ++idx) {
    lo = std::min(lo, series[idx]);
    hi = std::max(hi, series[idx]);
    mag = std::max(mag, std::abs(series[idx]));
  }
  const double diameter = hi - lo;
  if (diameter < opt.conv_tol) return SeriesVerdict::converged;
  if (mag > opt.diverge_tol) return SeriesVerdict::diverged;
  if (diameter > opt.cycle_tol) return SeriesVerdict::cycling;
  return SeriesVerdict::undetermined;
}

// KL(N(v, I) || N(theta, I)) = ||v - theta||^2 / 2.
inline double kl_gaussian_mean(const Vector& v, const Vector& theta) {
  require(v.size() == theta.size(), "kl_gaussian_mean: length mismatch");
  const Vector diff = v - theta;
  return 0.5 * dot(diff, diff);
}

// Sum p log(p/q) with 0 log 0 = 0; +inf when q vanishes where p does not.
// Inputs must be distributions up to 1e-9.
inline double kl_categorical(const Vector& p, const Vector& q) {
  require(p.size() == q.size(), "kl_categorical: length mismatch");
  double sp = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    require(p[i] >= 0.0 && q[i] >= 0.0, "kl_categorical: negative entries");
    sp += p[i];
    sq += q[i];
  }
  require(std::abs(sp - 1.0) <= 1e-9 && std::abs(sq - 1.0) <= 1e-9,
          "kl_categorical: inputs must be normalized");
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) return std::numeric_limits<double>::infinity();
    total += p[i] * std::log(p[i] / q[i]);
  }
  return total;
}

// Positionwise sum of KLs for PWM-style inputs.
inline double kl_categorical(const std::vector<Vector>& p, const std::vector<Vector>& q) {
  require(p.size() == q.size(), "kl_categorical: position count mismatch");
  double total = 0.0;
  for (std::size_t pos = 0; pos < p.size(); ++pos) total += kl_categorical(p[pos], q[pos]);
  return total;
}

}  // namespace dynlab
