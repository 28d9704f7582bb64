#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "dynlab/matrix.hpp"

namespace dynlab {

struct SvdResult {
  Matrix left_vectors;        // m x k, orthonormal columns
  Vector singular_values;     // k, descending, nonnegative
  Matrix right_vectors;       // n x k, orthonormal columns
};

// Thrown when the Jacobi sweep cap is reached before the off-diagonal
// rotations fall under tolerance.
struct SvdConvergenceError : std::runtime_error {
  double off_diagonal_norm;
  explicit SvdConvergenceError(double off)
      : std::runtime_error("svd: Jacobi iteration did not converge, off-diagonal norm " +
                           std::to_string(off)),
        off_diagonal_norm(off) {}
};

namespace detail {

// One-sided Jacobi on the columns of a (m >= n assumed by caller's wrapper).
// Rotates column pairs until every |<col_p, col_q>| falls below the
// column-relative tolerance (with an absolute floor at rounding noise), so
// numerically-zero columns are driven down to the eps scale and never leak
// into the pseudoinverse cutoff. Accumulates the right rotations in v.
inline void one_sided_jacobi(Matrix& a, Matrix& v, double rel_tol, double noise_floor,
                             int max_sweeps) {
  const std::size_t m = a.rows(), n = a.cols();
  v = Matrix::identity(n);
  double off = 0.0;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool converged = true;
    off = 0.0;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double app = 0.0, aqq = 0.0, apq = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          app += a(i, p) * a(i, p);
          aqq += a(i, q) * a(i, q);
          apq += a(i, p) * a(i, q);
        }
        off = std::max(off, std::abs(apq));
        if (std::abs(apq) <= rel_tol * std::sqrt(app * aqq) || std::abs(apq) <= noise_floor)
          continue;
        converged = false;
        const double tau = (aqq - app) / (2.0 * apq);
        const double t = (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (std::size_t i = 0; i < m; ++i) {
          const double xp = a(i, p), xq = a(i, q);
          a(i, p) = c * xp - s * xq;
          a(i, q) = s * xp + c * xq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double xp = v(i, p), xq = v(i, q);
          v(i, p) = c * xp - s * xq;
          v(i, q) = s * xp + c * xq;
        }
      }
    }
    if (converged) return;
  }
  throw SvdConvergenceError(off);
}

// Fill zero columns of u (those with sigma ~ 0) with unit vectors
// orthonormal to all other columns, so the factor keeps orthonormal columns.
inline void complete_basis(Matrix& u, const Vector& sigma, double cutoff) {
  const std::size_t m = u.rows(), k = u.cols();
  for (std::size_t j = 0; j < k; ++j) {
    if (sigma[j] > cutoff) continue;
    for (std::size_t e = 0; e < m; ++e) {
      Vector cand(m, 0.0);
      cand[e] = 1.0;
      for (std::size_t c = 0; c < k; ++c) {
        if (c == j) continue;
        double proj = 0.0;
        for (std::size_t i = 0; i < m; ++i) proj += u(i, c) * cand[i];
        for (std::size_t i = 0; i < m; ++i) cand[i] -= proj * u(i, c);
      }
      const double nrm = norm2(cand);
      if (nrm > 0.5) {  // e-th axis was far enough from the current span
        for (std::size_t i = 0; i < m; ++i) u(i, j) = cand[i] / nrm;
        break;
      }
    }
  }
}

}  // namespace detail

// Thin SVD, k = min(m, n) columns. One-sided Jacobi; convergence when every
// off-diagonal rotation falls below 1e-14 relative to its column pair (floor
// at eps * ||a||_F^2), capped at 100 sweeps.
inline SvdResult svd(const Matrix& a) {
  require(a.finite(), "svd: input has non-finite entries");
  const bool wide = a.rows() < a.cols();
  Matrix work = wide ? a.transposed() : a;
  const std::size_t m = work.rows(), n = work.cols();

  const double scale = work.frobenius_norm();
  const double floor = std::numeric_limits<double>::epsilon() * scale * scale;
  Matrix v;
  detail::one_sided_jacobi(work, v, 1e-14, floor, 100);

  Vector sigma(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += work(i, j) * work(i, j);
    sigma[j] = std::sqrt(s);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return sigma[i] > sigma[j]; });

  Matrix u(m, n), vs(v.rows(), n);
  Vector s_sorted(n);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t src = order[j];
    s_sorted[j] = sigma[src];
    const double inv = sigma[src] > 0.0 ? 1.0 / sigma[src] : 0.0;
    for (std::size_t i = 0; i < m; ++i) u(i, j) = work(i, src) * inv;
    for (std::size_t i = 0; i < v.rows(); ++i) vs(i, j) = v(i, src);
  }
  const double cutoff = scale * std::numeric_limits<double>::epsilon() * static_cast<double>(std::max(m, n));
  detail::complete_basis(u, s_sorted, cutoff);

  if (wide) return {vs, s_sorted, u};
  return {u, s_sorted, vs};
}

// Singular values treated as zero when sigma_i <= max(rows,cols) * eps * sigma_max.
inline double pinv_cutoff(const Matrix& a, const Vector& sigma) {
  const double smax = sigma.empty() ? 0.0 : sigma.front();
  return static_cast<double>(std::max(a.rows(), a.cols())) *
         std::numeric_limits<double>::epsilon() * smax;
}

inline Matrix pseudoinverse(const Matrix& a) {
  const SvdResult f = svd(a);
  const double cut = pinv_cutoff(a, f.singular_values);
  // A+ = V diag(1/sigma) U^T
  Matrix r(a.cols(), a.rows());
  const std::size_t k = f.singular_values.size();
  for (std::size_t t = 0; t < k; ++t) {
    const double s = f.singular_values[t];
    if (s <= cut || s == 0.0) continue;
    const double inv = 1.0 / s;
    for (std::size_t i = 0; i < a.cols(); ++i)
      for (std::size_t j = 0; j < a.rows(); ++j)
        r(i, j) += f.right_vectors(i, t) * inv * f.left_vectors(j, t);
  }
  return r;
}

inline double spectral_norm(const Matrix& a) {
  if (a.rows() == 0 || a.cols() == 0) return 0.0;
  return svd(a).singular_values.front();
}

// a * a+ * v: the orthogonal projection of v onto the column space of a.
inline Vector project_onto_range(const Matrix& a, const Vector& v) {
  require(v.size() == a.rows(), "project_onto_range: dimension mismatch");
  const SvdResult f = svd(a);
  const double cut = pinv_cutoff(a, f.singular_values);
  Vector out(v.size(), 0.0);
  for (std::size_t t = 0; t < f.singular_values.size(); ++t) {
    if (f.singular_values[t] <= cut || f.singular_values[t] == 0.0) continue;
    double coef = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) coef += f.left_vectors(i, t) * v[i];
    for (std::size_t i = 0; i < v.size(); ++i) out[i] += coef * f.left_vectors(i, t);
  }
  return out;
}

// sqrt(x^T A A^T x + y^T A^T A y) = sqrt(||A^T x||^2 + ||A y||^2), the metric
// used for distances to the equilibrium set of the bilinear game.
inline double game_norm(const Matrix& a, const Vector& x, const Vector& y) {
  require(x.size() == a.rows() && y.size() == a.cols(), "game_norm: dimension mismatch");
  const Vector atx = a.apply_transposed(x);
  const Vector ay = a.apply(y);
  return std::sqrt(dot(atx, atx) + dot(ay, ay));
}

}  // namespace dynlab
