#include <gtest/gtest.h>

#include <random>

#include "dynlab/linalg.hpp"

using namespace dynlab;

namespace {

Matrix random_matrix(std::size_t m, std::size_t n, std::uint32_t seed) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Matrix a(m, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = dist(gen);
  return a;
}

Vector random_vector(std::size_t n, std::uint32_t seed) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Vector v(n);
  for (double& x : v) x = dist(gen);
  return v;
}

Matrix random_rank_k(std::size_t m, std::size_t n, std::size_t rank, std::uint32_t seed) {
  Matrix a(m, n);
  std::mt19937 gen(seed);
  std::normal_distribution<double> dist;
  for (std::size_t r = 0; r < rank; ++r) {
    Vector u(m), v(n);
    for (double& x : u) x = dist(gen);
    for (double& x : v) x = dist(gen);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) a(i, j) += u[i] * v[j];
  }
  return a;
}

double reconstruction_error(const Matrix& a, const SvdResult& f) {
  Matrix rec(a.rows(), a.cols());
  for (std::size_t t = 0; t < f.singular_values.size(); ++t)
    for (std::size_t i = 0; i < a.rows(); ++i)
      for (std::size_t j = 0; j < a.cols(); ++j)
        rec(i, j) += f.left_vectors(i, t) * f.singular_values[t] * f.right_vectors(j, t);
  return (rec - a).frobenius_norm();
}

double orthonormality_error(const Matrix& u) {
  double worst = 0.0;
  for (std::size_t p = 0; p < u.cols(); ++p)
    for (std::size_t q = 0; q < u.cols(); ++q) {
      double s = 0.0;
      for (std::size_t i = 0; i < u.rows(); ++i) s += u(i, p) * u(i, q);
      worst = std::max(worst, std::abs(s - (p == q ? 1.0 : 0.0)));
    }
  return worst;
}

}  // namespace

TEST(Svd, IdentitySingularValues) {
  const SvdResult f = svd(Matrix::identity(3));
  ASSERT_EQ(f.singular_values.size(), 3u);
  for (double s : f.singular_values) EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(Svd, DiagonalAbsoluteValuesSorted) {
  const SvdResult f = svd(Matrix::diagonal({3.0, -4.0}));
  EXPECT_NEAR(f.singular_values[0], 4.0, 1e-12);
  EXPECT_NEAR(f.singular_values[1], 3.0, 1e-12);
}

TEST(Svd, Random6x4Reconstructs) {
  const Matrix a = random_matrix(6, 4, 42);
  const SvdResult f = svd(a);
  EXPECT_LE(reconstruction_error(a, f), 1e-10 * a.frobenius_norm());
  EXPECT_LE(orthonormality_error(f.left_vectors), 1e-10);
  EXPECT_LE(orthonormality_error(f.right_vectors), 1e-10);
  EXPECT_TRUE(std::is_sorted(f.singular_values.rbegin(), f.singular_values.rend()));
}

TEST(Svd, RandomShapesUpTo20x20AcrossSeeds) {
  for (std::uint32_t seed = 0; seed < 100; ++seed) {
    std::mt19937 gen(1000 + seed);
    const std::size_t m = 1 + gen() % 20, n = 1 + gen() % 20;
    const Matrix a = random_matrix(m, n, 2000 + seed);
    const SvdResult f = svd(a);
    const double scale = std::max(a.frobenius_norm(), 1e-30);
    ASSERT_LE(reconstruction_error(a, f), 1e-10 * scale) << "seed " << seed;
    ASSERT_LE(orthonormality_error(f.left_vectors), 1e-10) << "seed " << seed;
    ASSERT_LE(orthonormality_error(f.right_vectors), 1e-10) << "seed " << seed;
  }
}

TEST(Pseudoinverse, DiagonalInvertsNonzero) {
  const Matrix p = pseudoinverse(Matrix::diagonal({2.0, 0.0}));
  EXPECT_NEAR(p(0, 0), 0.5, 1e-12);
  EXPECT_NEAR(p(0, 1), 0.0, 1e-12);
  EXPECT_NEAR(p(1, 0), 0.0, 1e-12);
  EXPECT_NEAR(p(1, 1), 0.0, 1e-12);
}

TEST(Pseudoinverse, FullRankEqualsInverse) {
  const Matrix a{{2.0, 1.0}, {1.0, 3.0}};  // det = 5
  const Matrix p = pseudoinverse(a);
  const Matrix expect{{0.6, -0.2}, {-0.2, 0.4}};
  EXPECT_LE((p - expect).frobenius_norm(), 1e-10);
}

namespace {
void expect_moore_penrose(const Matrix& a, double tol) {
  const Matrix x = pseudoinverse(a);
  const Matrix axa = a * x * a;
  const Matrix xax = x * a * x;
  const Matrix ax = a * x;
  const Matrix xa = x * a;
  EXPECT_LE((axa - a).frobenius_norm(), tol);
  EXPECT_LE((xax - x).frobenius_norm(), tol);
  EXPECT_LE((ax - ax.transposed()).frobenius_norm(), tol);
  EXPECT_LE((xa - xa.transposed()).frobenius_norm(), tol);
}
}  // namespace

TEST(Pseudoinverse, MoorePenroseConditionsRank2Of4x4) {
  const Matrix a = random_rank_k(4, 4, 2, 7);
  expect_moore_penrose(a, 1e-9 * std::max(1.0, a.frobenius_norm()));
}

TEST(Pseudoinverse, MoorePenroseAcrossRanks) {
  for (std::uint32_t seed = 0; seed < 30; ++seed) {
    std::mt19937 gen(seed);
    const std::size_t m = 2 + gen() % 6, n = 2 + gen() % 5;
    const std::size_t rank = gen() % (std::min(m, n) + 1);  // 0..min
    const Matrix a = random_rank_k(m, n, rank, 300 + seed);
    const double tol = 1e-9 * std::max(1.0, a.frobenius_norm());
    SCOPED_TRACE("seed " + std::to_string(seed));
    expect_moore_penrose(a, tol);
  }
}

TEST(SpectralNorm, KnownValues) {
  EXPECT_NEAR(spectral_norm(Matrix::identity(4)), 1.0, 1e-12);
  EXPECT_NEAR(spectral_norm(Matrix::diagonal({3.0, -4.0})), 4.0, 1e-12);
}

TEST(SpectralNorm, RankOneOuterProduct) {
  const Vector u = random_vector(5, 1), v = random_vector(3, 2);
  EXPECT_NEAR(spectral_norm(outer(u, v)), norm2(u) * norm2(v), 1e-10);
}

TEST(SpectralNorm, TransposeInvariant) {
  for (std::uint32_t seed = 0; seed < 20; ++seed) {
    const Matrix a = random_matrix(3 + seed % 5, 2 + seed % 6, 50 + seed);
    EXPECT_NEAR(spectral_norm(a), spectral_norm(a.transposed()), 1e-12);
  }
}

TEST(ProjectOntoRange, IdentityKeepsVector) {
  const Vector v = random_vector(4, 3);
  const Vector p = project_onto_range(Matrix::identity(4), v);
  EXPECT_LE(norm2(p - v), 1e-12);
}

TEST(ProjectOntoRange, KillsNullspaceCoordinate) {
  const Vector p = project_onto_range(Matrix::diagonal({1.0, 0.0}), {3.0, 5.0});
  EXPECT_NEAR(p[0], 3.0, 1e-12);
  EXPECT_NEAR(p[1], 0.0, 1e-12);
}

TEST(ProjectOntoRange, IdempotentAndFixesColumnSpace) {
  for (std::uint32_t seed = 0; seed < 20; ++seed) {
    const Matrix a = random_rank_k(5, 4, 2, 90 + seed);
    const Vector v = random_vector(5, 900 + seed);
    const Vector p1 = project_onto_range(a, v);
    const Vector p2 = project_onto_range(a, p1);
    EXPECT_LE(norm2(p2 - p1), 1e-10 * std::max(1.0, norm2(p1)));
    // vectors already in the column space stay fixed
    const Vector w = a.apply(random_vector(4, 9000 + seed));
    const Vector pw = project_onto_range(a, w);
    EXPECT_LE(norm2(pw - w), 1e-10 * std::max(1.0, norm2(w)));
  }
}

TEST(GameNorm, IdentityCase) {
  EXPECT_NEAR(game_norm(Matrix::identity(2), {1.0, 0.0}, {0.0, 1.0}), std::sqrt(2.0), 1e-14);
}

TEST(GameNorm, NullspacePairsVanish) {
  const Matrix a = Matrix::diagonal({1.0, 0.0});
  // x in null(A^T) and y in null(A)
  EXPECT_NEAR(game_norm(a, {0.0, 7.0}, {0.0, -3.0}), 0.0, 1e-14);
}

TEST(GameNorm, DimensionMismatchThrows) {
  EXPECT_THROW(game_norm(Matrix::identity(2), {1.0}, {0.0, 1.0}), std::invalid_argument);
}
