#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "dynlab/games.hpp"

using namespace dynlab;

namespace {

Vector randv(std::size_t n, std::uint32_t seed, double scale = 1.0) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> d(0.0, scale);
  Vector v(n);
  for (double& x : v) x = d(gen);
  return v;
}

Matrix randm(std::size_t m, std::size_t n, std::uint32_t seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> d;
  Matrix a(m, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = d(gen);
  return a;
}

// Central finite differences of f along every coordinate of x.
Vector finite_diff(const std::function<double(const Vector&)>& f, const Vector& x,
                   double h = 1e-6) {
  Vector g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    Vector xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

void expect_close(const Vector& a, const Vector& b, double rel_tol, const std::string& what) {
  ASSERT_EQ(a.size(), b.size()) << what;
  double scale = 1.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
  for (std::size_t i = 0; i < a.size(); ++i)
    ASSERT_NEAR(a[i], b[i], rel_tol * scale) << what << " coord " << i;
}

}  // namespace

TEST(BilinearGradients, IdentityCase) {
  const BilinearGame g{Matrix::identity(2), {}, {}, 0.0};
  const auto [gx, gy] = bilinear_gradients(g, {1.0, 2.0}, {3.0, 4.0});
  EXPECT_EQ(gx, (Vector{3.0, 4.0}));
  EXPECT_EQ(gy, (Vector{1.0, 2.0}));
}

TEST(BilinearGradients, OriginGivesLinearTerms) {
  const BilinearGame g{randm(3, 2, 5), randv(3, 6), randv(2, 7), 1.0};
  const auto [gx, gy] = bilinear_gradients(g, Vector(3, 0.0), Vector(2, 0.0));
  EXPECT_EQ(gx, g.b);
  EXPECT_EQ(gy, g.c);
}

TEST(BilinearGradients, MatchesFiniteDifferences) {
  for (std::uint32_t seed = 0; seed < 20; ++seed) {
    const BilinearGame g{randm(4, 3, 100 + seed), randv(4, 200 + seed), randv(3, 300 + seed), 0.3};
    const Vector x = randv(4, 400 + seed), y = randv(3, 500 + seed);
    const auto [gx, gy] = bilinear_gradients(g, x, y);
    expect_close(gx, finite_diff([&](const Vector& xx) { return g.value(xx, y); }, x), 1e-6, "gx");
    expect_close(gy, finite_diff([&](const Vector& yy) { return g.value(x, yy); }, y), 1e-6, "gy");
  }
}

TEST(MeanGameGradients, PlainCase) {
  const MeanGame g{{3.0, 4.0}, std::nullopt, std::nullopt};
  const auto [gt, gw] = mean_game_gradients(g, {0.0, 0.0}, {1.0, 1.0});
  EXPECT_EQ(gw, (Vector{3.0, 4.0}));
  EXPECT_EQ(gt, (Vector{-1.0, -1.0}));
}

TEST(MeanGameGradients, UnitNormPenaltyVanishes) {
  const MeanGame g{{3.0, 4.0}, std::nullopt, 0.1};
  const auto [gt, gw] = mean_game_gradients(g, {0.0, 0.0}, {1.0, 0.0});
  EXPECT_NEAR(gw[0], 3.0, 1e-15);
  EXPECT_NEAR(gw[1], 4.0, 1e-15);
  (void)gt;
}

TEST(MeanGameGradients, PenaltySubstitution) {
  // v - theta = (3,4), w = (2,0), lambda = 0.1:
  // penalty term 2*0.1*w*(2-1)/2 = 0.1*w -> grad_w = (2.8, 4)
  const MeanGame g{{3.0, 4.0}, std::nullopt, 0.1};
  const auto [gt, gw] = mean_game_gradients(g, {0.0, 0.0}, {2.0, 0.0});
  EXPECT_NEAR(gw[0], 2.8, 1e-14);
  EXPECT_NEAR(gw[1], 4.0, 1e-14);
  (void)gt;
}

TEST(MeanGameGradients, PenaltyTermZeroAtOrigin) {
  const MeanGame g{{1.0}, std::nullopt, 0.5};
  const auto [gt, gw] = mean_game_gradients(g, {0.0}, {0.0});
  EXPECT_NEAR(gw[0], 1.0, 1e-15);
  (void)gt;
}

TEST(MeanGameGradients, MatchesFiniteDifferences) {
  const MeanGameSpec spec({{0.5, -1.5, 2.0}, std::nullopt, 0.2});
  for (std::uint32_t seed = 0; seed < 20; ++seed) {
    const Vector th = randv(3, 700 + seed), w = randv(3, 800 + seed);
    Vector gt, gw;
    spec.gradients(nullptr, th, w, gt, gw);
    expect_close(gw, finite_diff([&](const Vector& ww) { return spec.loss(th, ww); }, w), 1e-6,
                 "gw");
    // theta gradient of the loss (theta descends on it)
    expect_close(gt, finite_diff([&](const Vector& tt) { return spec.loss(tt, w); }, th), 1e-6,
                 "gt");
  }
}

TEST(CovarianceGradients, EquilibriumFixedPoint) {
  const CovarianceGame g{Matrix::identity(2), 0.0, std::nullopt};
  const auto [gv, gw] = covariance_game_gradients(g, Matrix::identity(2), Matrix(2, 2));
  EXPECT_LE(gv.frobenius_norm(), 1e-12);
  EXPECT_LE(gw.frobenius_norm(), 1e-12);
}

TEST(CovarianceGradients, ScalarSubstitution) {
  // d=1, sigma^2=4, V=1, W=0.5, lambda=0: grad_W = 3, grad_V = 1
  const CovarianceGame g{Matrix{{4.0}}, 0.0, std::nullopt};
  const auto [gv, gw] = covariance_game_gradients(g, Matrix{{1.0}}, Matrix{{0.5}});
  EXPECT_NEAR(gw(0, 0), 3.0, 1e-15);
  EXPECT_NEAR(gv(0, 0), 1.0, 1e-15);
}

TEST(CovarianceGradients, MatchesFiniteDifferencesUnregularized) {
  // loss sum_ij W_ij (Sigma - V V^T)_ij; grad_W = dL/dW, grad_V = -dL/dV
  const Matrix u = randm(3, 3, 31);
  const CovarianceGame g{u * u.transposed(), 0.0, std::nullopt};
  const auto loss = [&](const Vector& vf, const Vector& wf) {
    const Matrix vm(3, 3, vf), wm(3, 3, wf);
    return dot(wf, (g.sigma - vm * vm.transposed()).entries());
  };
  for (std::uint32_t seed = 0; seed < 20; ++seed) {
    const Vector vf = randv(9, 900 + seed), wf = randv(9, 950 + seed);
    const auto [gv, gw] = covariance_game_gradients(g, Matrix(3, 3, vf), Matrix(3, 3, wf));
    expect_close(gw.entries(), finite_diff([&](const Vector& x) { return loss(vf, x); }, wf),
                 1e-6, "grad_W");
    Vector neg_gv = finite_diff([&](const Vector& x) { return loss(x, wf); }, vf);
    for (double& x : neg_gv) x = -x;
    expect_close(gv.entries(), neg_gv, 1e-6, "grad_V");
  }
}

TEST(CovarianceStochastic, PairedSamplesCancelAtIdentity) {
  const Matrix v = Matrix::identity(2);
  const Matrix w{{0.3, -0.1}, {0.7, 0.2}};
  std::vector<Vector> xs, zs;
  for (std::uint32_t s = 0; s < 5; ++s) {
    const Vector z = randv(2, 40 + s);
    xs.push_back(z);
    zs.push_back(z);
  }
  const auto [ev, ew] = covariance_stochastic_gradients(xs, zs, v, w);
  EXPECT_LE(ew.frobenius_norm(), 1e-14);
  (void)ev;
}

TEST(CovarianceStochastic, SingleSampleOuterProducts) {
  const auto [ev, ew] = covariance_stochastic_gradients({{1.0, 0.0}}, {{0.0, 1.0}},
                                                        Matrix::identity(2), Matrix(2, 2));
  // x x^T - z z^T = diag(1, -1)
  EXPECT_NEAR(ew(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(ew(1, 1), -1.0, 1e-15);
  EXPECT_NEAR(ew(0, 1), 0.0, 1e-15);
  EXPECT_LE(ev.frobenius_norm(), 1e-15);  // W = 0
}

TEST(CovarianceStochastic, UnbiasedAgainstExactOracle) {
  // Sigma = I: large batch estimate approaches the exact gradient
  const CovarianceGame g{Matrix::identity(2), 0.0, std::nullopt};
  const Matrix vm{{0.9, 0.1}, {-0.2, 1.1}}, wm{{0.4, 0.0}, {0.3, -0.2}};
  const auto [exact_v, exact_w] = covariance_game_gradients(g, vm, wm);
  NormalStream rng(2024);
  std::vector<Vector> xs, zs;
  for (int s = 0; s < 10000; ++s) {
    xs.push_back(rng.next_vector(2));
    zs.push_back(rng.next_vector(2));
  }
  const auto [est_v, est_w] = covariance_stochastic_gradients(xs, zs, vm, wm);
  EXPECT_LE((est_w - exact_w).frobenius_norm(), 0.1);
  EXPECT_LE((est_v - exact_v).frobenius_norm(), 0.1);
}

TEST(PwmGradients, ZeroAtMatchingDistribution) {
  const PwmGame g{{{0.25, 0.75}}, std::nullopt};
  // softmax(theta) = (0.25, 0.75) via logits log p
  const Vector theta{std::log(0.25), std::log(0.75)};
  const auto [gt, gw] = pwm_game_gradients(g, theta, {0.3, -0.4});
  EXPECT_LE(norm_inf(gw), 1e-12);
  (void)gt;
}

TEST(PwmGradients, ZeroDiscriminatorZeroThetaGradient) {
  const PwmGame g{{{0.5, 0.5}, {0.1, 0.9}}, std::nullopt};
  const auto [gt, gw] = pwm_game_gradients(g, randv(4, 3), Vector(4, 0.0));
  EXPECT_LE(norm_inf(gt), 1e-15);
  (void)gw;
}

TEST(PwmGradients, BinaryAlphabetHandValues) {
  const PwmGame g{{{0.75, 0.25}}, std::nullopt};
  const auto [gt, gw] = pwm_game_gradients(g, {0.0, 0.0}, {1.0, 0.0});
  EXPECT_NEAR(gw[0], 0.25, 1e-12);
  EXPECT_NEAR(gw[1], -0.25, 1e-12);
  // finite differences of <w, p - softmax(theta)>
  const PwmGameSpec spec(g);
  const Vector th{0.0, 0.0}, w{1.0, 0.0};
  const Vector fd = finite_diff([&](const Vector& tt) { return spec.loss(tt, w); }, th);
  EXPECT_NEAR(gt[0], fd[0], 1e-8);
  EXPECT_NEAR(gt[1], fd[1], 1e-8);
}

TEST(PwmGradients, MatchesFiniteDifferences) {
  const PwmGame g{{{0.7, 0.1, 0.1, 0.1}, {0.05, 0.8, 0.1, 0.05}}, std::nullopt};
  const PwmGameSpec spec(g);
  for (std::uint32_t seed = 0; seed < 20; ++seed) {
    const Vector th = randv(8, 60 + seed), w = randv(8, 160 + seed);
    Vector gt, gw;
    spec.gradients(nullptr, th, w, gt, gw);
    expect_close(gt, finite_diff([&](const Vector& tt) { return spec.loss(tt, w); }, th), 1e-6,
                 "gt");
    expect_close(gw, finite_diff([&](const Vector& ww) { return spec.loss(th, ww); }, w), 1e-6,
                 "gw");
  }
}

TEST(ClipWeights, ClampsAndLeavesInteriorAlone) {
  EXPECT_EQ(clip_weights({12.0, -3.0}, 10.0), (Vector{10.0, -3.0}));
  EXPECT_EQ(clip_weights({1.0, -2.0}, 10.0), (Vector{1.0, -2.0}));
  EXPECT_EQ(clip_weights({-15.0, 15.0}, 10.0), (Vector{-10.0, 10.0}));
}

TEST(ClipWeights, IdempotentProjection) {
  for (std::uint32_t seed = 0; seed < 50; ++seed) {
    const Vector w = randv(4, seed, 5.0);
    const Vector once = clip_weights(w, 2.5);
    EXPECT_EQ(clip_weights(once, 2.5), once);
    // non-expansive in the sup norm
    const Vector w2 = randv(4, 1000 + seed, 5.0);
    Vector diff_clipped = clip_weights(w, 2.5) - clip_weights(w2, 2.5);
    Vector diff = w - w2;
    EXPECT_LE(norm_inf(diff_clipped), norm_inf(diff) + 1e-15);
  }
}

TEST(GaussianSampler, SameSeedSameBatches) {
  GaussianSampler a(99, {3.0, 4.0}), b(99, {3.0, 4.0});
  const auto ba = sample_minibatch(a, 16);
  const auto bb = sample_minibatch(b, 16);
  EXPECT_EQ(ba, bb);
}

TEST(GaussianSampler, SingleSampleDimension) {
  GaussianSampler s(7, {0.0, 0.0, 0.0});
  const auto batch = sample_minibatch(s, 1);
  ASSERT_EQ(batch.size(), 1u);
  EXPECT_EQ(batch[0].size(), 3u);
}

TEST(GaussianSampler, LawOfLargeNumbersMean) {
  GaussianSampler s(5, {3.0, 4.0});
  const std::size_t n = 100000;
  Vector mean(2, 0.0);
  for (std::size_t i = 0; i < n; ++i) axpy(1.0 / n, s.sample(), mean);
  // 3 sigma over n samples: 3/sqrt(1e5) < 0.01 per coordinate, use 0.02
  EXPECT_NEAR(mean[0], 3.0, 0.02);
  EXPECT_NEAR(mean[1], 4.0, 0.02);
}

TEST(GaussianSampler, ZeroBatchRejected) {
  GaussianSampler s(1, {0.0});
  EXPECT_THROW(sample_minibatch(s, 0), std::invalid_argument);
}

TEST(GameSpecs, ExactGradientsVanishAtEquilibria) {
  {
    const MeanGameSpec g({{3.0, 4.0}, std::nullopt, std::nullopt});
    Vector gt, gw;
    g.gradients(nullptr, {3.0, 4.0}, {0.0, 0.0}, gt, gw);
    EXPECT_LE(norm_inf(gt), 1e-12);
    EXPECT_LE(norm_inf(gw), 1e-12);
  }
  {
    const Matrix u{{1.0, 0.0}, {0.5, 0.8}};
    const CovarianceGameSpec g({u * u.transposed(), 0.0, std::nullopt}, u);
    Vector gv, gw;
    g.gradients(nullptr, u.entries(), Vector(4, 0.0), gv, gw);
    EXPECT_LE(norm_inf(gv), 1e-12);
    EXPECT_LE(norm_inf(gw), 1e-12);
  }
  {
    const PwmGameSpec g(PwmGame{{{0.7, 0.1, 0.1, 0.1}}, std::nullopt});
    Vector theta{std::log(0.7), std::log(0.1), std::log(0.1), std::log(0.1)};
    Vector gt, gw;
    g.gradients(nullptr, theta, Vector(4, 0.0), gt, gw);
    EXPECT_LE(norm_inf(gt), 1e-12);
    EXPECT_LE(norm_inf(gw), 1e-12);
  }
}

TEST(GameSpecs, MeanStochasticUnbiased) {
  const MeanGameSpec g({{3.0, 4.0}, std::nullopt, std::nullopt});
  const Vector theta{1.0, 2.0}, w{0.5, -0.5};
  Vector exact_t, exact_w;
  g.gradients(nullptr, theta, w, exact_t, exact_w);
  NormalStream rng(17);
  Vector acc(2, 0.0);
  const int draws = 100;
  for (int i = 0; i < draws; ++i) {
    auto ctx = g.draw_batch(theta, 100, rng);
    Vector gt, gw;
    g.gradients(ctx.get(), theta, w, gt, gw);
    axpy(1.0 / draws, gw, acc);
    EXPECT_EQ(gt, exact_t);  // theta estimate carries no sampling noise
  }
  // std of the mean over 100 draws of batch-100 means: sqrt(2/1e4) ~ 0.014; 3 sigma ~ 0.043
  EXPECT_NEAR(acc[0], exact_w[0], 0.05);
  EXPECT_NEAR(acc[1], exact_w[1], 0.05);
}

TEST(GameSpecs, PwmStochasticUnbiased) {
  const PwmGameSpec g(PwmGame{{{0.7, 0.1, 0.1, 0.1}, {0.05, 0.8, 0.1, 0.05}}, std::nullopt});
  const Vector theta = randv(8, 21);
  const Vector w = randv(8, 22);
  Vector exact_t, exact_w;
  g.gradients(nullptr, theta, w, exact_t, exact_w);
  NormalStream rng(18);
  Vector acc(8, 0.0);
  const int draws = 400;
  for (int i = 0; i < draws; ++i) {
    auto ctx = g.draw_batch(theta, 64, rng);
    Vector gt, gw;
    g.gradients(ctx.get(), theta, w, gt, gw);
    axpy(1.0 / draws, gw, acc);
  }
  // per-cell std ~ sqrt(0.25/64/400) ~ 0.003; allow 4 sigma
  for (std::size_t i = 0; i < 8; ++i) ASSERT_NEAR(acc[i], exact_w[i], 0.013) << i;
}
