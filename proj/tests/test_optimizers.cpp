#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dynlab/optimizers.hpp"

using namespace dynlab;

namespace {
Vector randv(std::size_t n, std::uint32_t seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> d;
  Vector v(n);
  for (double& x : v) x = d(gen);
  return v;
}
}  // namespace

TEST(GdStep, ScalarAscend) {
  OptimizerState s({1.0}, 0.1);
  gd_step(s, Vector{2.0}, StepDirection::ascend);
  EXPECT_DOUBLE_EQ(s.params[0], 1.2);
}

TEST(GdStep, ZeroGradientNoMove) {
  OptimizerState s({1.0, -2.0}, 0.1);
  gd_step(s, Vector{0.0, 0.0}, StepDirection::ascend);
  EXPECT_DOUBLE_EQ(s.params[0], 1.0);
  EXPECT_DOUBLE_EQ(s.params[1], -2.0);
}

TEST(GdStep, VectorDescend) {
  OptimizerState s({3.0, 4.0}, 0.5);
  gd_step(s, Vector{2.0, -2.0}, StepDirection::descend);
  EXPECT_DOUBLE_EQ(s.params[0], 2.0);
  EXPECT_DOUBLE_EQ(s.params[1], 5.0);
}

TEST(GdStep, RejectsMismatchedAndNonFinite) {
  OptimizerState s({1.0}, 0.1);
  EXPECT_THROW(gd_step(s, Vector{1.0, 2.0}, StepDirection::ascend), std::invalid_argument);
  EXPECT_THROW(gd_step(s, Vector{std::nan("")}, StepDirection::ascend), std::invalid_argument);
}

TEST(OmdStep, EqualConsecutiveGradientsReduceToGd) {
  OptimizerState s({0.0}, 0.1);
  omd_step(s, Vector{1.0}, StepDirection::ascend);  // first step: 2*eta*g
  s.params[0] = 0.0;
  omd_step(s, Vector{1.0}, StepDirection::ascend);  // same gradient again
  EXPECT_NEAR(s.params[0], 0.1, 1e-15);
}

TEST(OmdStep, FirstStepDoublesGradient) {
  OptimizerState s({0.0}, 0.1);
  omd_step(s, Vector{1.0}, StepDirection::ascend);
  EXPECT_NEAR(s.params[0], 0.2, 1e-15);
}

TEST(OmdStep, MatchesExplicitTwoGradientRecurrence) {
  // params +- (2 eta g_t - eta g_{t-1}) over 50 random steps
  std::mt19937 gen(11);
  std::normal_distribution<double> d;
  OptimizerState s(Vector(3, 0.0), 0.05);
  Vector explicit_params(3, 0.0), prev_g(3, 0.0);
  for (int t = 0; t < 50; ++t) {
    Vector g(3);
    for (double& x : g) x = d(gen);
    omd_step(s, g, StepDirection::descend);
    for (std::size_t i = 0; i < 3; ++i)
      explicit_params[i] -= 2.0 * 0.05 * g[i] - 0.05 * prev_g[i];
    prev_g = g;
    for (std::size_t i = 0; i < 3; ++i) ASSERT_NEAR(s.params[i], explicit_params[i], 1e-14);
  }
}

TEST(OmdStep, ZeroPredictorReproducesGd) {
  // discounted predictor with gradients always zero except the probe step:
  // with M_t = M_{t+1} = 0 the update equals plain gd
  OptimizerState a(Vector{1.0}, 0.1), b(Vector{1.0}, 0.1);
  a.predictor = Predictor::discounted(0.5);
  // predictor state stays zero when every gradient is zero
  omd_step(a, Vector{0.0}, StepDirection::ascend);
  gd_step(b, Vector{0.0}, StepDirection::ascend);
  EXPECT_DOUBLE_EQ(a.params[0], b.params[0]);
}

TEST(PredictorUpdate, RunningAverage) {
  Vector m(1, 0.0);
  long count = 0;
  predictor_update(Predictor::running_average(), m, count, Vector{1.0});
  const Vector m2 = predictor_update(Predictor::running_average(), m, count, Vector{3.0});
  EXPECT_NEAR(m2[0], 2.0, 1e-15);
}

TEST(PredictorUpdate, DiscountedHalving) {
  Vector m(1, 0.0);
  long count = 0;
  const Vector m1 = predictor_update(Predictor::discounted(0.5), m, count, Vector{2.0});
  EXPECT_NEAR(m1[0], 1.0, 1e-15);
}

TEST(PredictorUpdate, LastGradientIsIdentity) {
  Vector m(2, 0.0);
  long count = 0;
  const Vector g{0.25, -4.0};
  const Vector m1 = predictor_update(Predictor::last_gradient(), m, count, g);
  EXPECT_EQ(m1, g);
}

TEST(PredictorUpdate, DiscountedLambdaOutOfRangeThrows) {
  Vector m(1, 0.0);
  long count = 0;
  EXPECT_THROW(predictor_update(Predictor::discounted(1.0), m, count, Vector{1.0}),
               std::invalid_argument);
  EXPECT_THROW(predictor_update(Predictor::discounted(0.0), m, count, Vector{1.0}),
               std::invalid_argument);
}

TEST(MomentumStep, FirstStep) {
  OptimizerState s({0.0}, 0.1);
  s.gamma = 0.9;
  momentum_step(s, Vector{1.0}, StepDirection::ascend);
  EXPECT_NEAR(s.velocity[0], 0.1, 1e-15);
  EXPECT_NEAR(s.params[0], 0.1, 1e-15);
}

TEST(MomentumStep, TwoStepsConstantGradient) {
  OptimizerState s({0.0}, 0.1);
  s.gamma = 0.5;
  momentum_step(s, Vector{1.0}, StepDirection::ascend);
  momentum_step(s, Vector{1.0}, StepDirection::ascend);
  EXPECT_NEAR(s.params[0], 0.25, 1e-15);  // 0.1 + (0.05 + 0.1)
}

TEST(MomentumStep, GammaZeroEqualsGd) {
  std::mt19937 gen(3);
  std::normal_distribution<double> d;
  OptimizerState m(Vector(2, 0.5), 0.07), g(Vector(2, 0.5), 0.07);
  m.gamma = 0.0;
  for (int t = 0; t < 20; ++t) {
    Vector grad{d(gen), d(gen)};
    momentum_step(m, grad, StepDirection::descend);
    gd_step(g, grad, StepDirection::descend);
    ASSERT_EQ(m.params, g.params);
  }
}

TEST(NesterovStep, GammaZeroEqualsGd) {
  OptimizerState n(Vector{2.0}, 0.1), g(Vector{2.0}, 0.1);
  n.gamma = 0.0;
  const auto grad_at = [](const Vector& p) { return Vector{p[0]}; };
  nesterov_step(n, grad_at, StepDirection::descend);
  gd_step(g, grad_at(g.params), StepDirection::descend);
  EXPECT_EQ(n.params, g.params);
}

TEST(NesterovStep, QuadraticLookahead) {
  // f(x) = x^2, gradient 2x; gamma=0.5, eta=0.1, x=1, v=0:
  // lookahead = 1, v' = 0.2, x' = 0.8
  OptimizerState s(Vector{1.0}, 0.1);
  s.gamma = 0.5;
  const auto grad_at = [](const Vector& p) { return Vector{2.0 * p[0]}; };
  nesterov_step(s, grad_at, StepDirection::descend);
  EXPECT_NEAR(s.velocity[0], 0.2, 1e-15);
  EXPECT_NEAR(s.params[0], 0.8, 1e-15);
}

TEST(NesterovStep, MismatchedCallbackThrows) {
  OptimizerState s(Vector{1.0}, 0.1);
  const auto grad_at = [](const Vector&) { return Vector{1.0, 2.0}; };
  EXPECT_THROW(nesterov_step(s, grad_at, StepDirection::descend), std::invalid_argument);
}

TEST(AdagradStep, FirstStepNearUnit) {
  OptimizerState s({0.0}, 1.0);
  s.epsilon = 1e-8;
  adagrad_step(s, Vector{3.0}, StepDirection::ascend);
  EXPECT_NEAR(s.params[0], 3.0 / (3.0 + 1e-8), 1e-12);
}

TEST(AdagradStep, ZeroGradientNeverMoves) {
  OptimizerState s({5.0}, 1.0);
  for (int t = 0; t < 10; ++t) adagrad_step(s, Vector{0.0}, StepDirection::ascend);
  EXPECT_DOUBLE_EQ(s.params[0], 5.0);
}

TEST(AdagradStep, AccumulatorRecursion) {
  OptimizerState s({0.0}, 1.0);
  s.epsilon = 1e-12;
  adagrad_step(s, Vector{1.0}, StepDirection::ascend);
  const double first = s.params[0];
  adagrad_step(s, Vector{1.0}, StepDirection::ascend);
  EXPECT_NEAR(first, 1.0, 1e-9);
  EXPECT_NEAR(s.params[0] - first, 1.0 / std::sqrt(2.0), 1e-9);
}

TEST(AdagradStep, StepMagnitudesNonIncreasingUnderConstantGradients) {
  OptimizerState s(Vector(3, 0.0), 0.3);
  Vector prev = s.params;
  double last_mag[3] = {1e300, 1e300, 1e300};
  const Vector g{0.7, -1.3, 2.0};
  for (int t = 0; t < 25; ++t) {
    adagrad_step(s, g, StepDirection::ascend);
    for (int i = 0; i < 3; ++i) {
      const double mag = std::abs(s.params[i] - prev[i]);
      ASSERT_LE(mag, last_mag[i] + 1e-15);
      last_mag[i] = mag;
    }
    prev = s.params;
  }
}

TEST(AdamStep, FirstStepMagnitudeIsEta) {
  OptimizerState s({0.0}, 0.01);
  adam_step(s, Vector{-0.37}, StepDirection::descend);
  // bias-corrected m_hat/sqrt(v_hat) = sign(g) up to epsilon
  EXPECT_NEAR(s.params[0], 0.01, 1e-8);
}

TEST(AdamStep, ZeroGradientFromZeroStateNoMove) {
  OptimizerState s({1.5}, 0.01);
  for (int t = 0; t < 5; ++t) adam_step(s, Vector{0.0}, StepDirection::ascend);
  EXPECT_DOUBLE_EQ(s.params[0], 1.5);
}

TEST(AdamStep, BetaZeroGivesSignSteps) {
  OptimizerState s({0.0}, 0.1);
  s.beta1 = 0.0;
  s.beta2 = 0.0;
  s.epsilon = 1e-15;
  adam_step(s, Vector{0.3}, StepDirection::ascend);
  adam_step(s, Vector{-7.0}, StepDirection::ascend);
  EXPECT_NEAR(s.params[0], 0.1 - 0.1, 1e-12);
}

TEST(OptimisticAdam, StationaryPreconditionedGradientEqualsAdam) {
  // constant gradient: after the transient both rules take identical steps
  OptimizerState oa({0.0}, 0.05), ad({0.0}, 0.05);
  const Vector g{1.0};
  optimistic_adam_step(oa, g, StepDirection::ascend);
  adam_step(ad, g, StepDirection::ascend);
  for (int t = 0; t < 50; ++t) {
    const double before_oa = oa.params[0], before_ad = ad.params[0];
    optimistic_adam_step(oa, g, StepDirection::ascend);
    adam_step(ad, g, StepDirection::ascend);
    if (t > 30)
      ASSERT_NEAR(oa.params[0] - before_oa, ad.params[0] - before_ad, 1e-12);
  }
}

TEST(OptimisticAdam, FirstStepDoublesAdam) {
  OptimizerState oa({0.0}, 0.05), ad({0.0}, 0.05);
  optimistic_adam_step(oa, Vector{2.5}, StepDirection::ascend);
  adam_step(ad, Vector{2.5}, StepDirection::ascend);
  EXPECT_NEAR(oa.params[0], 2.0 * ad.params[0], 1e-15);
}

TEST(OptimisticAdam, ConvergesOnScalarBilinearWhereAdamOrbits) {
  // min_x max_y x*y, eta=0.01, beta1=0, beta2=0.9, start (1,1):
  // the optimistic variant drives |x|+|y| below 1e-2 within 5000 steps,
  // plain adam never does.
  const auto run = [](bool optimistic) {
    OptimizerConfig cfg;
    cfg.kind = optimistic ? OptimizerKind::optimistic_adam : OptimizerKind::adam;
    cfg.eta = 0.01;
    cfg.beta1 = 0.0;
    cfg.beta2 = 0.9;
    Optimizer x(cfg, {1.0}), y(cfg, {1.0});
    double best = 2.0;
    for (int t = 0; t < 5000; ++t) {
      const double gx = y.params()[0], gy = x.params()[0];
      x.step([&](const Vector&) { return Vector{gx}; }, StepDirection::descend);
      y.step([&](const Vector&) { return Vector{gy}; }, StepDirection::ascend);
      best = std::min(best, std::abs(x.params()[0]) + std::abs(y.params()[0]));
    }
    return best;
  };
  EXPECT_LT(run(true), 1e-2);
  EXPECT_GE(run(false), 1e-2);
}

TEST(Optimizer, DeterministicBitIdenticalSequences) {
  const auto run = [] {
    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::adam;
    cfg.eta = 0.02;
    Optimizer opt(cfg, randv(4, 77));
    std::mt19937 gen(123);
    std::normal_distribution<double> d;
    Vector trace;
    for (int t = 0; t < 100; ++t) {
      Vector g(4);
      for (double& x : g) x = d(gen);
      opt.step([&](const Vector&) { return g; }, StepDirection::descend);
      trace.insert(trace.end(), opt.params().begin(), opt.params().end());
    }
    return trace;
  };
  EXPECT_EQ(run(), run());
}

TEST(Optimizer, ZeroGradientZeroStateFixedPointForAllKinds) {
  for (OptimizerKind k :
       {OptimizerKind::gd, OptimizerKind::omd, OptimizerKind::momentum, OptimizerKind::nesterov,
        OptimizerKind::adagrad, OptimizerKind::adam, OptimizerKind::optimistic_adam}) {
    OptimizerConfig cfg;
    cfg.kind = k;
    Optimizer opt(cfg, {0.7, -0.3});
    for (int t = 0; t < 3; ++t)
      opt.step([](const Vector& p) { return Vector(p.size(), 0.0); }, StepDirection::ascend);
    EXPECT_DOUBLE_EQ(opt.params()[0], 0.7) << to_string(k);
    EXPECT_DOUBLE_EQ(opt.params()[1], -0.3) << to_string(k);
  }
}
