#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "dynlab/matrix.hpp"
#include "dynlab/optimizers.hpp"
#include "dynlab/rng.hpp"

namespace dynlab {

// ---------------------------------------------------------------------------
// Game mechanics
// ---------------------------------------------------------------------------

// Per-coordinate clamp to [-c, c].
inline Vector clip_weights(const Vector& w, double c) {
  require(c > 0.0, "clip_weights: clip value must be positive");
  Vector r(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) r[i] = std::clamp(w[i], -c, c);
  return r;
}

// i.i.d. Gaussian vectors with identity covariance shifted by a fixed mean.
// Same seed => same sample stream.
class GaussianSampler {
 public:
  GaussianSampler(std::uint64_t seed, Vector mean)
      : mean_(std::move(mean)), stream_(seed) {}

  Vector sample() {
    Vector v = stream_.next_vector(mean_.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += mean_[i];
    return v;
  }

  std::size_t dimension() const { return mean_.size(); }
  NormalStream& stream() { return stream_; }

 private:
  Vector mean_;
  NormalStream stream_;
};

inline std::vector<Vector> sample_minibatch(GaussianSampler& sampler, std::size_t size) {
  require(size >= 1, "sample_minibatch: size must be at least 1");
  std::vector<Vector> batch;
  batch.reserve(size);
  for (std::size_t i = 0; i < size; ++i) batch.push_back(sampler.sample());
  return batch;
}

// ---------------------------------------------------------------------------
// Bilinear game  x^T A y + b^T x + c^T y + d
// ---------------------------------------------------------------------------

struct BilinearGame {
  Matrix a;
  Vector b;  // length rows(a); empty means zero
  Vector c;  // length cols(a); empty means zero
  double d = 0.0;

  void validate() const {
    require(b.empty() || b.size() == a.rows(), "BilinearGame: b length must equal rows(a)");
    require(c.empty() || c.size() == a.cols(), "BilinearGame: c length must equal cols(a)");
  }
  double value(const Vector& x, const Vector& y) const {
    double v = dot(x, a.apply(y)) + d;
    if (!b.empty()) v += dot(b, x);
    if (!c.empty()) v += dot(c, y);
    return v;
  }
};

// grad_x = A y + b (x descends), grad_y = A^T x + c (y ascends).
inline std::pair<Vector, Vector> bilinear_gradients(const BilinearGame& g, const Vector& x,
                                                    const Vector& y) {
  g.validate();
  require(x.size() == g.a.rows() && y.size() == g.a.cols(),
          "bilinear_gradients: dimension mismatch");
  Vector gx = g.a.apply(y);
  if (!g.b.empty()) axpy(1.0, g.b, gx);
  Vector gy = g.a.apply_transposed(x);
  if (!g.c.empty()) axpy(1.0, g.c, gy);
  return {gx, gy};
}

// ---------------------------------------------------------------------------
// Mean-learning game  inf_theta sup_w <w, v - theta>
// ---------------------------------------------------------------------------

struct MeanGame {
  Vector v;                              // true mean
  std::optional<double> clip;            // discriminator weight clip
  std::optional<double> penalty_lambda;  // gradient penalty coefficient

  void validate() const {
    if (clip) require(*clip > 0.0, "MeanGame: clip must be positive");
    if (penalty_lambda) require(*penalty_lambda >= 0.0, "MeanGame: penalty must be nonnegative");
  }
};

// grad_w = v - theta - 2 lambda w (||w||-1)/||w|| (penalty term 0 at w = 0),
// grad_theta = -w. Theta descends, w ascends.
inline std::pair<Vector, Vector> mean_game_gradients(const MeanGame& g, const Vector& theta,
                                                     const Vector& w) {
  g.validate();
  require(theta.size() == g.v.size() && w.size() == g.v.size(),
          "mean_game_gradients: dimension mismatch");
  Vector grad_theta(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) grad_theta[i] = -w[i];
  Vector grad_w = g.v - theta;
  if (g.penalty_lambda) {
    const double nw = norm2(w);
    if (nw > 0.0) {
      const double coef = 2.0 * *g.penalty_lambda * (nw - 1.0) / nw;
      axpy(-coef, w, grad_w);
    }
  }
  return {grad_theta, grad_w};
}

// ---------------------------------------------------------------------------
// Covariance game  L(V, W) = <W, Sigma - V V^T>  (discriminator x^T W x,
// generator V z). Both players ascend on the returned gradients.
// ---------------------------------------------------------------------------

struct CovarianceGame {
  Matrix sigma;                // symmetric PSD, d x d
  double lambda = 0.0;         // l2 regularization
  std::optional<double> clip;  // discriminator weight clip

  void validate() const {
    require(sigma.rows() == sigma.cols(), "CovarianceGame: sigma must be square");
    for (std::size_t i = 0; i < sigma.rows(); ++i)
      for (std::size_t j = 0; j < i; ++j)
        require(std::abs(sigma(i, j) - sigma(j, i)) <= 1e-12,
                "CovarianceGame: sigma must be symmetric");
    require(lambda >= 0.0, "CovarianceGame: lambda must be nonnegative");
  }
  std::size_t dim() const { return sigma.rows(); }
};

// grad_W = Sigma - V V^T - 2 lambda W ; grad_V = (W + W^T) V - 2 lambda V.
inline std::pair<Matrix, Matrix> covariance_game_gradients(const CovarianceGame& g,
                                                           const Matrix& v_mat,
                                                           const Matrix& w_mat) {
  const std::size_t d = g.dim();
  require(v_mat.rows() == d && v_mat.cols() == d && w_mat.rows() == d && w_mat.cols() == d,
          "covariance_game_gradients: dimension mismatch");
  Matrix grad_w = g.sigma - v_mat * v_mat.transposed();
  Matrix grad_v = (w_mat + w_mat.transposed()) * v_mat;
  if (g.lambda != 0.0) {
    grad_w = grad_w - (2.0 * g.lambda) * w_mat;
    grad_v = grad_v - (2.0 * g.lambda) * v_mat;
  }
  return {grad_v, grad_w};
}

// Unregularized unbiased batch estimates of the covariance-game gradients,
// signs matching the exact oracle (both players ascend):
//   est_W = mean_i (x_i x_i^T - V z_i z_i^T V^T)
//   est_V = (W + W^T) V mean_i (z_i z_i^T)
inline std::pair<Matrix, Matrix> covariance_stochastic_gradients(
    const std::vector<Vector>& x_batch, const std::vector<Vector>& z_batch, const Matrix& v_mat,
    const Matrix& w_mat) {
  require(!x_batch.empty() && x_batch.size() == z_batch.size(),
          "covariance_stochastic_gradients: empty or mismatched batches");
  const std::size_t d = v_mat.rows();
  Matrix zz(d, d), est_w(d, d);
  for (std::size_t s = 0; s < x_batch.size(); ++s) {
    const Vector& x = x_batch[s];
    const Vector& z = z_batch[s];
    require(x.size() == d && z.size() == d, "covariance_stochastic_gradients: bad sample dim");
    const Vector vz = v_mat.apply(z);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        est_w(i, j) += x[i] * x[j] - vz[i] * vz[j];
        zz(i, j) += z[i] * z[j];
      }
  }
  const double inv = 1.0 / static_cast<double>(x_batch.size());
  est_w = inv * est_w;
  zz = inv * zz;
  Matrix est_v = (w_mat + w_mat.transposed()) * v_mat * zz;
  return {est_v, est_w};
}

// ---------------------------------------------------------------------------
// PWM game: per-position categorical WGAN with a linear discriminator,
// loss per position <w_l, p_true_l - softmax(theta_l)>.
// ---------------------------------------------------------------------------

inline Vector softmax(std::span<const double> logits) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  Vector e(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    e[i] = std::exp(logits[i] - mx);
    sum += e[i];
  }
  for (double& v : e) v /= sum;
  return e;
}

struct PwmGame {
  std::vector<Vector> true_pwm;  // positions x alphabet, each row sums to 1
  std::optional<double> clip;

  void validate() const {
    require(!true_pwm.empty(), "PwmGame: empty pwm");
    const std::size_t k = true_pwm.front().size();
    for (const Vector& p : true_pwm) {
      require(p.size() == k, "PwmGame: ragged pwm");
      double s = 0.0;
      for (double x : p) {
        require(x >= 0.0, "PwmGame: negative probability");
        s += x;
      }
      require(std::abs(s - 1.0) <= 1e-12, "PwmGame: position probabilities must sum to 1");
    }
  }
  std::size_t length() const { return true_pwm.size(); }
  std::size_t alphabet() const { return true_pwm.front().size(); }
};

// Per position: grad_w = p_true - softmax(theta); grad_theta = -J_softmax^T w
// = -(s .* w - s <s, w>). Theta and w are flattened position-major.
inline std::pair<Vector, Vector> pwm_game_gradients(const PwmGame& g, const Vector& theta,
                                                    const Vector& w) {
  g.validate();
  const std::size_t l = g.length(), k = g.alphabet();
  require(theta.size() == l * k && w.size() == l * k, "pwm_game_gradients: dimension mismatch");
  Vector grad_theta(l * k), grad_w(l * k);
  for (std::size_t pos = 0; pos < l; ++pos) {
    const std::span<const double> th(&theta[pos * k], k);
    const std::span<const double> wp(&w[pos * k], k);
    const Vector s = softmax(th);
    double sw = 0.0;
    for (std::size_t i = 0; i < k; ++i) sw += s[i] * wp[i];
    for (std::size_t i = 0; i < k; ++i) {
      grad_w[pos * k + i] = g.true_pwm[pos][i] - s[i];
      grad_theta[pos * k + i] = -(s[i] * wp[i] - s[i] * sw);
    }
  }
  return {grad_theta, grad_w};
}

// ---------------------------------------------------------------------------
// GameSpec: uniform surface the training loop drives. A game exposes exact
// gradients, optionally a stochastic batch oracle, per-player step
// directions, the discriminator clip, and named diagnostics.
// ---------------------------------------------------------------------------

// Opaque per-step batch statistics; concrete games downcast.
struct BatchContext {
  virtual ~BatchContext() = default;
};

class GameSpec {
 public:
  virtual ~GameSpec() = default;

  virtual std::string kind_name() const = 0;
  virtual std::size_t gen_dim() const = 0;
  virtual std::size_t disc_dim() const = 0;
  virtual StepDirection gen_direction() const { return StepDirection::descend; }
  virtual StepDirection disc_direction() const { return StepDirection::ascend; }
  virtual std::optional<double> clip_value() const { return std::nullopt; }

  // ctx == nullptr means exact gradients.
  virtual void gradients(const BatchContext* ctx, const Vector& gen, const Vector& disc,
                         Vector& grad_gen, Vector& grad_disc) const = 0;

  virtual bool has_stochastic() const { return false; }
  virtual std::unique_ptr<BatchContext> draw_batch(const Vector& /*gen*/, std::size_t /*batch*/,
                                                   NormalStream& /*rng*/) const {
    throw std::logic_error(kind_name() + ": no stochastic oracle");
  }

  virtual double loss(const Vector& gen, const Vector& disc) const = 0;

  virtual std::vector<std::string> diagnostic_names() const { return {}; }
  virtual std::vector<double> diagnostics(const Vector& /*gen*/, const Vector& /*disc*/) const {
    return {};
  }
};

class BilinearGameSpec final : public GameSpec {
 public:
  explicit BilinearGameSpec(BilinearGame game) : game_(std::move(game)) { game_.validate(); }

  std::string kind_name() const override { return "bilinear"; }
  std::size_t gen_dim() const override { return game_.a.rows(); }
  std::size_t disc_dim() const override { return game_.a.cols(); }

  void gradients(const BatchContext*, const Vector& x, const Vector& y, Vector& gx,
                 Vector& gy) const override {
    auto [grad_x, grad_y] = bilinear_gradients(game_, x, y);
    gx = std::move(grad_x);
    gy = std::move(grad_y);
  }

  double loss(const Vector& x, const Vector& y) const override { return game_.value(x, y); }

  // Equilibria are the pairs with A^T x = 0 and A y = 0; delta0 and the game
  // norm measure the distance to that set.
  std::vector<std::string> diagnostic_names() const override {
    return {"delta0", "game_norm_dist"};
  }
  std::vector<double> diagnostics(const Vector& x, const Vector& y) const override {
    const Vector atx = game_.a.apply_transposed(x);
    const Vector ay = game_.a.apply(y);
    const double d0 = dot(atx, atx) + dot(ay, ay);
    return {d0, std::sqrt(d0)};
  }

  const BilinearGame& game() const { return game_; }

 private:
  BilinearGame game_;
};

class MeanGameSpec final : public GameSpec {
 public:
  explicit MeanGameSpec(MeanGame game) : game_(std::move(game)) { game_.validate(); }

  std::string kind_name() const override { return "mean"; }
  std::size_t gen_dim() const override { return game_.v.size(); }
  std::size_t disc_dim() const override { return game_.v.size(); }
  std::optional<double> clip_value() const override { return game_.clip; }

  struct Batch final : BatchContext {
    Vector x_mean, z_mean;
  };

  void gradients(const BatchContext* ctx, const Vector& theta, const Vector& w, Vector& gt,
                 Vector& gw) const override {
    if (!ctx) {
      auto [grad_theta, grad_w] = mean_game_gradients(game_, theta, w);
      gt = std::move(grad_theta);
      gw = std::move(grad_w);
      return;
    }
    const auto& b = static_cast<const Batch&>(*ctx);
    // grad_w estimate: mean(x) - mean(z) - theta (+ penalty, exact in w);
    // grad_theta = -w carries no sampling noise.
    gw.assign(theta.size(), 0.0);
    for (std::size_t i = 0; i < theta.size(); ++i) gw[i] = b.x_mean[i] - b.z_mean[i] - theta[i];
    if (game_.penalty_lambda) {
      const double nw = norm2(w);
      if (nw > 0.0) axpy(-2.0 * *game_.penalty_lambda * (nw - 1.0) / nw, w, gw);
    }
    gt.assign(w.size(), 0.0);
    for (std::size_t i = 0; i < w.size(); ++i) gt[i] = -w[i];
  }

  bool has_stochastic() const override { return true; }
  std::unique_ptr<BatchContext> draw_batch(const Vector&, std::size_t batch,
                                           NormalStream& rng) const override {
    require(batch >= 1, "mean game: batch size must be at least 1");
    auto ctx = std::make_unique<Batch>();
    const std::size_t d = game_.v.size();
    ctx->x_mean.assign(d, 0.0);
    ctx->z_mean.assign(d, 0.0);
    for (std::size_t s = 0; s < batch; ++s)
      for (std::size_t i = 0; i < d; ++i) ctx->x_mean[i] += game_.v[i] + rng.next();
    for (std::size_t s = 0; s < batch; ++s)
      for (std::size_t i = 0; i < d; ++i) ctx->z_mean[i] += rng.next();
    const double inv = 1.0 / static_cast<double>(batch);
    for (std::size_t i = 0; i < d; ++i) {
      ctx->x_mean[i] *= inv;
      ctx->z_mean[i] *= inv;
    }
    return ctx;
  }

  double loss(const Vector& theta, const Vector& w) const override {
    double v = dot(w, game_.v - theta);
    if (game_.penalty_lambda) {
      const double nw = norm2(w);
      v -= *game_.penalty_lambda * (nw - 1.0) * (nw - 1.0);
    }
    return v;
  }

  std::vector<std::string> diagnostic_names() const override { return {"kl"}; }
  std::vector<double> diagnostics(const Vector& theta, const Vector&) const override {
    const Vector diff = game_.v - theta;
    return {0.5 * dot(diff, diff)};
  }

  const MeanGame& game() const { return game_; }

 private:
  MeanGame game_;
};

class CovarianceGameSpec final : public GameSpec {
 public:
  // Stores the factor u with sigma = u u^T so the stochastic oracle can draw
  // x = u g with g standard normal.
  CovarianceGameSpec(CovarianceGame game, Matrix factor_u)
      : game_(std::move(game)), factor_u_(std::move(factor_u)) {
    game_.validate();
    require(factor_u_.rows() == game_.dim() && factor_u_.cols() == game_.dim(),
            "CovarianceGameSpec: factor shape mismatch");
  }

  std::string kind_name() const override { return "covariance"; }
  std::size_t gen_dim() const override { return game_.dim() * game_.dim(); }
  std::size_t disc_dim() const override { return game_.dim() * game_.dim(); }
  StepDirection gen_direction() const override { return StepDirection::ascend; }
  std::optional<double> clip_value() const override { return game_.clip; }

  struct Batch final : BatchContext {
    std::vector<Vector> xs, zs;
  };

  void gradients(const BatchContext* ctx, const Vector& v_flat, const Vector& w_flat, Vector& gv,
                 Vector& gw) const override {
    const std::size_t d = game_.dim();
    const Matrix v_mat(d, d, v_flat), w_mat(d, d, w_flat);
    if (!ctx) {
      auto [grad_v, grad_w] = covariance_game_gradients(game_, v_mat, w_mat);
      gv = grad_v.entries();
      gw = grad_w.entries();
      return;
    }
    const auto& b = static_cast<const Batch&>(*ctx);
    auto [est_v, est_w] = covariance_stochastic_gradients(b.xs, b.zs, v_mat, w_mat);
    if (game_.lambda != 0.0) {
      est_v = est_v - (2.0 * game_.lambda) * v_mat;
      est_w = est_w - (2.0 * game_.lambda) * w_mat;
    }
    gv = est_v.entries();
    gw = est_w.entries();
  }

  bool has_stochastic() const override { return true; }
  std::unique_ptr<BatchContext> draw_batch(const Vector&, std::size_t batch,
                                           NormalStream& rng) const override {
    require(batch >= 1, "covariance game: batch size must be at least 1");
    auto ctx = std::make_unique<Batch>();
    const std::size_t d = game_.dim();
    for (std::size_t s = 0; s < batch; ++s) ctx->xs.push_back(factor_u_.apply(rng.next_vector(d)));
    for (std::size_t s = 0; s < batch; ++s) ctx->zs.push_back(rng.next_vector(d));
    return ctx;
  }

  double loss(const Vector& v_flat, const Vector& w_flat) const override {
    const std::size_t d = game_.dim();
    const Matrix v_mat(d, d, v_flat), w_mat(d, d, w_flat);
    const Matrix gap = game_.sigma - v_mat * v_mat.transposed();
    double val = dot(w_flat, gap.entries());
    if (game_.lambda != 0.0)
      val += game_.lambda * (dot(v_flat, v_flat) - dot(w_flat, w_flat));
    return val;
  }

  std::vector<std::string> diagnostic_names() const override { return {"cov_fro_dist"}; }
  std::vector<double> diagnostics(const Vector& v_flat, const Vector&) const override {
    const std::size_t d = game_.dim();
    const Matrix v_mat(d, d, v_flat);
    return {(v_mat * v_mat.transposed() - game_.sigma).frobenius_norm()};
  }

  const CovarianceGame& game() const { return game_; }
  const Matrix& factor() const { return factor_u_; }

 private:
  CovarianceGame game_;
  Matrix factor_u_;
};

class PwmGameSpec final : public GameSpec {
 public:
  // dataset_size > 0 draws that many sequences from the true pwm up front
  // (seeded), holding out holdout_fraction for validation; the stochastic
  // oracle then samples real minibatches from the training split. With
  // dataset_size == 0 real samples are drawn from the true pwm directly.
  explicit PwmGameSpec(PwmGame game, std::size_t dataset_size = 0, double holdout_fraction = 0.1,
                       std::uint64_t dataset_seed = 0)
      : game_(std::move(game)) {
    game_.validate();
    require(holdout_fraction >= 0.0 && holdout_fraction <= 0.5,
            "PwmGameSpec: holdout fraction must lie in [0, 0.5]");
    if (dataset_size > 0) {
      NormalStream rng(dataset_seed);
      const std::size_t l = game_.length();
      data_.resize(dataset_size, std::vector<std::uint8_t>(l));
      for (auto& seq : data_)
        for (std::size_t pos = 0; pos < l; ++pos)
          seq[pos] = draw_category(game_.true_pwm[pos], rng);
      // deterministic shuffle, then split
      for (std::size_t i = dataset_size; i > 1; --i) std::swap(data_[i - 1], data_[rng.index(i)]);
      n_val_ = static_cast<std::size_t>(std::floor(holdout_fraction * static_cast<double>(dataset_size)));
      val_freq_ = empirical_frequencies(0, n_val_);
    }
  }

  std::string kind_name() const override { return "pwm"; }
  std::size_t gen_dim() const override { return game_.length() * game_.alphabet(); }
  std::size_t disc_dim() const override { return gen_dim(); }
  std::optional<double> clip_value() const override { return game_.clip; }

  struct Batch final : BatchContext {
    Vector freq_real, freq_gen;  // flattened position-major frequencies
  };

  void gradients(const BatchContext* ctx, const Vector& theta, const Vector& w, Vector& gt,
                 Vector& gw) const override {
    if (!ctx) {
      auto [grad_theta, grad_w] = pwm_game_gradients(game_, theta, w);
      gt = std::move(grad_theta);
      gw = std::move(grad_w);
      return;
    }
    const auto& b = static_cast<const Batch&>(*ctx);
    const std::size_t l = game_.length(), k = game_.alphabet();
    gw.assign(l * k, 0.0);
    for (std::size_t i = 0; i < l * k; ++i) gw[i] = b.freq_real[i] - b.freq_gen[i];
    // generator gradient is closed-form given w (no sampling noise)
    gt.assign(l * k, 0.0);
    for (std::size_t pos = 0; pos < l; ++pos) {
      const Vector s = softmax(std::span<const double>(&theta[pos * k], k));
      double sw = 0.0;
      for (std::size_t i = 0; i < k; ++i) sw += s[i] * w[pos * k + i];
      for (std::size_t i = 0; i < k; ++i) gt[pos * k + i] = -(s[i] * w[pos * k + i] - s[i] * sw);
    }
  }

  bool has_stochastic() const override { return true; }
  std::unique_ptr<BatchContext> draw_batch(const Vector& theta, std::size_t batch,
                                           NormalStream& rng) const override {
    require(batch >= 1, "pwm game: batch size must be at least 1");
    const std::size_t l = game_.length(), k = game_.alphabet();
    auto ctx = std::make_unique<Batch>();
    ctx->freq_real.assign(l * k, 0.0);
    ctx->freq_gen.assign(l * k, 0.0);
    const double inv = 1.0 / static_cast<double>(batch);
    for (std::size_t s = 0; s < batch; ++s) {
      if (data_.empty()) {
        for (std::size_t pos = 0; pos < l; ++pos)
          ctx->freq_real[pos * k + draw_category(game_.true_pwm[pos], rng)] += inv;
      } else {
        const auto& seq = data_[n_val_ + rng.index(data_.size() - n_val_)];
        for (std::size_t pos = 0; pos < l; ++pos) ctx->freq_real[pos * k + seq[pos]] += inv;
      }
    }
    for (std::size_t s = 0; s < batch; ++s)
      for (std::size_t pos = 0; pos < l; ++pos) {
        const Vector sm = softmax(std::span<const double>(&theta[pos * k], k));
        ctx->freq_gen[pos * k + draw_category(sm, rng)] += inv;
      }
    return ctx;
  }

  double loss(const Vector& theta, const Vector& w) const override {
    const std::size_t l = game_.length(), k = game_.alphabet();
    double v = 0.0;
    for (std::size_t pos = 0; pos < l; ++pos) {
      const Vector s = softmax(std::span<const double>(&theta[pos * k], k));
      for (std::size_t i = 0; i < k; ++i)
        v += w[pos * k + i] * (game_.true_pwm[pos][i] - s[i]);
    }
    return v;
  }

  // Held-out critic gap: sum_l <w_l, p_val_l - softmax(theta_l)>.
  double validation_loss(const Vector& theta, const Vector& w) const {
    require(!val_freq_.empty(), "PwmGameSpec: no held-out split configured");
    const std::size_t l = game_.length(), k = game_.alphabet();
    double v = 0.0;
    for (std::size_t pos = 0; pos < l; ++pos) {
      const Vector s = softmax(std::span<const double>(&theta[pos * k], k));
      for (std::size_t i = 0; i < k; ++i)
        v += w[pos * k + i] * (val_freq_[pos * k + i] - s[i]);
    }
    return v;
  }

  // Sum over positions of KL(softmax(theta_l) || p_true_l).
  double kl_to_true(const Vector& theta) const {
    const std::size_t l = game_.length(), k = game_.alphabet();
    double total = 0.0;
    for (std::size_t pos = 0; pos < l; ++pos) {
      const Vector s = softmax(std::span<const double>(&theta[pos * k], k));
      for (std::size_t i = 0; i < k; ++i)
        if (s[i] > 0.0) total += s[i] * std::log(s[i] / game_.true_pwm[pos][i]);
    }
    return total;
  }

  std::vector<std::string> diagnostic_names() const override { return {"kl"}; }
  std::vector<double> diagnostics(const Vector& theta, const Vector&) const override {
    return {kl_to_true(theta)};
  }

  const PwmGame& game() const { return game_; }
  std::size_t dataset_size() const { return data_.size(); }
  std::size_t validation_size() const { return n_val_; }

 private:
  static std::size_t draw_category(const Vector& probs, NormalStream& rng) {
    const double u = rng.uniform01();
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return i;
    }
    return probs.size() - 1;
  }

  Vector empirical_frequencies(std::size_t begin, std::size_t end) const {
    const std::size_t l = game_.length(), k = game_.alphabet();
    Vector f(l * k, 0.0);
    if (end == begin) return f;
    const double inv = 1.0 / static_cast<double>(end - begin);
    for (std::size_t s = begin; s < end; ++s)
      for (std::size_t pos = 0; pos < l; ++pos) f[pos * k + data_[s][pos]] += inv;
    return f;
  }

  PwmGame game_;
  std::vector<std::vector<std::uint8_t>> data_;  // validation split first
  std::size_t n_val_ = 0;
  Vector val_freq_;
};

}  // namespace dynlab
