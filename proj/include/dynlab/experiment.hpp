#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "dynlab/csv.hpp"
#include "dynlab/dynamics.hpp"
#include "dynlab/games.hpp"
#include "dynlab/linalg.hpp"

namespace dynlab {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct GameConfig {
  std::string kind;  // mean | bilinear | covariance | pwm
  Vector mean_v;
  Matrix a;
  Vector b, c;
  double d = 0.0;
  Matrix sigma;
  double lambda = 0.0;
  std::vector<Vector> pwm;
  std::size_t dataset_size = 0;
  std::optional<double> clip;
  std::optional<double> penalty_lambda;
};

struct PlayerConfig {
  OptimizerConfig opt;
  std::optional<Vector> init;  // zeros by default (identity for the covariance generator)
};

struct ExperimentConfig {
  GameConfig game;
  PlayerConfig generator, discriminator;
  long d_steps_per_g_step = 1;
  long iterations = 1000;
  std::size_t batch_size = 0;  // 0 = exact gradients
  std::uint64_t seed = 1;
  long runs = 1;
  std::vector<double> learning_rates;  // sweep grid; empty = single-config mode
  double holdout_fraction = 0.1;
  long eval_every = 25;
  long record_every = 1;

  std::vector<std::string> violations() const {
    std::vector<std::string> v;
    if (game.kind != "mean" && game.kind != "bilinear" && game.kind != "covariance" &&
        game.kind != "pwm")
      v.push_back("game.kind must be one of mean|bilinear|covariance|pwm");
    if (iterations <= 0) v.push_back("iterations must be positive");
    if (runs <= 0) v.push_back("runs must be positive");
    if (d_steps_per_g_step < 1) v.push_back("schedule must be >= 1");
    if (eval_every <= 0) v.push_back("eval_every must be positive");
    if (record_every <= 0) v.push_back("record_every must be positive");
    if (holdout_fraction < 0.0 || holdout_fraction > 0.5)
      v.push_back("holdout_fraction must lie in [0, 0.5]");
    for (double lr : learning_rates)
      if (lr <= 0.0) v.push_back("learning rates must be positive");
    if (generator.opt.eta <= 0.0) v.push_back("generator.eta must be positive");
    if (discriminator.opt.eta <= 0.0) v.push_back("discriminator.eta must be positive");
    if (game.clip && *game.clip <= 0.0) v.push_back("game.clip must be positive");
    if (game.kind == "mean" && game.mean_v.empty()) v.push_back("mean game needs v");
    if (game.kind == "bilinear" && (game.a.rows() == 0 || game.a.cols() == 0))
      v.push_back("bilinear game needs matrix a");
    if (game.kind == "covariance" && game.sigma.rows() == 0)
      v.push_back("covariance game needs sigma");
    if (game.kind == "pwm" && game.pwm.empty()) v.push_back("pwm game needs pwm rows");
    return v;
  }
};

namespace cfg_detail {

inline Matrix matrix_from_json(const json& j) {
  const std::size_t rows = j.size();
  require(rows > 0, "config: empty matrix");
  const std::size_t cols = j.front().size();
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    require(j[i].size() == cols, "config: ragged matrix");
    for (std::size_t k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
  }
  return m;
}

inline json matrix_to_json(const Matrix& m) {
  json j = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (std::size_t k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    j.push_back(std::move(row));
  }
  return j;
}

inline OptimizerKind optimizer_kind_from_string(const std::string& s) {
  for (OptimizerKind k : {OptimizerKind::gd, OptimizerKind::omd, OptimizerKind::momentum,
                          OptimizerKind::nesterov, OptimizerKind::adagrad, OptimizerKind::adam,
                          OptimizerKind::optimistic_adam})
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown optimizer kind: " + s);
}

inline Predictor predictor_from_json(const json& p, double lambda) {
  const std::string s = p.get<std::string>();
  if (s == "last_gradient") return Predictor::last_gradient();
  if (s == "running_average") return Predictor::running_average();
  if (s == "discounted") return Predictor::discounted(lambda);
  throw std::invalid_argument("unknown predictor kind: " + s);
}

inline PlayerConfig player_from_json(const json& j) {
  PlayerConfig p;
  if (j.contains("optimizer")) p.opt.kind = optimizer_kind_from_string(j["optimizer"]);
  if (j.contains("eta")) p.opt.eta = j["eta"].get<double>();
  if (j.contains("gamma")) p.opt.gamma = j["gamma"].get<double>();
  if (j.contains("epsilon")) p.opt.epsilon = j["epsilon"].get<double>();
  if (j.contains("beta1")) p.opt.beta1 = j["beta1"].get<double>();
  if (j.contains("beta2")) p.opt.beta2 = j["beta2"].get<double>();
  if (j.contains("predictor"))
    p.opt.predictor = predictor_from_json(
        j["predictor"], j.contains("predictor_lambda") ? j["predictor_lambda"].get<double>() : 0.9);
  if (j.contains("init")) p.init = j["init"].get<Vector>();
  return p;
}

inline json player_to_json(const PlayerConfig& p) {
  json j;
  j["optimizer"] = to_string(p.opt.kind);
  j["eta"] = p.opt.eta;
  j["gamma"] = p.opt.gamma;
  j["epsilon"] = p.opt.epsilon;
  j["beta1"] = p.opt.beta1;
  j["beta2"] = p.opt.beta2;
  switch (p.opt.predictor.kind) {
    case Predictor::Kind::last_gradient: j["predictor"] = "last_gradient"; break;
    case Predictor::Kind::running_average: j["predictor"] = "running_average"; break;
    case Predictor::Kind::discounted:
      j["predictor"] = "discounted";
      j["predictor_lambda"] = p.opt.predictor.lambda;
      break;
  }
  if (p.init) j["init"] = *p.init;
  return j;
}

}  // namespace cfg_detail

inline ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  require(j.contains("game") && j["game"].contains("kind"), "config: game.kind is required");
  const json& g = j["game"];
  c.game.kind = g["kind"].get<std::string>();
  if (g.contains("v")) c.game.mean_v = g["v"].get<Vector>();
  if (g.contains("a")) c.game.a = cfg_detail::matrix_from_json(g["a"]);
  if (g.contains("b")) c.game.b = g["b"].get<Vector>();
  if (g.contains("c")) c.game.c = g["c"].get<Vector>();
  if (g.contains("d")) c.game.d = g["d"].get<double>();
  if (g.contains("sigma")) c.game.sigma = cfg_detail::matrix_from_json(g["sigma"]);
  if (g.contains("lambda")) c.game.lambda = g["lambda"].get<double>();
  if (g.contains("pwm"))
    for (const auto& row : g["pwm"]) c.game.pwm.push_back(row.get<Vector>());
  if (g.contains("dataset_size")) c.game.dataset_size = g["dataset_size"].get<std::size_t>();
  if (g.contains("clip") && !g["clip"].is_null()) c.game.clip = g["clip"].get<double>();
  if (g.contains("penalty_lambda") && !g["penalty_lambda"].is_null())
    c.game.penalty_lambda = g["penalty_lambda"].get<double>();
  if (j.contains("generator")) c.generator = cfg_detail::player_from_json(j["generator"]);
  if (j.contains("discriminator")) c.discriminator = cfg_detail::player_from_json(j["discriminator"]);
  if (j.contains("schedule")) c.d_steps_per_g_step = j["schedule"].get<long>();
  if (j.contains("iterations")) c.iterations = j["iterations"].get<long>();
  if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<std::size_t>();
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("runs")) c.runs = j["runs"].get<long>();
  if (j.contains("learning_rates")) c.learning_rates = j["learning_rates"].get<std::vector<double>>();
  if (j.contains("holdout_fraction")) c.holdout_fraction = j["holdout_fraction"].get<double>();
  if (j.contains("eval_every")) c.eval_every = j["eval_every"].get<long>();
  if (j.contains("record_every")) c.record_every = j["record_every"].get<long>();
  return c;
}

inline json config_to_json(const ExperimentConfig& c) {
  json j;
  json g;
  g["kind"] = c.game.kind;
  if (!c.game.mean_v.empty()) g["v"] = c.game.mean_v;
  if (c.game.a.rows()) g["a"] = cfg_detail::matrix_to_json(c.game.a);
  if (!c.game.b.empty()) g["b"] = c.game.b;
  if (!c.game.c.empty()) g["c"] = c.game.c;
  if (c.game.d != 0.0) g["d"] = c.game.d;
  if (c.game.sigma.rows()) g["sigma"] = cfg_detail::matrix_to_json(c.game.sigma);
  if (c.game.lambda != 0.0) g["lambda"] = c.game.lambda;
  if (!c.game.pwm.empty()) {
    json rows = json::array();
    for (const auto& r : c.game.pwm) rows.push_back(r);
    g["pwm"] = std::move(rows);
  }
  if (c.game.dataset_size) g["dataset_size"] = c.game.dataset_size;
  if (c.game.clip) g["clip"] = *c.game.clip;
  if (c.game.penalty_lambda) g["penalty_lambda"] = *c.game.penalty_lambda;
  j["game"] = std::move(g);
  j["generator"] = cfg_detail::player_to_json(c.generator);
  j["discriminator"] = cfg_detail::player_to_json(c.discriminator);
  j["schedule"] = c.d_steps_per_g_step;
  j["iterations"] = c.iterations;
  j["batch_size"] = c.batch_size;
  j["seed"] = c.seed;
  j["runs"] = c.runs;
  j["learning_rates"] = c.learning_rates;
  j["holdout_fraction"] = c.holdout_fraction;
  j["eval_every"] = c.eval_every;
  j["record_every"] = c.record_every;
  return j;
}

// Dotted-path override, e.g. "generator.eta=0.2" or "game.clip=1".
inline void apply_override(json& j, const std::string& spec) {
  const auto eq = spec.find('=');
  require(eq != std::string::npos, "override must look like key=value: " + spec);
  const std::string path = spec.substr(0, eq);
  const std::string value = spec.substr(eq + 1);
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dotp = path.find('.', start);
    const std::string key = path.substr(start, dotp == std::string::npos ? dotp : dotp - start);
    require(!key.empty(), "override has an empty path segment: " + spec);
    if (dotp == std::string::npos) {
      json parsed = json::parse(value, nullptr, false);
      (*node)[key] = parsed.is_discarded() ? json(value) : parsed;
      return;
    }
    node = &(*node)[key];
    start = dotp + 1;
  }
}

// ---------------------------------------------------------------------------
// Game construction
// ---------------------------------------------------------------------------

// Lower-triangular Cholesky factor of a symmetric PSD matrix (desk scale).
inline Matrix cholesky_factor(const Matrix& sigma) {
  require(sigma.rows() == sigma.cols(), "cholesky: matrix must be square");
  const std::size_t n = sigma.rows();
  Matrix l(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = sigma(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      if (i == j) {
        require(s >= -1e-12, "cholesky: matrix is not positive semidefinite");
        l(i, i) = std::sqrt(std::max(s, 0.0));
      } else {
        l(i, j) = l(j, j) > 0.0 ? s / l(j, j) : 0.0;
      }
    }
  }
  return l;
}

struct BuiltGame {
  std::unique_ptr<GameSpec> spec;
  Vector gen_init, disc_init;
};

inline std::uint64_t scramble_seed(std::uint64_t seed) {
  // splitmix64 finalizer; keeps the dataset stream apart from the run streams
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline BuiltGame build_game(const ExperimentConfig& c) {
  BuiltGame out;
  if (c.game.kind == "mean") {
    out.spec = std::make_unique<MeanGameSpec>(MeanGame{c.game.mean_v, c.game.clip,
                                                       c.game.penalty_lambda});
  } else if (c.game.kind == "bilinear") {
    out.spec = std::make_unique<BilinearGameSpec>(BilinearGame{c.game.a, c.game.b, c.game.c,
                                                               c.game.d});
  } else if (c.game.kind == "covariance") {
    out.spec = std::make_unique<CovarianceGameSpec>(
        CovarianceGame{c.game.sigma, c.game.lambda, c.game.clip}, cholesky_factor(c.game.sigma));
  } else if (c.game.kind == "pwm") {
    out.spec = std::make_unique<PwmGameSpec>(PwmGame{c.game.pwm, c.game.clip}, c.game.dataset_size,
                                             c.holdout_fraction, scramble_seed(c.seed));
  } else {
    throw std::invalid_argument("unknown game kind: " + c.game.kind);
  }
  out.gen_init = c.generator.init.value_or(Vector(out.spec->gen_dim(), 0.0));
  if (!c.generator.init && c.game.kind == "covariance") {
    const std::size_t d = c.game.sigma.rows();
    out.gen_init = Matrix::identity(d).entries();
  }
  out.disc_init = c.discriminator.init.value_or(Vector(out.spec->disc_dim(), 0.0));
  require(out.gen_init.size() == out.spec->gen_dim(), "config: generator init has wrong length");
  require(out.disc_init.size() == out.spec->disc_dim(),
          "config: discriminator init has wrong length");
  return out;
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

struct Checkpoint {
  double lr = 0.0;
  long iteration = 0;
  double val_loss = 0.0;
  double kl = 0.0;
  bool final_of_run = false;
};

struct SweepRun {
  long run_index = 0;
  std::vector<Checkpoint> checkpoints;
};

enum class SelectionScheme { best_validation_loss, last_epoch };

struct AggregateStats {
  std::string label;
  long count = 0;
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

struct SelectedModel {
  long run_index = 0;
  double lr = 0.0;
  long iteration = 0;
  double val_loss = 0.0;
  double kl = 0.0;
};

struct RunSummary {
  std::string scheme;
  std::vector<SelectedModel> per_run;     // best_validation_loss only
  std::vector<AggregateStats> aggregates; // one entry, or one per learning rate

  json to_json() const {
    json j;
    j["scheme"] = scheme;
    json pr = json::array();
    for (const auto& s : per_run) {
      json e;
      e["run"] = s.run_index;
      e["lr"] = s.lr;
      e["iteration"] = s.iteration;
      e["val_loss"] = s.val_loss;
      e["kl"] = s.kl;
      pr.push_back(std::move(e));
    }
    j["per_run"] = std::move(pr);
    json ag = json::array();
    for (const auto& a : aggregates) {
      json e;
      e["label"] = a.label;
      e["count"] = a.count;
      e["min"] = a.min;
      e["q1"] = a.q1;
      e["median"] = a.median;
      e["q3"] = a.q3;
      e["max"] = a.max;
      ag.push_back(std::move(e));
    }
    j["aggregates"] = std::move(ag);
    return j;
  }
};

// Linear-interpolation quantile on a sorted copy.
inline double quantile(std::vector<double> v, double p) {
  require(!v.empty(), "quantile: empty sample");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const std::size_t lo = static_cast<std::size_t>(h);
  if (lo + 1 >= v.size()) return v.back();
  const double frac = h - static_cast<double>(lo);
  return v[lo] + frac * (v[lo + 1] - v[lo]);
}

inline AggregateStats aggregate_values(std::string label, std::vector<double> values) {
  AggregateStats a;
  a.label = std::move(label);
  a.count = static_cast<long>(values.size());
  a.min = *std::min_element(values.begin(), values.end());
  a.max = *std::max_element(values.begin(), values.end());
  a.q1 = quantile(values, 0.25);
  a.median = quantile(values, 0.5);
  a.q3 = quantile(values, 0.75);
  return a;
}

// Scheme 1 picks, per run, the (iteration, learning-rate) checkpoint with the
// lowest held-out discriminator loss and aggregates the selected KLs; scheme 2
// aggregates final-iteration KLs per learning rate separately.
inline RunSummary aggregate_runs(const std::vector<SweepRun>& runs, SelectionScheme scheme) {
  require(!runs.empty(), "aggregate_runs: no runs");
  RunSummary out;
  if (scheme == SelectionScheme::best_validation_loss) {
    out.scheme = "best_validation_loss";
    std::vector<double> kls;
    for (const auto& run : runs) {
      require(!run.checkpoints.empty(), "aggregate_runs: run without checkpoints");
      const Checkpoint* best = &run.checkpoints.front();
      for (const auto& c : run.checkpoints)
        if (c.val_loss < best->val_loss) best = &c;
      out.per_run.push_back({run.run_index, best->lr, best->iteration, best->val_loss, best->kl});
      kls.push_back(best->kl);
    }
    out.aggregates.push_back(aggregate_values("all", std::move(kls)));
  } else {
    out.scheme = "last_epoch";
    std::map<double, std::vector<double>> by_lr;
    for (const auto& run : runs)
      for (const auto& c : run.checkpoints)
        if (c.final_of_run) by_lr[c.lr].push_back(c.kl);
    require(!by_lr.empty(), "aggregate_runs: no final checkpoints");
    for (auto& [lr, kls] : by_lr)
      out.aggregates.push_back(aggregate_values("lr=" + format_double(lr), std::move(kls)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Run + sweep drivers
// ---------------------------------------------------------------------------

inline unsigned sweep_thread_count() {
  if (const char* env = std::getenv("DYNLAB_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n > 0) return static_cast<unsigned>(n);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? hw : 1;
}

// Runs `tasks` indexed jobs on the sweep pool; results land by index so the
// interleaving never shows.
template <typename Fn>
void parallel_for_index(std::size_t tasks, Fn&& fn) {
  const unsigned threads = std::min<unsigned>(sweep_thread_count(),
                                              static_cast<unsigned>(std::max<std::size_t>(tasks, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < tasks; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned w = 0; w < threads; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < tasks; i = next.fetch_add(1)) fn(i);
    });
  for (auto& th : pool) th.join();
}

struct SweepResult {
  std::vector<SweepRun> runs;
  RunSummary best_validation;
  RunSummary last_epoch;
};

namespace sweep_detail {

inline long gcd_cadence(long a, long b) {
  while (b) {
    const long t = a % b;
    a = b;
    b = t;
  }
  return a;
}

struct TaskOutput {
  std::vector<Checkpoint> checkpoints;
  std::string csv;
};

// One (run, lr) training job: checkpoint rows every eval_every updates and,
// when want_csv, a trajectory CSV at the record_every cadence.
inline TaskOutput sweep_task(const ExperimentConfig& cfg, const BuiltGame& built,
                             const PwmGameSpec* pwm, long run_index, double lr, bool want_csv) {
  OptimizerConfig gen_opt = cfg.generator.opt;
  OptimizerConfig disc_opt = cfg.discriminator.opt;
  gen_opt.eta = lr;
  disc_opt.eta = lr;
  RunOptions opts;
  opts.record_every =
      want_csv ? gcd_cadence(cfg.record_every, cfg.eval_every) : cfg.eval_every;
  Trajectory traj = run_dynamics(*built.spec, gen_opt, built.gen_init, disc_opt, built.disc_init,
                                 {cfg.d_steps_per_g_step}, cfg.iterations, {cfg.batch_size},
                                 cfg.seed + static_cast<std::uint64_t>(run_index), opts);
  TaskOutput out;
  for (const auto& rec : traj.records) {
    if (rec.iteration % cfg.eval_every != 0 && rec.iteration != cfg.iterations) continue;
    Checkpoint c;
    c.lr = lr;
    c.iteration = rec.iteration;
    c.kl = rec.diagnostics.empty() ? 0.0 : rec.diagnostics.front();
    c.val_loss = pwm ? pwm->validation_loss(rec.gen_params, rec.disc_params) : rec.loss;
    out.checkpoints.push_back(c);
  }
  if (!out.checkpoints.empty()) out.checkpoints.back().final_of_run = true;
  if (want_csv) {
    std::erase_if(traj.records, [&](const TrajectoryRecord& rec) {
      return rec.iteration % cfg.record_every != 0 && rec.iteration != cfg.iterations;
    });
    out.csv = to_csv(trajectory_table(traj));
  }
  return out;
}

inline SweepResult assemble(const ExperimentConfig& cfg, std::vector<TaskOutput>& results) {
  const std::size_t n_lr = cfg.learning_rates.size();
  SweepResult out;
  out.runs.resize(static_cast<std::size_t>(cfg.runs));
  for (long r = 0; r < cfg.runs; ++r) {
    auto& run = out.runs[static_cast<std::size_t>(r)];
    run.run_index = r;
    for (std::size_t l = 0; l < n_lr; ++l) {
      const auto& cps = results[static_cast<std::size_t>(r) * n_lr + l].checkpoints;
      run.checkpoints.insert(run.checkpoints.end(), cps.begin(), cps.end());
    }
  }
  out.best_validation = aggregate_runs(out.runs, SelectionScheme::best_validation_loss);
  out.last_epoch = aggregate_runs(out.runs, SelectionScheme::last_epoch);
  return out;
}

}  // namespace sweep_detail

// Grid x runs sweep: every (run, lr) trains an independent model with
// per-run seed = base seed + run index; checkpoints every eval_every
// generator updates record (held-out validation loss, KL). The held-out
// split exists only for the pwm game; other games fall back to the game loss
// as the selection score.
inline SweepResult run_sweep(const ExperimentConfig& cfg) {
  const auto errors = cfg.violations();
  if (!errors.empty()) throw std::invalid_argument("invalid config: " + errors.front());
  require(!cfg.learning_rates.empty(), "run_sweep: learning_rates must be nonempty");
  const BuiltGame built = build_game(cfg);
  const auto* pwm = dynamic_cast<const PwmGameSpec*>(built.spec.get());
  const std::size_t n_lr = cfg.learning_rates.size();
  const std::size_t tasks = static_cast<std::size_t>(cfg.runs) * n_lr;
  std::vector<sweep_detail::TaskOutput> results(tasks);
  parallel_for_index(tasks, [&](std::size_t task) {
    results[task] = sweep_detail::sweep_task(cfg, built, pwm, static_cast<long>(task / n_lr),
                                             cfg.learning_rates[task % n_lr], false);
  });
  return sweep_detail::assemble(cfg, results);
}

// Writes trajectory CSVs (one per run, or one per run x learning rate in
// sweep mode), a summary JSON and the resolved config. Deterministic per
// (config, seed): identical inputs produce byte-identical files.
inline void run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  const auto errors = cfg.violations();
  if (!errors.empty()) {
    std::string msg = "invalid config:";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw std::invalid_argument(msg);
  }
  std::filesystem::create_directories(out_dir);
  write_file_atomic(out_dir / "config.json", config_to_json(cfg).dump(2) + "\n");

  if (!cfg.learning_rates.empty()) {
    // sweep mode: trajectories per (run, lr) plus the aggregated summary
    const BuiltGame built = build_game(cfg);
    const auto* pwm = dynamic_cast<const PwmGameSpec*>(built.spec.get());
    const std::size_t n_lr = cfg.learning_rates.size();
    const std::size_t tasks = static_cast<std::size_t>(cfg.runs) * n_lr;
    std::vector<sweep_detail::TaskOutput> results(tasks);
    parallel_for_index(tasks, [&](std::size_t task) {
      results[task] = sweep_detail::sweep_task(cfg, built, pwm, static_cast<long>(task / n_lr),
                                               cfg.learning_rates[task % n_lr], true);
    });
    for (std::size_t task = 0; task < tasks; ++task) {
      const long run_index = static_cast<long>(task / n_lr);
      const double lr = cfg.learning_rates[task % n_lr];
      write_file_atomic(out_dir / ("run" + std::to_string(run_index) + "_lr" + format_double(lr) +
                                   ".csv"),
                        results[task].csv);
    }
    const SweepResult sweep = sweep_detail::assemble(cfg, results);
    json j;
    j["best_validation_loss"] = sweep.best_validation.to_json();
    j["last_epoch"] = sweep.last_epoch.to_json();
    write_file_atomic(out_dir / "summary.json", j.dump(2) + "\n");
    return;
  }

  const BuiltGame built = build_game(cfg);
  std::vector<std::string> csvs(static_cast<std::size_t>(cfg.runs));
  std::vector<double> final_kls(static_cast<std::size_t>(cfg.runs), 0.0);
  std::vector<char> has_kl(static_cast<std::size_t>(cfg.runs), 0);
  std::vector<char> diverged(static_cast<std::size_t>(cfg.runs), 0);
  const std::vector<std::string> diag_names = built.spec->diagnostic_names();
  parallel_for_index(static_cast<std::size_t>(cfg.runs), [&](std::size_t r) {
    RunOptions opts;
    opts.record_every = cfg.record_every;
    const Trajectory traj = run_dynamics(*built.spec, cfg.generator.opt, built.gen_init,
                                         cfg.discriminator.opt, built.disc_init,
                                         {cfg.d_steps_per_g_step}, cfg.iterations,
                                         {cfg.batch_size}, cfg.seed + r, opts);
    csvs[r] = to_csv(trajectory_table(traj));
    diverged[r] = traj.diverged ? 1 : 0;
    if (!traj.records.empty())
      for (std::size_t d = 0; d < diag_names.size(); ++d)
        if (diag_names[d] == "kl") {
          final_kls[r] = traj.records.back().diagnostics[d];
          has_kl[r] = 1;
        }
  });
  for (long r = 0; r < cfg.runs; ++r)
    write_file_atomic(out_dir / ("run" + std::to_string(r) + ".csv"),
                      csvs[static_cast<std::size_t>(r)]);
  json j;
  j["runs"] = cfg.runs;
  json per_run = json::array();
  std::vector<double> kls;
  for (long r = 0; r < cfg.runs; ++r) {
    json e;
    e["run"] = r;
    e["diverged"] = static_cast<bool>(diverged[static_cast<std::size_t>(r)]);
    if (has_kl[static_cast<std::size_t>(r)]) {
      e["final_kl"] = final_kls[static_cast<std::size_t>(r)];
      kls.push_back(final_kls[static_cast<std::size_t>(r)]);
    }
    per_run.push_back(std::move(e));
  }
  j["per_run"] = std::move(per_run);
  if (!kls.empty()) {
    const AggregateStats a = aggregate_values("final_kl", std::move(kls));
    json e;
    e["count"] = a.count;
    e["min"] = a.min;
    e["q1"] = a.q1;
    e["median"] = a.median;
    e["q3"] = a.q3;
    e["max"] = a.max;
    j["final_kl"] = std::move(e);
  }
  write_file_atomic(out_dir / "summary.json", j.dump(2) + "\n");
}

}  // namespace dynlab
