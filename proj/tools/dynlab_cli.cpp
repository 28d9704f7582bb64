// Experiment runner: simulate | verify | sweep | plot. See README for the
// config schema and output formats.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dynlab/analysis.hpp"
#include "dynlab/csv.hpp"
#include "dynlab/experiment.hpp"
#include "dynlab/plot.hpp"

namespace fs = std::filesystem;
using namespace dynlab;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "out";
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<long> runs;
};

ExperimentConfig load_config(const CommonArgs& args) {
  json j = json::parse(read_file(args.config_path));
  for (const auto& ov : args.overrides) apply_override(j, ov);
  if (args.seed) j["seed"] = *args.seed;
  if (args.runs) j["runs"] = *args.runs;
  ExperimentConfig cfg = config_from_json(j);
  const auto errors = cfg.violations();
  if (!errors.empty()) {
    std::string msg = "invalid config:";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw std::invalid_argument(msg);
  }
  return cfg;
}

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required) {
  auto* c = cmd->add_option("--config", args.config_path, "JSON config file");
  if (config_required) c->required();
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_option("--override", args.overrides, "config override key=value (repeatable)");
  std::uint64_t seed_val = 0;
  (void)seed_val;
  cmd->add_option_function<std::uint64_t>(
      "--seed", [&args](const std::uint64_t& v) { args.seed = v; }, "base seed");
  cmd->add_option_function<long>(
      "--runs", [&args](const long& v) { args.runs = v; }, "number of runs");
}

// Random instance of the convergence suite: matrix up to 8x6 with controlled
// rank and largest singular value <= 1, range-space start, step size at 90%
// of the admissible cap.
struct VerifyInstance {
  Matrix a;
  Vector x0, y0;
  double eta = 0.0;
};

VerifyInstance make_instance(std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> lam(0.5, 1.0);
  const std::size_t m = 2 + gen() % 7, n = 2 + gen() % 5;
  const std::size_t rank = 1 + gen() % std::min(m, n);
  // orthonormal factors via Gram-Schmidt
  const auto orthonormal = [&](std::size_t rows, std::size_t cols) {
    Matrix q(rows, cols);
    for (std::size_t c = 0; c < cols; ++c) {
      Vector v(rows);
      for (double& x : v) x = nd(gen);
      for (std::size_t p = 0; p < c; ++p) {
        double proj = 0.0;
        for (std::size_t i = 0; i < rows; ++i) proj += q(i, p) * v[i];
        for (std::size_t i = 0; i < rows; ++i) v[i] -= proj * q(i, p);
      }
      const double nrm = norm2(v);
      for (std::size_t i = 0; i < rows; ++i) q(i, c) = v[i] / nrm;
    }
    return q;
  };
  const Matrix u = orthonormal(m, rank), v = orthonormal(n, rank);
  std::uniform_real_distribution<double> sd(0.25, 1.0);
  Vector sing(rank);
  for (double& s : sing) s = sd(gen);
  const double target = lam(gen);
  const double mx = *std::max_element(sing.begin(), sing.end());
  for (double& s : sing) s *= target / mx;
  VerifyInstance inst;
  inst.a = Matrix(m, n);
  for (std::size_t r = 0; r < rank; ++r)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) inst.a(i, j) += u(i, r) * sing[r] * v(j, r);
  Vector gx(n), gy(m);
  for (double& x : gx) x = nd(gen);
  for (double& x : gy) x = nd(gen);
  inst.x0 = inst.a.apply(gx);
  const double nx = norm2(inst.x0);
  for (double& x : inst.x0) x /= nx;
  inst.y0 = inst.a.apply_transposed(gy);
  const double ny = norm2(inst.y0);
  for (double& x : inst.y0) x /= ny;
  const double gamma = ConvergenceParams::from_matrix(inst.a, 0.0).gamma;
  inst.eta = 0.9 / (3.0 * gamma * gamma);
  return inst;
}

int cmd_simulate(const CommonArgs& args) {
  const ExperimentConfig cfg = load_config(args);
  run_experiment(cfg, args.out_dir);
  std::cout << "wrote " << args.out_dir << "\n";
  return 0;
}

int cmd_sweep(const CommonArgs& args) {
  const ExperimentConfig cfg = load_config(args);
  if (cfg.learning_rates.empty())
    throw std::invalid_argument("sweep needs a nonempty learning_rates grid");
  const SweepResult res = run_sweep(cfg);
  fs::create_directories(args.out_dir);
  json j;
  j["best_validation_loss"] = res.best_validation.to_json();
  j["last_epoch"] = res.last_epoch.to_json();
  write_file_atomic(fs::path(args.out_dir) / "summary.json", j.dump(2) + "\n");
  std::cout << "best_validation_loss median kl = "
            << res.best_validation.aggregates.front().median << "\n";
  for (const auto& a : res.last_epoch.aggregates)
    std::cout << "last_epoch " << a.label << " median kl = " << a.median << "\n";
  std::cout << "wrote " << (fs::path(args.out_dir) / "summary.json").string() << "\n";
  return 0;
}

int cmd_verify(const CommonArgs& args, long instances, long max_t, long max_i, long steps) {
  fs::create_directories(args.out_dir);
  const std::uint64_t base_seed = args.seed.value_or(1);
  int failures = 0;
  std::mt19937_64 pick(base_seed);

  // exact distance expansion of plain gradient steps on the identity game
  {
    const double eta = 0.1;
    std::vector<Vector> xs{{1.0, 0.0}}, ys{{0.0, 1.0}};
    for (int t = 0; t < 200; ++t) {
      const Vector x = xs.back(), y = ys.back();
      Vector xn = x, yn = y;
      axpy(-eta, y, xn);
      axpy(eta, x, yn);
      xs.push_back(xn);
      ys.push_back(yn);
    }
    const auto rep = check_gd_divergence(xs, ys, eta);
    write_file_atomic(fs::path(args.out_dir) / "gd_divergence.json", rep.to_json().dump(2) + "\n");
    std::printf("[%s] gd distance expansion (200 steps)\n", rep.passed() ? "PASS" : "FAIL");
    failures += !rep.passed();
  }

  for (long k = 0; k < instances; ++k) {
    const VerifyInstance inst = make_instance(base_seed * 1000 + static_cast<std::uint64_t>(k));
    const auto params = ConvergenceParams::from_matrix(inst.a, inst.eta);
    const auto h = run_bilinear_omd(inst.a, inst.x0, inst.y0, inst.eta, std::max(steps, max_t));
    const double d00 = delta(inst.a, h.x(0), h.y(0), 0);

    VerificationReport step_rep;
    step_rep.instance = "step identity, instance " + std::to_string(k);
    for (long t = 2; t <= std::min<long>(40, h.last_t()); ++t)
      for (long i = 0; i <= 3; ++i) {
        const double resid = check_delta_step_identity(h, i, t);
        step_rep.add("step_identity", t, i, resid, 1e-10 * d00, resid - 1e-10 * d00,
                     resid <= 1e-10 * d00);
      }
    auto decay_rep = check_geometric_decay(h, params, max_t, max_i);
    auto tail_rep = check_tail_bound(h, params, max_t);
    Vector u(inst.a.rows()), v(inst.a.cols());
    std::normal_distribution<double> nd;
    for (double& x : u) x = nd(pick);
    for (double& x : v) x = nd(pick);
    auto ladder_rep = check_ladder_inner_identities(inst.a, u, v, static_cast<long>(k % 3));

    const std::string stem = "instance" + std::to_string(k);
    json j;
    j["matrix_rows"] = inst.a.rows();
    j["matrix_cols"] = inst.a.cols();
    j["eta"] = inst.eta;
    j["gamma"] = params.gamma;
    j["lambda_inf"] = params.lambda_inf;
    j["step_identity"] = step_rep.to_json();
    j["geometric_decay"] = decay_rep.to_json();
    j["tail_bound"] = tail_rep.to_json();
    j["ladder_identities"] = ladder_rep.to_json();
    write_file_atomic(fs::path(args.out_dir) / (stem + ".json"), j.dump(2) + "\n");

    const bool ok =
        step_rep.passed() && decay_rep.passed() && tail_rep.passed() && ladder_rep.passed();
    std::printf("[%s] instance %ld (%zux%zu, eta=%.3g, gamma=%.3g)\n", ok ? "PASS" : "FAIL", k,
                inst.a.rows(), inst.a.cols(), inst.eta, params.gamma);
    failures += !ok;
  }
  std::printf("%s: %ld instance(s), %d failure group(s)\n", failures ? "FAIL" : "PASS", instances,
              failures);
  return failures ? 1 : 0;
}

int cmd_plot(const std::string& input, const std::string& kind, const std::string& output) {
  const CsvTable data = parse_csv(read_file(input));
  const PlotFiles files = emit_plot(data, plot_kind_from_string(kind));
  write_file_atomic(output, files.svg);
  const fs::path companion = fs::path(output).replace_extension(".csv");
  write_file_atomic(companion, to_csv(files.csv));
  std::cout << "wrote " << output << " and " << companion.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dynlab: optimistic and plain no-regret training dynamics for zero-sum games"};
  app.require_subcommand(1);

  CommonArgs sim_args;
  auto* sim = app.add_subcommand("simulate", "run one experiment config, write trajectories");
  add_common(sim, sim_args, true);

  CommonArgs sweep_args;
  auto* sweep = app.add_subcommand("sweep", "learning-rate grid x runs, write aggregate summary");
  add_common(sweep, sweep_args, true);

  CommonArgs verify_args;
  auto* verify = app.add_subcommand("verify", "run the convergence verification suite");
  add_common(verify, verify_args, false);
  long instances = 10, max_t = 500, max_i = 3, steps = 500;
  verify->add_option("--instances", instances, "number of random instances");
  verify->add_option("--max-t", max_t, "time horizon for the decay checks");
  verify->add_option("--max-i", max_i, "top ladder level checked");
  verify->add_option("--steps", steps, "trajectory length");

  std::string plot_in, plot_kind = "series", plot_out = "plot.svg";
  auto* plot = app.add_subcommand("plot", "render a trajectory/summary CSV to SVG");
  plot->add_option("--in", plot_in, "input CSV")->required();
  plot->add_option("--kind", plot_kind, "trajectory2d | series | boxplot");
  plot->add_option("--out", plot_out, "output SVG path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(sim_args);
    if (sweep->parsed()) return cmd_sweep(sweep_args);
    if (verify->parsed()) return cmd_verify(verify_args, instances, max_t, max_i, steps);
    if (plot->parsed()) return cmd_plot(plot_in, plot_kind, plot_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
