// dropout-sgd-infer: CSV experiment driver for SGD/GD with dropout.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dropout_sgd/experiments.hpp"

namespace {

namespace fs = std::filesystem;

struct Flags {
  std::optional<std::size_t> d, n, runs, scale, draws, design_rows, burn_in, threads;
  std::optional<double> p, c, zeta, omega;
  std::optional<std::string> alpha, checkpoints, out, joint_quantile;
  std::optional<std::uint64_t> seed;
  bool oracle = false;
  std::string config_path;
};

void add_common(CLI::App& cmd, Flags& f) {
  cmd.add_option("--d", f.d, "dimension");
  cmd.add_option("--p", f.p, "retain probability in (0,1]");
  cmd.add_option("--alpha", f.alpha, "learning rate(s), comma separated");
  cmd.add_option("--n", f.n, "steps (contraction: design rows)");
  cmd.add_option("--runs", f.runs, "replications");
  cmd.add_option("--c", f.c, "block constant c in eta_m = floor(c m^zeta)");
  cmd.add_option("--zeta", f.zeta, "block exponent zeta > 1");
  cmd.add_option("--omega", f.omega, "confidence level is 1 - omega");
  cmd.add_option("--seed", f.seed, "64-bit seed");
  cmd.add_option("--scale", f.scale, "divide n and checkpoints by this factor");
  cmd.add_option("--out", f.out, "output directory");
  cmd.add_option("--checkpoints", f.checkpoints, "checkpoint list, comma separated (unscaled)");
  cmd.add_option("--draws", f.draws, "dropout draws N for the contraction estimate");
  cmd.add_option("--design-rows", f.design_rows, "rows of the AGD design in traces");
  cmd.add_option("--burn-in", f.burn_in, "iterates skipped before averaging");
  cmd.add_option("--threads", f.threads, "worker threads (0: all cores)");
  cmd.add_option("--joint-quantile", f.joint_quantile, "half_omega (default) or conventional");
  cmd.add_flag("--oracle", f.oracle, "cov-convergence: i.i.d. N(0, Sigma) input");
  cmd.add_option("--config", f.config_path, "key=value config file; flags override it");
}

template <typename T>
std::string text(const T& v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

dsgd::ExperimentConfig build_config(const Flags& f) {
  dsgd::ExperimentConfig cfg;
  if (!f.config_path.empty()) dsgd::load_config_file(cfg, f.config_path);
  auto set = [&](const char* key, const auto& opt) {
    if (opt) dsgd::apply_setting(cfg, key, text(*opt));
  };
  set("d", f.d);
  set("p", f.p);
  set("alpha", f.alpha);
  set("n", f.n);
  set("runs", f.runs);
  set("c", f.c);
  set("zeta", f.zeta);
  set("omega", f.omega);
  set("seed", f.seed);
  set("scale", f.scale);
  set("out", f.out);
  set("checkpoints", f.checkpoints);
  set("draws", f.draws);
  set("design_rows", f.design_rows);
  set("burn_in", f.burn_in);
  set("threads", f.threads);
  set("joint_quantile", f.joint_quantile);
  if (f.oracle) cfg.oracle = true;
  cfg.validate();
  return cfg;
}

std::string alpha_tag(double a) { return "coverage_alpha" + dsgd::fmt_real(a) + ".csv"; }

void report(const fs::path& path) { std::cout << "wrote " << path.string() << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dropout GD/SGD experiments: contraction table, coverage, traces, covariance convergence"};
  app.require_subcommand(1);
  Flags flags;
  auto* contraction = app.add_subcommand("contraction", "empirical contraction constant around 2/lambda_max");
  auto* coverage = app.add_subcommand("coverage", "coverage of online confidence intervals over replications");
  auto* traces = app.add_subcommand("traces", "averaged AGD and ASGD iterates from one run");
  auto* covconv = app.add_subcommand("cov-convergence", "long-run covariance estimates along a run");
  for (auto* cmd : {contraction, coverage, traces, covconv}) add_common(*cmd, flags);

  CLI11_PARSE(app, argc, argv);

  try {
    const dsgd::ExperimentConfig cfg = build_config(flags);
    const fs::path out = cfg.out_dir;
    if (contraction->parsed()) {
      const fs::path path = out / "contraction.csv";
      dsgd::write_csv(path, dsgd::contraction_table(dsgd::run_contraction(cfg)));
      report(path);
    } else if (coverage->parsed()) {
      for (double a : cfg.alpha) {
        const auto res = dsgd::run_coverage(cfg, a);
        if (!res.admissibility.admissible)
          std::cerr << "warning: alpha=" << a << " fails the q=2 admissibility check (threshold ~ "
                    << res.admissibility.threshold << "); running anyway\n";
        const fs::path path = out / (cfg.alpha.size() == 1 ? std::string("coverage.csv") : alpha_tag(a));
        dsgd::write_csv(path, dsgd::coverage_table(res));
        report(path);
      }
    } else if (traces->parsed()) {
      const fs::path path = out / "traces.csv";
      dsgd::write_csv(path, dsgd::traces_table(dsgd::run_traces(cfg)));
      report(path);
    } else if (covconv->parsed()) {
      const fs::path path = out / (cfg.oracle ? "cov_convergence_oracle.csv" : "cov_convergence.csv");
      dsgd::write_csv(path, dsgd::series_table(dsgd::run_cov_convergence(cfg)));
      report(path);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
