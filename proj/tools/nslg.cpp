#include <CLI11.hpp>

#include <iostream>

#include "nslg/runner.hpp"

using namespace nslg;

int main(int argc, char** argv) {
  CLI::App app{"nslg: periodic pseudo-spectral NS-LLG magnetoelastic simulator and structure checks"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  RunOptions opt;
  std::string out_dir;
  double dt = 0.0, t_end = 0.0;
  std::uint64_t seed = 0;
  app.add_option("--config", config_path, "configuration file (key = value, [section] headers)")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory (overrides 'output')");
  app.add_flag("--deterministic", opt.deterministic, "byte-reproducible artifacts (no wall-clock fields)");
  app.add_option("--threads", opt.threads, "worker threads for independent runs")->check(CLI::PositiveNumber);
  auto* dt_opt = app.add_option("--dt", dt, "time step override")->check(CLI::PositiveNumber);
  auto* t_opt = app.add_option("--t-end", t_end, "final time override")->check(CLI::PositiveNumber);
  auto* seed_opt = app.add_option("--seed", seed, "random initial data seed override");

  auto* sim = app.add_subcommand("simulate", "run the configured model; writes series.csv, snapshots and summary.txt");
  auto* inv = app.add_subcommand("check-invariants", "structural residuals of the initial state");
  auto* var = app.add_subcommand("varcheck", "variational, dissipation and trajectory checks");
  auto* coe = app.add_subcommand("coeffs", "coefficient search for the instant functionals");
  auto* mms = app.add_subcommand("mms", "manufactured-solution convergence study");
  auto* mac = app.add_subcommand("oracle-macrospin", "uniform magnetization against the closed form");
  std::string mms_model = "full";
  mms->add_option("--model", mms_model, "full | perturb")->check(CLI::IsMember({"full", "perturb"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (!out_dir.empty()) opt.out = out_dir;
    if (dt_opt->count()) opt.dt = dt;
    if (t_opt->count()) opt.t_end = t_end;
    if (seed_opt->count()) opt.seed = seed;
    if (sim->parsed() && config_path.empty()) {
      std::cerr << "error: simulate requires --config\n";
      return 2;
    }
    RunConfig cfg = apply_overrides(config_path.empty() ? default_config() : load_config(config_path), opt);

    if (sim->parsed()) return cmd_simulate(cfg, std::cout, std::cerr);
    if (inv->parsed()) return cmd_check_invariants(cfg, std::cout, std::cerr);
    if (var->parsed()) return cmd_varcheck(cfg, std::cout, std::cerr);
    if (coe->parsed()) return cmd_coeffs(cfg, std::cout, std::cerr);
    if (mms->parsed()) return cmd_mms(cfg, mms_model == "full" ? ModelKind::full : ModelKind::perturb, opt.threads, std::cout, std::cerr);
    if (mac->parsed()) return cmd_oracle_macrospin(cfg, std::cout, std::cerr);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const SnapshotError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 2;
}
