#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "cvmdl/experiment.hpp"

namespace {

cvmdl::ExperimentConfig load_config(const std::string& path) {
  return cvmdl::load_experiment_config(path);
}

void apply_overrides(cvmdl::ExperimentConfig& cfg,
                     const std::vector<std::string>& estimators,
                     std::uint64_t seed, bool seed_set, int trials) {
  if (!estimators.empty()) {
    cfg.estimators.clear();
    for (const auto& name : estimators)
      cfg.estimators.push_back(cvmdl::estimator_from_name(name));
  }
  if (seed_set) cfg.seed = seed;
  if (trials > 0) cfg.trials = trials;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"budget-constrained multifidelity CDF estimation"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out;
  std::vector<std::string> estimators;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int trials = 0;
  int workers = 0;
  double budget = 0.0;
  std::vector<double> levels{0.9, 0.95, 0.99};

  const char* env_out = std::getenv("CVMDL_OUT");
  const std::string default_out = env_out ? env_out : "runs";

  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    auto* opt = cmd->add_option("--config", config_path, "experiment config (json)");
    if (needs_config) opt->required();
    cmd->add_option("--out", out, "output directory or file");
    cmd->add_option("--estimators", estimators, "estimator names")->delimiter(',');
    cmd->add_option("--seed", seed, "master seed")->each([&](const std::string&) {
      seed_set = true;
    });
    cmd->add_option("--trials", trials, "number of repeated trials");
    cmd->add_option("--workers", workers, "worker threads (default: hardware)");
  };

  auto* run = app.add_subcommand("run", "one trial of each requested estimator");
  add_common(run, true);
  run->add_option("--budget", budget, "sampling budget")->required();

  auto* sweep = app.add_subcommand("sweep", "budgets x trials study with aggregation");
  add_common(sweep, true);

  auto* oracle = app.add_subcommand("oracle", "large-sample oracle statistics");
  add_common(oracle, true);

  std::string run_dir;
  auto* report = app.add_subcommand("report", "risk metrics from a run directory");
  report->add_option("--run-dir", run_dir, "directory produced by `run`")->required();
  report->add_option("--levels", levels, "CVaR levels")->delimiter(',');
  report->add_option("--out", out, "output file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (report->parsed()) {
      const std::string path = out.empty() ? run_dir + "/risk.json" : out;
      return cvmdl::cmd_report(run_dir, levels, path);
    }

    cvmdl::ExperimentConfig cfg = load_config(config_path);
    apply_overrides(cfg, estimators, seed, seed_set, trials);
    const std::string out_dir = !out.empty() ? out
        : (cfg.out_dir.empty() ? default_out : cfg.out_dir);

    if (run->parsed()) return cvmdl::cmd_run(cfg, budget, 0, out_dir);
    if (sweep->parsed()) return cvmdl::cmd_sweep(cfg, workers, out_dir);
    if (oracle->parsed())
      return cvmdl::cmd_oracle(cfg, out_dir + "/oracle_stats.json");
  } catch (const cvmdl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const cvmdl::BudgetInfeasible& e) {
    std::cerr << "budget infeasible: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
