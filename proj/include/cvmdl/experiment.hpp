#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cvmdl/driver.hpp"
#include "cvmdl/serialize.hpp"

namespace cvmdl {

enum class EstimatorKind { Ecdf, Cvmdl, CvmdlSorted, CvmdlStar, CvmdlStarSorted };

std::string estimator_name(EstimatorKind kind);
EstimatorKind estimator_from_name(const std::string& name);

struct ExperimentConfig {
  EnsembleHandle ensemble;
  std::vector<double> budgets;
  int trials = 1;
  std::vector<EstimatorKind> estimators;
  WeightSpec weight;
  std::optional<EvalGrid> grid;
  long oracle_samples = 100000;
  std::optional<std::string> oracle_file;
  std::uint64_t seed = 0;
  double tau = 0.05;
  std::string out_dir = "runs";
};

ExperimentConfig load_experiment_config(const std::string& path);

// Reference CDF for error metrics: a large seeded high-fidelity ECDF, or
// a previously saved estimate when the config names an oracle file.
CdfEstimate compute_oracle(const ExperimentConfig& config);

struct TrialOutcome {
  EstimatorKind estimator = EstimatorKind::Ecdf;
  double budget = 0.0;
  int trial = 0;
  double error = 0.0;
  std::vector<int> subset;  // empty for the baseline
  long m = 0;
  long n_exploit = 0;
  double spent = 0.0;
};

// All requested estimators for one (budget, trial) pair. Estimator
// variants that share an underlying run (plain / tail-extended) reuse it.
std::vector<TrialOutcome> run_trial(const ExperimentConfig& config,
                                    const CdfEstimate& oracle, double budget,
                                    std::size_t budget_index, int trial);

// budgets x trials, parallel over trials; outcome order is deterministic.
std::vector<TrialOutcome> run_sweep(const ExperimentConfig& config,
                                    const CdfEstimate& oracle, int workers);

struct SweepCell {
  EstimatorKind estimator = EstimatorKind::Ecdf;
  double budget = 0.0;
  double mean_error = 0.0;
  double q05 = 0.0, q50 = 0.0, q95 = 0.0;
  double mean_m = 0.0;
  double mean_n_exploit = 0.0;
  std::map<std::string, double> selection_freq;
};

std::vector<SweepCell> aggregate_sweep(const std::vector<TrialOutcome>& outcomes);

void write_sweep_csv(const std::string& path, const std::vector<SweepCell>& cells);
std::vector<SweepCell> read_sweep_csv(const std::string& path);
void write_selection_csv(const std::string& path,
                         const std::vector<SweepCell>& cells);

int cmd_run(const ExperimentConfig& config, double budget,
            std::uint64_t trial_seed, const std::string& out_dir);
int cmd_sweep(const ExperimentConfig& config, int workers,
              const std::string& out_dir);
int cmd_oracle(const ExperimentConfig& config, const std::string& out_path);
int cmd_report(const std::string& run_dir, const std::vector<double>& levels,
               const std::string& out_path);

}  // namespace cvmdl
