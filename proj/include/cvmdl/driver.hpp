#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "cvmdl/cv_estimator.hpp"
#include "cvmdl/ensemble.hpp"

namespace cvmdl {

// Thrown when the budget cannot cover minimum exploration plus a single
// exploitation draw (or a single high-fidelity draw for the baseline).
struct BudgetInfeasible : std::runtime_error {
  using std::runtime_error::runtime_error;
};

long q_growth(long m, double m_star_hat);

// Index into the table of the subset minimizing the estimated loss at
// max(m, m_star). Infeasible entries are skipped when any feasible entry
// exists, and entries whose k1 estimate vanished (unresolvable loss) are
// skipped when any feasible entry resolved a positive k1. Ties break
// toward smaller per-draw cost, then the earlier (lexicographically
// smaller) subset.
std::size_t select_subset(const std::vector<SubsetEvaluation>& table, long m);

struct BudgetLedger {
  double total = 0.0;
  double c_epr = 0.0;
  double exploration_spent = 0.0;
  double exploitation_spent = 0.0;

  double spent() const { return exploration_spent + exploitation_spent; }
  double remaining() const { return total - spent(); }
  void charge_exploration(double amount);
  void charge_exploitation(double amount);
};

struct IterationRecord {
  long m = 0;
  std::vector<SubsetEvaluation> table;
  std::vector<int> chosen;
  long growth_target = 0;  // 0 when the loop stops at this iteration
};

struct CvmdlOptions {
  WeightSpec weight;
  AlphaMode alpha_mode = AlphaMode::Plain;
  double tau = 0.05;
  std::optional<EvalGrid> grid;  // default: sample-driven (d=1) or weight box
  bool sort = true;
};

struct CvmdlOutput {
  std::vector<int> subset;
  long m = 0;
  long n_exploit = 0;
  SurrogateCoefficients coeffs;
  CdfEstimate raw;      // unclipped control-variate estimate
  CdfEstimate clipped;  // raw clipped to [0, 1]
  CdfEstimate sorted;   // monotone repair of raw, then clipped
  BudgetLedger ledger;
  std::vector<IterationRecord> trace;
};

CvmdlOutput run_cvmdl(Sampler& sampler, double budget,
                      const CvmdlOptions& options, rng::Stream stream);

// Spends the whole budget on high-fidelity draws. When no grid is given,
// a sample-driven grid (d = 1) or a uniform grid over the sample bounding
// box is used.
CdfEstimate run_ecdf_baseline(Sampler& sampler, double budget,
                              const std::optional<EvalGrid>& grid,
                              rng::Stream stream, int default_resolution = 128);

}  // namespace cvmdl
