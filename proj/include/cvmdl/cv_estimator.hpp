#pragma once

#include <Eigen/Dense>
#include <vector>

#include "cvmdl/cdf.hpp"
#include "cvmdl/ensemble.hpp"
#include "cvmdl/surrogate.hpp"

namespace cvmdl {

// Weight for the integrated squared CDF error. ConstantOne integrates
// against Lebesgue measure (exact only for d = 1, where the integrand
// has compact support); Rectangle is an indicator on a box, integrated
// exactly for d = 1 and by midpoint quadrature otherwise.
enum class WeightKind { ConstantOne, Rectangle };

struct WeightSpec {
  WeightKind kind = WeightKind::ConstantOne;
  std::vector<double> lower;
  std::vector<double> upper;
  int resolution = 128;  // quadrature points per dimension (d >= 2)
};

// Indicator counts at a single threshold x, taken over m paired samples:
// n_y = #{Y <= x}, n_h = #{H <= x}, n_yh = #{Y <= x and H <= x}.
struct IndicatorStats {
  long m = 0;
  long n_y = 0;
  long n_h = 0;
  long n_yh = 0;

  double f_y() const { return static_cast<double>(n_y) / static_cast<double>(m); }
  double f_h() const { return static_cast<double>(n_h) / static_cast<double>(m); }
  double f_yh() const { return static_cast<double>(n_yh) / static_cast<double>(m); }
};

IndicatorStats indicator_stats(const Eigen::MatrixXd& y, const Eigen::MatrixXd& h,
                               const Eigen::VectorXd& x);

// Control-variate coefficient from the joint indicator fractions; zero
// when the slice indicator is degenerate (f_h in {0, 1}).
double alpha_hat(double f_y, double f_h, double f_yh);

// Pointwise exploration/exploitation error fields from exact counts.
// k1 is the mean squared residual of regressing 1{Y<=x} on (1, 1{H<=x});
// k2 is the complementary part, k1 + k2 = f_y (1 - f_y).
struct KPoint {
  double k1 = 0.0;
  double k2 = 0.0;
};

KPoint k_point(const IndicatorStats& s);

// Count tensors over a grid for the paired exploration sample.
struct PairedCounts {
  long m = 0;
  Tensor c_y;    // #{Y <= z}
  Tensor c_h;    // #{H <= z}
  Tensor c_yh;   // #{Y <= z and H <= z}
};

PairedCounts paired_counts(const Eigen::MatrixXd& y, const Eigen::MatrixXd& h,
                           const EvalGrid& grid);

// Weighted integrals k1_hat = int w k1 and k2_hat = c_S int w k2.
struct KHat {
  double k1_hat = 0.0;
  double k2_hat = 0.0;
};

KHat k_hats(const Eigen::MatrixXd& y, const Eigen::MatrixXd& h, double c_subset,
            const WeightSpec& weight);

// Expected loss of exploring with z samples out of budget B:
// L(z) = k1_hat / z + k2_hat / (B - c_epr z).
struct LossProfile {
  double k1_hat = 0.0;
  double k2_hat = 0.0;
  double budget = 0.0;
  double c_epr = 0.0;
  double c_subset = 0.0;

  double loss(double z) const;
  // Largest exploration count that still leaves room for one
  // exploitation sample.
  double max_feasible() const;
};

// Closed-form minimizer of the loss, clamped to [m_min, max_feasible].
struct MStar {
  double unclamped = 0.0;
  long m_star = 0;
  bool degenerate = false;  // k1_hat = k2_hat = 0
};

MStar optimal_exploration(const LossProfile& profile, long m_min);

double scaled_loss_gamma(double k1_hat, double k2_hat, double c_epr);

// c_epr (k1 + k2 / c_S) / gamma; always >= 1/4.
double relative_efficiency(double k1_hat, double k2_hat, double c_epr,
                           double c_subset);

enum class AlphaMode { Plain, TailExtended };

// Tail value of alpha for a probe x outside the empirical support of the
// surrogate sample (scalar outputs only), anchored at the tau or 1-tau
// surrogate quantile. Errors when x lies inside the support.
double alpha_tail_extension(const Eigen::MatrixXd& y, const Eigen::MatrixXd& h,
                            double x, double tau);

// Control-variate corrected CDF estimate on a grid:
// F(x) = f_y(x) - alpha(x) (f_h_epr(x) - f_h_ept(x)).
// Values are left unclipped; callers clip or sort as a separate step.
// TailExtended (d = 1 only) replaces the zero alpha outside the support
// of the exploration surrogate sample by constants anchored at the tau
// and 1-tau surrogate quantiles.
CdfEstimate exploitation_cdf(const Eigen::MatrixXd& y_epr,
                             const Eigen::MatrixXd& h_epr,
                             const Eigen::MatrixXd& h_ept,
                             const EvalGrid& grid,
                             AlphaMode mode = AlphaMode::Plain,
                             double tau = 0.05);

// One exploration-phase assessment of a model subset.
struct SubsetEvaluation {
  std::vector<int> subset;
  SurrogateCoefficients coeffs;
  double c_subset = 0.0;
  double k1_hat = 0.0;
  double k2_hat = 0.0;
  double gamma = 0.0;
  MStar m_star;
  double loss_at_selection = 0.0;  // L(max(m, m_star))
  bool feasible = true;            // a valid exploitation allocation exists
};

SubsetEvaluation evaluate_subset(const JointBatch& batch,
                                 const std::vector<int>& subset,
                                 const EnsembleDescriptor& desc, double budget,
                                 const WeightSpec& weight);

// Oracle diagnostics computed from one large joint sample.
struct OracleSubsetStats {
  std::vector<int> subset;
  double k1_hat = 0.0;
  double k2_hat = 0.0;
  double gamma = 0.0;
  double m_star = 0.0;
  Tensor rho;  // indicator correlation field on OracleStats::rho_grid
};

struct OracleStats {
  // Pearson correlations between components of Y (rows) and the
  // components of each low-fidelity model output (columns, stacked).
  Eigen::MatrixXd correlations;
  EvalGrid rho_grid;
  std::vector<OracleSubsetStats> subsets;
};

OracleStats oracle_stats(const JointBatch& batch, const EnsembleDescriptor& desc,
                         double budget, const WeightSpec& weight);

}  // namespace cvmdl
