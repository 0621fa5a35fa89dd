#pragma once

#include <map>
#include <vector>

#include "cvmdl/cdf.hpp"
#include "cvmdl/cv_estimator.hpp"

namespace cvmdl {

// Integrated squared difference int w(x) (F_a(x) - F_b(x))^2 dx. Exact
// piecewise integration for d = 1; shared midpoint quadrature otherwise.
// With a constant weight the integral is truncated to the union of the
// two grids' ranges.
double weighted_l2_error(const CdfEstimate& a, const CdfEstimate& b,
                         const WeightSpec& weight);

// Max absolute difference over the evaluation points of `grid`.
double sup_error_on_grid(const CdfEstimate& a, const CdfEstimate& b,
                         const EvalGrid& grid);

// Upper-tail conditional expectation (1/(1-a)) int_a^1 Finv(p) dp.
// interpolate = true uses the linearly interpolated inverse; false treats
// the CDF as a discrete atom distribution. Probability mass above the
// last recorded level is assigned to the largest breakpoint.
double cvar(const Cdf1D& cdf, double a, bool interpolate = true);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

MeanStd mean_std_from_cdf(const Cdf1D& cdf, bool interpolate = true);

struct RiskReport {
  double mean = 0.0;
  double std = 0.0;
  std::map<double, double> cvar;       // level a -> value
  std::map<double, double> quantiles;  // p -> value
};

RiskReport risk_report(const Cdf1D& cdf, const std::vector<double>& cvar_levels,
                       const std::vector<double>& quantile_ps);

}  // namespace cvmdl
