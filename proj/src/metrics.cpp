#include "cvmdl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cvmdl {

namespace {

double l2_error_1d(const CdfEstimate& a, const CdfEstimate& b,
                   const WeightSpec& weight) {
  std::vector<double> pts = a.grid.breakpoints[0];
  pts.insert(pts.end(), b.grid.breakpoints[0].begin(), b.grid.breakpoints[0].end());

  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  if (weight.kind == WeightKind::Rectangle) {
    lo = weight.lower.at(0);
    hi = weight.upper.at(0);
    pts.push_back(lo);
    pts.push_back(hi);
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

  Eigen::VectorXd x(1);
  double total = 0.0;
  for (std::size_t j = 0; j + 1 < pts.size(); ++j) {
    const double seg_lo = std::max(pts[j], lo);
    const double seg_hi = std::min(pts[j + 1], hi);
    if (seg_hi <= seg_lo) continue;
    x(0) = pts[j];
    const double diff = a.eval(x) - b.eval(x);
    total += diff * diff * (seg_hi - seg_lo);
  }
  // with a box weight the region past the last grid point can still
  // carry weight; both estimates are constant there
  if (weight.kind == WeightKind::Rectangle && hi > pts.back()) {
    x(0) = pts.back();
    const double diff = a.eval(x) - b.eval(x);
    total += diff * diff * (hi - std::max(lo, pts.back()));
  }
  return total;
}

}  // namespace

double weighted_l2_error(const CdfEstimate& a, const CdfEstimate& b,
                         const WeightSpec& weight) {
  const int d = a.grid.dims();
  if (b.grid.dims() != d) throw std::invalid_argument("estimate dimension mismatch");
  if (weight.kind == WeightKind::Rectangle &&
      (weight.lower.size() != static_cast<std::size_t>(d) ||
       weight.upper.size() != static_cast<std::size_t>(d)))
    throw std::invalid_argument("weight box dimension mismatch");

  if (d == 1) return l2_error_1d(a, b, weight);

  std::vector<double> lo(static_cast<std::size_t>(d)), hi(static_cast<std::size_t>(d));
  if (weight.kind == WeightKind::Rectangle) {
    lo = weight.lower;
    hi = weight.upper;
  } else {
    for (int i = 0; i < d; ++i) {
      const auto& ba = a.grid.breakpoints[static_cast<std::size_t>(i)];
      const auto& bb = b.grid.breakpoints[static_cast<std::size_t>(i)];
      lo[static_cast<std::size_t>(i)] = std::min(ba.front(), bb.front());
      hi[static_cast<std::size_t>(i)] = std::max(ba.back(), bb.back());
    }
  }
  if (weight.resolution < 1) throw std::invalid_argument("quadrature resolution must be positive");

  double cell_volume = 1.0;
  std::vector<std::vector<double>> mids(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    const double step = (hi[static_cast<std::size_t>(i)] - lo[static_cast<std::size_t>(i)]) /
                        weight.resolution;
    if (!(step > 0.0)) throw std::invalid_argument("empty weight box");
    cell_volume *= step;
    for (int j = 0; j < weight.resolution; ++j)
      mids[static_cast<std::size_t>(i)].push_back(lo[static_cast<std::size_t>(i)] +
                                                  (j + 0.5) * step);
  }

  double total = 0.0;
  std::vector<std::size_t> idx(static_cast<std::size_t>(d), 0);
  Eigen::VectorXd x(d);
  while (true) {
    for (int i = 0; i < d; ++i) x(i) = mids[static_cast<std::size_t>(i)][idx[static_cast<std::size_t>(i)]];
    const double diff = a.eval(x) - b.eval(x);
    total += diff * diff;
    int i = d - 1;
    for (; i >= 0; --i) {
      if (++idx[static_cast<std::size_t>(i)] < mids[static_cast<std::size_t>(i)].size()) break;
      idx[static_cast<std::size_t>(i)] = 0;
    }
    if (i < 0) break;
  }
  return total * cell_volume;
}

double sup_error_on_grid(const CdfEstimate& a, const CdfEstimate& b,
                         const EvalGrid& grid) {
  const int d = grid.dims();
  if (a.grid.dims() != d || b.grid.dims() != d)
    throw std::invalid_argument("estimate dimension mismatch");
  double worst = 0.0;
  std::vector<std::size_t> idx(static_cast<std::size_t>(d), 0);
  Eigen::VectorXd x(d);
  while (true) {
    for (int i = 0; i < d; ++i)
      x(i) = grid.breakpoints[static_cast<std::size_t>(i)][idx[static_cast<std::size_t>(i)]];
    worst = std::max(worst, std::abs(a.eval(x) - b.eval(x)));
    int i = d - 1;
    for (; i >= 0; --i) {
      if (++idx[static_cast<std::size_t>(i)] <
          grid.breakpoints[static_cast<std::size_t>(i)].size())
        break;
      idx[static_cast<std::size_t>(i)] = 0;
    }
    if (i < 0) break;
  }
  return worst;
}

namespace {

// Integrates the (interpolated or step) inverse CDF over [a, 1].
double integrate_inverse(const Cdf1D& cdf, double a, bool interpolate) {
  const auto& xs = cdf.xs;
  const auto& ps = cdf.ps;
  if (xs.empty() || xs.size() != ps.size()) throw std::invalid_argument("malformed cdf");

  double total = 0.0;
  // constant piece below the first level (interpolated inverse) or the
  // first atom (step inverse): both equal xs[0] on (0, ps[0]]
  {
    const double seg_hi = std::min(ps[0], 1.0);
    if (seg_hi > a) total += xs[0] * (seg_hi - a);
  }
  for (std::size_t j = 1; j < xs.size(); ++j) {
    const double p_lo = ps[j - 1], p_hi = ps[j];
    const double seg_lo = std::max(p_lo, a);
    const double seg_hi = std::min(p_hi, 1.0);
    if (seg_hi <= seg_lo) continue;
    if (!interpolate || p_hi <= p_lo) {
      total += xs[j] * (seg_hi - seg_lo);
      continue;
    }
    // linear from xs[j-1] at p_lo to xs[j] at p_hi
    const double slope = (xs[j] - xs[j - 1]) / (p_hi - p_lo);
    const double q_lo = xs[j - 1] + slope * (seg_lo - p_lo);
    const double q_hi = xs[j - 1] + slope * (seg_hi - p_lo);
    total += 0.5 * (q_lo + q_hi) * (seg_hi - seg_lo);
  }
  // mass above the last recorded level sits at the largest breakpoint
  if (ps.back() < 1.0) {
    const double seg_lo = std::max(ps.back(), a);
    if (1.0 > seg_lo) total += xs.back() * (1.0 - seg_lo);
  }
  return total;
}

double integrate_inverse_sq(const Cdf1D& cdf, bool interpolate) {
  const auto& xs = cdf.xs;
  const auto& ps = cdf.ps;
  double total = xs[0] * xs[0] * std::min(ps[0], 1.0);
  for (std::size_t j = 1; j < xs.size(); ++j) {
    const double len = std::min(ps[j], 1.0) - ps[j - 1];
    if (len <= 0.0) continue;
    if (!interpolate) {
      total += xs[j] * xs[j] * len;
    } else {
      const double x0 = xs[j - 1], x1 = xs[j];
      total += (x0 * x0 + x0 * x1 + x1 * x1) / 3.0 * len;
    }
  }
  if (ps.back() < 1.0) total += xs.back() * xs.back() * (1.0 - ps.back());
  return total;
}

}  // namespace

double cvar(const Cdf1D& cdf, double a, bool interpolate) {
  if (!(a > 0.0) || !(a < 1.0)) throw std::invalid_argument("a must lie in (0,1)");
  return integrate_inverse(cdf, a, interpolate) / (1.0 - a);
}

MeanStd mean_std_from_cdf(const Cdf1D& cdf, bool interpolate) {
  if (cdf.xs.empty()) throw std::invalid_argument("empty cdf");
  MeanStd out;
  out.mean = integrate_inverse(cdf, 0.0, interpolate);
  const double second = integrate_inverse_sq(cdf, interpolate);
  out.std = std::sqrt(std::max(0.0, second - out.mean * out.mean));
  return out;
}

RiskReport risk_report(const Cdf1D& cdf, const std::vector<double>& cvar_levels,
                       const std::vector<double>& quantile_ps) {
  RiskReport report;
  const MeanStd ms = mean_std_from_cdf(cdf);
  report.mean = ms.mean;
  report.std = ms.std;
  for (double a : cvar_levels) report.cvar[a] = cvar(cdf, a);
  for (double p : quantile_ps) report.quantiles[p] = quantile(cdf, p);
  return report;
}

}  // namespace cvmdl
