#include "cvmdl/cv_estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cvmdl {

namespace {

bool row_leq(const Eigen::MatrixXd& a, long r, const Eigen::VectorXd& x) {
  for (long c = 0; c < a.cols(); ++c)
    if (a(r, c) > x(c)) return false;
  return true;
}

}  // namespace

IndicatorStats indicator_stats(const Eigen::MatrixXd& y, const Eigen::MatrixXd& h,
                               const Eigen::VectorXd& x) {
  if (y.rows() != h.rows() || y.cols() != h.cols())
    throw std::invalid_argument("paired samples must have matching shapes");
  if (y.rows() == 0) throw std::invalid_argument("empty sample set");
  if (y.cols() != x.size()) throw std::invalid_argument("threshold dimension mismatch");
  IndicatorStats s;
  s.m = y.rows();
  for (long r = 0; r < y.rows(); ++r) {
    const bool uy = row_leq(y, r, x);
    const bool uh = row_leq(h, r, x);
    s.n_y += uy;
    s.n_h += uh;
    s.n_yh += uy && uh;
  }
  return s;
}

double alpha_hat(double f_y, double f_h, double f_yh) {
  if (!(f_h > 0.0) || !(f_h < 1.0)) return 0.0;
  return (f_yh - f_y * f_h) / (f_h * (1.0 - f_h));
}

KPoint k_point(const IndicatorStats& s) {
  const auto m = static_cast<double>(s.m);
  const double f_y = s.f_y();
  const double var_y = f_y * (1.0 - f_y);
  KPoint k;
  const long n1 = s.n_h;
  const long n0 = s.m - n1;
  if (n0 == 0 || n1 == 0) {
    // degenerate slice indicator: the regression reduces to the mean
    k.k1 = var_y;
    k.k2 = 0.0;
    return k;
  }
  const auto k1c = static_cast<double>(s.n_yh);
  const auto k0c = static_cast<double>(s.n_y - s.n_yh);
  k.k1 = ((k0c - k0c * k0c / static_cast<double>(n0)) +
          (k1c - k1c * k1c / static_cast<double>(n1))) / m;
  k.k2 = var_y - k.k1;
  return k;
}

PairedCounts paired_counts(const Eigen::MatrixXd& y, const Eigen::MatrixXd& h,
                           const EvalGrid& grid) {
  if (y.rows() != h.rows() || y.cols() != h.cols())
    throw std::invalid_argument("paired samples must have matching shapes");
  if (y.rows() == 0) throw std::invalid_argument("empty sample set");
  PairedCounts pc;
  pc.m = y.rows();
  pc.c_y = count_leq_grid(y, grid);
  pc.c_h = count_leq_grid(h, grid);
  pc.c_yh = count_leq_grid(y.cwiseMax(h), grid);
  return pc;
}

namespace {

KPoint k_point_from_counts(long m, double c_y, double c_h, double c_yh) {
  IndicatorStats s;
  s.m = m;
  s.n_y = static_cast<long>(std::llround(c_y));
  s.n_h = static_cast<long>(std::llround(c_h));
  s.n_yh = static_cast<long>(std::llround(c_yh));
  return k_point(s);
}

// Exact piecewise-constant integration for scalar outputs: the K fields
// are constant between consecutive values of the pooled sample and
// vanish outside its range.
KHat k_hats_1d(const Eigen::MatrixXd& y, const Eigen::MatrixXd& h,
               double c_subset, const WeightSpec& weight) {
  std::vector<double> pooled;
  pooled.reserve(static_cast<std::size_t>(2 * y.rows()));
  for (long r = 0; r < y.rows(); ++r) {
    pooled.push_back(y(r, 0));
    pooled.push_back(h(r, 0));
  }
  EvalGrid grid = build_grid_from_samples(std::move(pooled));
  PairedCounts pc = paired_counts(y, h, grid);

  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  if (weight.kind == WeightKind::Rectangle) {
    lo = weight.lower.at(0);
    hi = weight.upper.at(0);
  }

  const auto& b = grid.breakpoints[0];
  KHat out;
  for (std::size_t j = 0; j + 1 < b.size(); ++j) {
    const double seg_lo = std::max(b[j], lo);
    const double seg_hi = std::min(b[j + 1], hi);
    if (seg_hi <= seg_lo) continue;
    const KPoint k = k_point_from_counts(pc.m, pc.c_y.data[j], pc.c_h.data[j],
                                         pc.c_yh.data[j]);
    out.k1_hat += k.k1 * (seg_hi - seg_lo);
    out.k2_hat += k.k2 * (seg_hi - seg_lo);
  }
  out.k2_hat *= c_subset;
  return out;
}

}  // namespace

KHat k_hats(const Eigen::MatrixXd& y, const Eigen::MatrixXd& h, double c_subset,
            const WeightSpec& weight) {
  if (y.rows() != h.rows() || y.cols() != h.cols())
    throw std::invalid_argument("paired samples must have matching shapes");
  if (y.rows() == 0) throw std::invalid_argument("empty sample set");
  const auto d = static_cast<std::size_t>(y.cols());
  if (weight.kind == WeightKind::Rectangle &&
      (weight.lower.size() != d || weight.upper.size() != d))
    throw std::invalid_argument("weight box dimension mismatch");

  if (d == 1) return k_hats_1d(y, h, c_subset, weight);

  // Midpoint quadrature over the weight box (or the sample bounding box
  // when the weight is constant).
  std::vector<double> lo(d), hi(d);
  if (weight.kind == WeightKind::Rectangle) {
    lo = weight.lower;
    hi = weight.upper;
  } else {
    for (std::size_t i = 0; i < d; ++i) {
      lo[i] = std::min(y.col(static_cast<long>(i)).minCoeff(),
                       h.col(static_cast<long>(i)).minCoeff());
      hi[i] = std::max(y.col(static_cast<long>(i)).maxCoeff(),
                       h.col(static_cast<long>(i)).maxCoeff());
    }
  }
  if (weight.resolution < 1) throw std::invalid_argument("quadrature resolution must be positive");

  EvalGrid grid;
  double cell_volume = 1.0;
  for (std::size_t i = 0; i < d; ++i) {
    if (!(lo[i] < hi[i])) throw std::invalid_argument("empty weight box");
    const int res = weight.resolution;
    const double step = (hi[i] - lo[i]) / res;
    cell_volume *= step;
    std::vector<double> mids(static_cast<std::size_t>(res));
    for (int j = 0; j < res; ++j) mids[static_cast<std::size_t>(j)] = lo[i] + (j + 0.5) * step;
    grid.breakpoints.push_back(std::move(mids));
  }

  PairedCounts pc = paired_counts(y, h, grid);
  KHat out;
  for (std::size_t idx = 0; idx < pc.c_y.size(); ++idx) {
    const KPoint k = k_point_from_counts(pc.m, pc.c_y.data[idx], pc.c_h.data[idx],
                                         pc.c_yh.data[idx]);
    out.k1_hat += k.k1;
    out.k2_hat += k.k2;
  }
  out.k1_hat *= cell_volume;
  out.k2_hat *= cell_volume * c_subset;
  return out;
}

double LossProfile::loss(double z) const {
  if (!(z > 0.0) || !(budget - c_epr * z > 0.0))
    return std::numeric_limits<double>::infinity();
  return k1_hat / z + k2_hat / (budget - c_epr * z);
}

double LossProfile::max_feasible() const {
  return (budget - c_subset) / c_epr;
}

MStar optimal_exploration(const LossProfile& profile, long m_min) {
  if (m_min < 1) throw std::invalid_argument("m_min must be positive");
  MStar out;
  const double z_max = std::floor(profile.max_feasible());
  if (profile.k1_hat <= 0.0 && profile.k2_hat <= 0.0) {
    out.degenerate = true;
    out.unclamped = static_cast<double>(m_min);
  } else if (profile.k1_hat <= 0.0) {
    out.unclamped = static_cast<double>(m_min);
  } else if (profile.k2_hat <= 0.0) {
    out.unclamped = profile.budget / profile.c_epr;
  } else {
    out.unclamped = profile.budget /
        (profile.c_epr + std::sqrt(profile.c_epr * profile.k2_hat / profile.k1_hat));
  }
  double m = std::round(out.unclamped);
  m = std::min(m, z_max);
  m = std::max(m, static_cast<double>(m_min));
  out.m_star = static_cast<long>(m);
  return out;
}

double scaled_loss_gamma(double k1_hat, double k2_hat, double c_epr) {
  const double s = std::sqrt(c_epr * k1_hat) + std::sqrt(k2_hat);
  return s * s;
}

double relative_efficiency(double k1_hat, double k2_hat, double c_epr,
                           double c_subset) {
  const double gamma = scaled_loss_gamma(k1_hat, k2_hat, c_epr);
  if (!(gamma > 0.0))
    throw std::invalid_argument("efficiency undefined for vanishing error parameters");
  return c_epr * (k1_hat + k2_hat / c_subset) / gamma;
}

namespace {

struct TailAlphas {
  double lower = 0.0;
  double upper = 0.0;
};

// Constant tail values for alpha anchored at the tau / 1-tau quantiles
// of the exploration surrogate sample (scalar outputs only).
TailAlphas tail_alphas(const Eigen::MatrixXd& y, const Eigen::MatrixXd& h,
                       double tau) {
  const long m = y.rows();
  std::vector<double> hs(static_cast<std::size_t>(m));
  for (long r = 0; r < m; ++r) hs[static_cast<std::size_t>(r)] = h(r, 0);
  std::sort(hs.begin(), hs.end());

  auto quantile_of_h = [&](double p) {
    auto k = static_cast<long>(std::ceil(p * static_cast<double>(m) - 1e-12));
    k = std::clamp(k, 1L, m);
    return hs[static_cast<std::size_t>(k - 1)];
  };
  auto frac_leq = [m](auto&& pred) {
    long c = 0;
    for (long r = 0; r < m; ++r) c += pred(r);
    return static_cast<double>(c) / static_cast<double>(m);
  };

  const double x_lo = quantile_of_h(tau);
  const double x_hi = quantile_of_h(1.0 - tau);
  const double denom = tau * (1.0 - tau);

  TailAlphas out;
  {
    const double f_yh = frac_leq([&](long r) { return std::max(y(r, 0), h(r, 0)) <= x_lo; });
    const double f_y = frac_leq([&](long r) { return y(r, 0) <= x_lo; });
    out.lower = (f_yh - f_y * tau) / denom;
  }
  {
    const double f_yh = frac_leq([&](long r) { return std::max(y(r, 0), h(r, 0)) <= x_hi; });
    const double f_y = frac_leq([&](long r) { return y(r, 0) <= x_hi; });
    out.upper = (f_yh - f_y * (1.0 - tau)) / denom;
  }
  return out;
}

}  // namespace

double alpha_tail_extension(const Eigen::MatrixXd& y, const Eigen::MatrixXd& h,
                            double x, double tau) {
  if (y.cols() != 1 || h.cols() != 1)
    throw std::invalid_argument("tail extension applies to scalar outputs only");
  if (!(tau > 0.0) || !(tau < 0.5))
    throw std::invalid_argument("tau must lie in (0, 0.5)");
  const double h_min = h.col(0).minCoeff();
  const double h_max = h.col(0).maxCoeff();
  const TailAlphas tails = tail_alphas(y, h, tau);
  if (x < h_min) return tails.lower;
  if (x > h_max) return tails.upper;
  throw std::invalid_argument("probe lies inside the surrogate sample support");
}

CdfEstimate exploitation_cdf(const Eigen::MatrixXd& y_epr,
                             const Eigen::MatrixXd& h_epr,
                             const Eigen::MatrixXd& h_ept,
                             const EvalGrid& grid, AlphaMode mode, double tau) {
  if (h_ept.rows() == 0) throw std::invalid_argument("empty exploitation sample");
  if (h_ept.cols() != y_epr.cols())
    throw std::invalid_argument("exploitation sample dimension mismatch");
  if (mode == AlphaMode::TailExtended) {
    if (grid.dims() != 1)
      throw std::invalid_argument("tail extension applies to scalar outputs only");
    if (!(tau > 0.0) || !(tau < 0.5))
      throw std::invalid_argument("tau must lie in (0, 0.5)");
  }

  PairedCounts pc = paired_counts(y_epr, h_epr, grid);
  Tensor c_ept = count_leq_grid(h_ept, grid);
  const auto m = static_cast<double>(pc.m);
  const auto n_ept = static_cast<double>(h_ept.rows());

  TailAlphas tails;
  if (mode == AlphaMode::TailExtended) tails = tail_alphas(y_epr, h_epr, tau);

  CdfEstimate est;
  est.grid = grid;
  est.values = Tensor::zeros(grid.shape());
  for (std::size_t idx = 0; idx < est.values.size(); ++idx) {
    const double f_y = pc.c_y.data[idx] / m;
    const double f_h = pc.c_h.data[idx] / m;
    const double f_yh = pc.c_yh.data[idx] / m;
    const double f_h_ept = c_ept.data[idx] / n_ept;
    double alpha = alpha_hat(f_y, f_h, f_yh);
    if (mode == AlphaMode::TailExtended) {
      if (f_h <= 0.0) alpha = tails.lower;
      else if (f_h >= 1.0) alpha = tails.upper;
    }
    est.values.data[idx] = f_y - alpha * (f_h - f_h_ept);
  }
  return est;
}

SubsetEvaluation evaluate_subset(const JointBatch& batch,
                                 const std::vector<int>& subset,
                                 const EnsembleDescriptor& desc, double budget,
                                 const WeightSpec& weight) {
  SubsetEvaluation ev;
  ev.subset = subset;
  ev.coeffs = fit_surrogate(batch, subset);
  const Eigen::MatrixXd h = surrogate_values(batch, ev.coeffs);

  const double c_s = desc.subset_cost(subset);
  ev.c_subset = c_s;
  const KHat kh = k_hats(batch.y, h, c_s, weight);
  ev.k1_hat = kh.k1_hat;
  ev.k2_hat = kh.k2_hat;
  ev.gamma = scaled_loss_gamma(kh.k1_hat, kh.k2_hat, desc.c_epr);

  LossProfile profile{kh.k1_hat, kh.k2_hat, budget, desc.c_epr, c_s};
  ev.m_star = optimal_exploration(profile, desc.min_exploration());

  const double z_max = std::floor(profile.max_feasible());
  const auto z = static_cast<double>(std::max<long>(batch.count, ev.m_star.m_star));
  if (ev.m_star.degenerate || static_cast<double>(batch.count) > z_max) {
    ev.feasible = false;
    ev.loss_at_selection = std::numeric_limits<double>::infinity();
  } else {
    ev.loss_at_selection = profile.loss(std::min(z, z_max));
  }
  return ev;
}

OracleStats oracle_stats(const JointBatch& batch, const EnsembleDescriptor& desc,
                         double budget, const WeightSpec& weight) {
  OracleStats out;

  int total_lowfid_cols = 0;
  for (std::size_t i = 1; i < desc.dims.size(); ++i) total_lowfid_cols += desc.dims[i];
  out.correlations.resize(batch.y.cols(), total_lowfid_cols);
  auto pearson = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const Eigen::VectorXd ca = a.array() - a.mean();
    const Eigen::VectorXd cb = b.array() - b.mean();
    const double denom = std::sqrt(ca.squaredNorm() * cb.squaredNorm());
    return denom > 0.0 ? ca.dot(cb) / denom : 0.0;
  };
  int col = 0;
  for (const auto& x : batch.x)
    for (long c = 0; c < x.cols(); ++c, ++col)
      for (long j = 0; j < batch.y.cols(); ++j)
        out.correlations(j, col) = pearson(batch.y.col(j), x.col(c));

  // modest uniform grid for the indicator-correlation field
  {
    const long d = batch.y.cols();
    std::vector<double> lo(static_cast<std::size_t>(d)), hi(static_cast<std::size_t>(d));
    if (weight.kind == WeightKind::Rectangle) {
      lo = weight.lower;
      hi = weight.upper;
    } else {
      for (long c = 0; c < d; ++c) {
        lo[static_cast<std::size_t>(c)] = batch.y.col(c).minCoeff();
        hi[static_cast<std::size_t>(c)] = batch.y.col(c).maxCoeff();
      }
    }
    const std::vector<int> res(static_cast<std::size_t>(d), 33);
    out.rho_grid = build_grid_uniform(lo, hi, res);
  }

  for (const auto& subset : enumerate_subsets(desc.n_lowfid)) {
    SurrogateCoefficients coeffs = fit_surrogate(batch, subset);
    const Eigen::MatrixXd h = surrogate_values(batch, coeffs);
    const double c_s = desc.subset_cost(subset);
    const KHat kh = k_hats(batch.y, h, c_s, weight);
    OracleSubsetStats s;
    s.subset = subset;
    s.k1_hat = kh.k1_hat;
    s.k2_hat = kh.k2_hat;
    s.gamma = scaled_loss_gamma(kh.k1_hat, kh.k2_hat, desc.c_epr);
    if (kh.k1_hat > 0.0 && kh.k2_hat > 0.0)
      s.m_star = budget / (desc.c_epr + std::sqrt(desc.c_epr * kh.k2_hat / kh.k1_hat));

    const PairedCounts pc = paired_counts(batch.y, h, out.rho_grid);
    s.rho = Tensor::zeros(out.rho_grid.shape());
    const auto m = static_cast<double>(pc.m);
    for (std::size_t idx = 0; idx < s.rho.size(); ++idx) {
      const double f_y = pc.c_y.data[idx] / m;
      const double f_h = pc.c_h.data[idx] / m;
      const double f_yh = pc.c_yh.data[idx] / m;
      const double denom =
          std::sqrt(f_y * (1.0 - f_y) * f_h * (1.0 - f_h));
      s.rho.data[idx] = denom > 0.0 ? (f_yh - f_y * f_h) / denom : 0.0;
    }
    out.subsets.push_back(std::move(s));
  }
  return out;
}

}  // namespace cvmdl
