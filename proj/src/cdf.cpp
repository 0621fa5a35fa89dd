#include "cvmdl/cdf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace cvmdl {

Tensor Tensor::zeros(const std::vector<int>& shape) {
  Tensor t;
  t.shape = shape;
  std::size_t n = 1;
  for (int s : shape) {
    if (s < 1) throw std::invalid_argument("tensor dimensions must be positive");
    n *= static_cast<std::size_t>(s);
  }
  t.data.assign(n, 0.0);
  return t;
}

std::size_t Tensor::flat_index(const std::vector<int>& idx) const {
  std::size_t flat = 0;
  for (std::size_t i = 0; i < shape.size(); ++i)
    flat = flat * static_cast<std::size_t>(shape[i]) + static_cast<std::size_t>(idx[i]);
  return flat;
}

std::vector<int> EvalGrid::shape() const {
  std::vector<int> s;
  for (const auto& b : breakpoints) s.push_back(static_cast<int>(b.size()));
  return s;
}

std::size_t EvalGrid::size() const {
  std::size_t n = 1;
  for (const auto& b : breakpoints) n *= b.size();
  return n;
}

double CdfEstimate::eval(const Eigen::VectorXd& x) const {
  const int d = grid.dims();
  if (x.size() != d) throw std::invalid_argument("evaluation point dimension mismatch");
  std::vector<int> idx(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    const auto& b = grid.breakpoints[static_cast<std::size_t>(i)];
    // greatest breakpoint <= x_i
    auto it = std::upper_bound(b.begin(), b.end(), x(i));
    if (it == b.begin()) return 0.0;
    idx[static_cast<std::size_t>(i)] = static_cast<int>(it - b.begin()) - 1;
  }
  return values.at(idx);
}

double ecdf_eval(const Eigen::MatrixXd& samples, const Eigen::VectorXd& x) {
  if (samples.rows() == 0) throw std::invalid_argument("empty sample set");
  if (samples.cols() != x.size()) throw std::invalid_argument("dimension mismatch");
  long count = 0;
  for (long r = 0; r < samples.rows(); ++r) {
    bool leq = true;
    for (long c = 0; c < samples.cols(); ++c)
      if (samples(r, c) > x(c)) { leq = false; break; }
    count += leq;
  }
  return static_cast<double>(count) / static_cast<double>(samples.rows());
}

Tensor count_leq_grid(const Eigen::MatrixXd& samples, const EvalGrid& grid) {
  const int d = grid.dims();
  if (samples.cols() != d) throw std::invalid_argument("dimension mismatch");
  Tensor counts = Tensor::zeros(grid.shape());
  const auto& shape = counts.shape;

  std::vector<int> idx(static_cast<std::size_t>(d));
  for (long r = 0; r < samples.rows(); ++r) {
    bool in_range = true;
    for (int i = 0; i < d; ++i) {
      const auto& b = grid.breakpoints[static_cast<std::size_t>(i)];
      // first breakpoint >= coordinate; the sample contributes to every
      // grid point at or beyond it after the prefix sums below
      auto it = std::lower_bound(b.begin(), b.end(), samples(r, i));
      if (it == b.end()) { in_range = false; break; }
      idx[static_cast<std::size_t>(i)] = static_cast<int>(it - b.begin());
    }
    if (in_range) counts.at(idx) += 1.0;
  }

  // inclusive prefix sum along each axis
  std::vector<std::size_t> strides(static_cast<std::size_t>(d), 1);
  for (int i = d - 2; i >= 0; --i)
    strides[static_cast<std::size_t>(i)] =
        strides[static_cast<std::size_t>(i + 1)] * static_cast<std::size_t>(shape[static_cast<std::size_t>(i + 1)]);
  for (int axis = 0; axis < d; ++axis) {
    const std::size_t stride = strides[static_cast<std::size_t>(axis)];
    const auto len = static_cast<std::size_t>(shape[static_cast<std::size_t>(axis)]);
    const std::size_t total = counts.size();
    const std::size_t block = stride * len;
    for (std::size_t base = 0; base < total; base += block)
      for (std::size_t off = 0; off < stride; ++off)
        for (std::size_t k = 1; k < len; ++k)
          counts.data[base + off + k * stride] += counts.data[base + off + (k - 1) * stride];
  }
  return counts;
}

CdfEstimate ecdf_on_grid(const Eigen::MatrixXd& samples, const EvalGrid& grid) {
  if (samples.rows() == 0) throw std::invalid_argument("empty sample set");
  CdfEstimate est;
  est.grid = grid;
  est.values = count_leq_grid(samples, grid);
  const double inv = 1.0 / static_cast<double>(samples.rows());
  for (auto& v : est.values.data) v *= inv;
  return est;
}

namespace {

// Sorts every 1-D fiber along `axis`; returns true if anything moved.
bool sort_axis(Tensor& t, int axis, const std::vector<std::size_t>& strides) {
  const std::size_t stride = strides[static_cast<std::size_t>(axis)];
  const auto len = static_cast<std::size_t>(t.shape[static_cast<std::size_t>(axis)]);
  const std::size_t block = stride * len;
  std::vector<double> fiber(len);
  bool changed = false;
  for (std::size_t base = 0; base < t.size(); base += block)
    for (std::size_t off = 0; off < stride; ++off) {
      for (std::size_t k = 0; k < len; ++k)
        fiber[k] = t.data[base + off + k * stride];
      if (std::is_sorted(fiber.begin(), fiber.end())) continue;
      std::sort(fiber.begin(), fiber.end());
      for (std::size_t k = 0; k < len; ++k)
        t.data[base + off + k * stride] = fiber[k];
      changed = true;
    }
  return changed;
}

}  // namespace

CdfEstimate alternating_sort(CdfEstimate estimate, std::vector<int> axis_order) {
  Tensor& t = estimate.values;
  const int d = t.dims();
  for (double v : t.data)
    if (!std::isfinite(v)) throw std::invalid_argument("tensor entries must be finite");
  if (axis_order.empty()) {
    axis_order.resize(static_cast<std::size_t>(d));
    std::iota(axis_order.begin(), axis_order.end(), 0);
  }
  if (axis_order.size() != static_cast<std::size_t>(d))
    throw std::invalid_argument("axis order must be a permutation of the dimensions");

  std::vector<std::size_t> strides(static_cast<std::size_t>(d), 1);
  for (int i = d - 2; i >= 0; --i)
    strides[static_cast<std::size_t>(i)] =
        strides[static_cast<std::size_t>(i + 1)] * static_cast<std::size_t>(t.shape[static_cast<std::size_t>(i + 1)]);

  const std::size_t max_sweeps = t.size() + 1;
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    bool changed = false;
    for (int axis : axis_order) changed |= sort_axis(t, axis, strides);
    if (!changed) {
      estimate.monotone = true;
      return estimate;
    }
  }
  throw std::runtime_error("alternating sort failed to converge");  // unreachable per theory
}

CdfEstimate clip_unit(CdfEstimate estimate) {
  for (auto& v : estimate.values.data) v = std::clamp(v, 0.0, 1.0);
  return estimate;
}

Cdf1D ecdf1d(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("empty sample set");
  std::sort(values.begin(), values.end());
  const auto m = static_cast<double>(values.size());
  Cdf1D cdf;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!cdf.xs.empty() && values[i] == cdf.xs.back())
      cdf.ps.back() = static_cast<double>(i + 1) / m;
    else {
      cdf.xs.push_back(values[i]);
      cdf.ps.push_back(static_cast<double>(i + 1) / m);
    }
  }
  return cdf;
}

Cdf1D make_cdf1d(const CdfEstimate& estimate) {
  if (estimate.grid.dims() != 1)
    throw std::invalid_argument("1-D CDF view requires a 1-D estimate");
  Cdf1D cdf;
  cdf.xs = estimate.grid.breakpoints[0];
  cdf.ps = estimate.values.data;
  return cdf;
}

double quantile(const Cdf1D& cdf, double p) {
  if (!(p > 0.0) || !(p < 1.0)) throw std::invalid_argument("p must lie in (0,1)");
  if (cdf.xs.empty()) throw std::invalid_argument("empty cdf");
  auto it = std::lower_bound(cdf.ps.begin(), cdf.ps.end(), p);
  if (it == cdf.ps.end()) throw std::invalid_argument("p outside the achieved range of the cdf");
  const auto j = static_cast<std::size_t>(it - cdf.ps.begin());
  if (j == 0) return cdf.xs[0];
  const double p_lo = cdf.ps[j - 1], p_hi = cdf.ps[j];
  if (p_hi <= p_lo) return cdf.xs[j];
  const double w = (p - p_lo) / (p_hi - p_lo);
  return cdf.xs[j - 1] + w * (cdf.xs[j] - cdf.xs[j - 1]);
}

EvalGrid build_grid_from_samples(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("empty sample set");
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  EvalGrid grid;
  grid.breakpoints.push_back(std::move(values));
  return grid;
}

EvalGrid build_grid_uniform(const std::vector<double>& lower,
                            const std::vector<double>& upper,
                            const std::vector<int>& resolution) {
  if (lower.size() != upper.size() || lower.size() != resolution.size() || lower.empty())
    throw std::invalid_argument("grid specification dimension mismatch");
  EvalGrid grid;
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (resolution[i] < 2) throw std::invalid_argument("grid resolution must be >= 2");
    if (!(lower[i] < upper[i])) throw std::invalid_argument("empty grid domain");
    std::vector<double> b(static_cast<std::size_t>(resolution[i]));
    const double step = (upper[i] - lower[i]) / (resolution[i] - 1);
    for (int j = 0; j < resolution[i]; ++j) b[static_cast<std::size_t>(j)] = lower[i] + j * step;
    b.back() = upper[i];
    grid.breakpoints.push_back(std::move(b));
  }
  return grid;
}

}  // namespace cvmdl
