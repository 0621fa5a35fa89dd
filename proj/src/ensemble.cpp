#include "cvmdl/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace cvmdl {

double EnsembleDescriptor::subset_cost(const std::vector<int>& subset) const {
  double c = 0.0;
  for (int i : subset) c += costs.at(static_cast<std::size_t>(i));
  return c;
}

int EnsembleDescriptor::subset_dim(const std::vector<int>& subset) const {
  int d = 0;
  for (int i : subset) d += dims.at(static_cast<std::size_t>(i));
  return d;
}

int EnsembleDescriptor::min_exploration() const {
  int d = 0;
  for (int i = 1; i <= n_lowfid; ++i) d += dims[static_cast<std::size_t>(i)];
  return d + 2;
}

namespace {

bool nearly_integer(double v) { return std::abs(v - std::round(v)) < 1e-9; }

}  // namespace

EnsembleDescriptor validate(const EnsembleHandle& handle) {
  const auto& specs = handle.specs;
  if (specs.size() < 2)
    throw std::invalid_argument("ensemble needs a high-fidelity model and at least one low-fidelity model");
  EnsembleDescriptor desc;
  desc.n_lowfid = static_cast<int>(specs.size()) - 1;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (specs[i].id != static_cast<int>(i))
      throw std::invalid_argument("model ids must be contiguous 0..n");
    if (specs[i].dim < 1) throw std::invalid_argument("model dim must be >= 1");
    if (!(specs[i].cost > 0.0)) throw std::invalid_argument("model cost must be positive");
    desc.dims.push_back(specs[i].dim);
    desc.costs.push_back(specs[i].cost);
    desc.c_epr += specs[i].cost;
  }
  desc.dim_high = desc.dims[0];
  if (!std::isfinite(desc.c_epr)) throw std::invalid_argument("total cost must be finite");

  switch (handle.kind) {
    case EnsembleKind::GbmExtrema: {
      if (!handle.gbm) throw std::invalid_argument("gbm-extrema ensemble requires gbm parameters");
      const auto& p = *handle.gbm;
      if (!(p.s0 > 0.0) || !(p.horizon > 0.0) || p.sigma < 0.0)
        throw std::invalid_argument("invalid gbm parameters");
      if (p.dt_levels.size() != specs.size())
        throw std::invalid_argument("gbm needs one dt level per model");
      const double dt_min = p.dt_levels.front();
      for (std::size_t i = 0; i < p.dt_levels.size(); ++i) {
        const double dt = p.dt_levels[i];
        if (!(dt > 0.0) || !nearly_integer(p.horizon / dt))
          throw std::invalid_argument("every dt must divide the horizon");
        if (!nearly_integer(dt / dt_min))
          throw std::invalid_argument("coarse dt must be an integer multiple of the finest dt");
        if (i > 0 && dt < p.dt_levels[i - 1])
          throw std::invalid_argument("dt levels must be finest first");
        if (desc.dims[i] != 2)
          throw std::invalid_argument("gbm extrema models are 2-dimensional (min, max)");
      }
      break;
    }
    case EnsembleKind::LinearGaussian: {
      if (!handle.linear_gaussian)
        throw std::invalid_argument("linear-gaussian ensemble requires parameters");
      const auto& p = *handle.linear_gaussian;
      const auto n = static_cast<std::size_t>(desc.n_lowfid);
      if (p.coefs.size() != n || p.noise_stds.size() != n)
        throw std::invalid_argument("linear-gaussian needs one coef and noise std per low-fidelity model");
      if (!(p.stddev > 0.0)) throw std::invalid_argument("linear-gaussian stddev must be positive");
      for (int d : desc.dims)
        if (d != 1) throw std::invalid_argument("linear-gaussian models are scalar");
      break;
    }
    case EnsembleKind::Pool: {
      if (!handle.pool) throw std::invalid_argument("pool ensemble requires a table");
      const int total_dim = std::accumulate(desc.dims.begin(), desc.dims.end(), 0);
      if (handle.pool->table.cols() != total_dim)
        throw std::invalid_argument("pool table column count does not match model dimensions");
      if (handle.pool->table.rows() < desc.min_exploration())
        throw std::invalid_argument("pool table has fewer rows than the minimum exploration size");
      break;
    }
  }
  return desc;
}

std::vector<std::vector<int>> enumerate_subsets(int n_lowfid) {
  if (n_lowfid < 1 || n_lowfid > 12)
    throw std::invalid_argument("subset enumeration supports 1..12 low-fidelity models");
  std::vector<std::vector<int>> out;
  for (unsigned mask = 1; mask < (1u << n_lowfid); ++mask) {
    std::vector<int> s;
    for (int i = 0; i < n_lowfid; ++i)
      if (mask & (1u << i)) s.push_back(i + 1);
    out.push_back(std::move(s));
  }
  std::sort(out.begin(), out.end());
  return out;
}

void JointBatch::append(const JointBatch& other) {
  if (other.count == 0) {
    charged_cost += other.charged_cost;
    return;
  }
  if (count == 0) {
    *this = other;
    return;
  }
  if (x.size() != other.x.size() || y.cols() != other.y.cols())
    throw std::invalid_argument("cannot append batches from different ensembles");
  auto stack = [](Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out(a.rows() + b.rows(), a.cols());
    out << a, b;
    a = std::move(out);
  };
  stack(y, other.y);
  for (std::size_t i = 0; i < x.size(); ++i) stack(x[i], other.x[i]);
  count += other.count;
  charged_cost += other.charged_cost;
}

std::pair<double, double> gbm_extrema_path(
    const GbmParams& params, double dt,
    const std::vector<double>& fine_increments) {
  const double dt_min = params.dt_levels.front();
  const auto factor = static_cast<std::size_t>(std::llround(dt / dt_min));
  const auto n_fine = static_cast<std::size_t>(std::llround(params.horizon / dt_min));
  if (fine_increments.size() != n_fine)
    throw std::invalid_argument("fine increment vector does not cover the horizon");
  if (factor == 0 || n_fine % factor != 0)
    throw std::invalid_argument("dt is not a valid level for these increments");

  double s = params.s0;
  double lo = s, hi = s;
  for (std::size_t k = 0; k < n_fine; k += factor) {
    double dw = 0.0;
    for (std::size_t j = k; j < k + factor; ++j) dw += fine_increments[j];
    s += params.mu * s * dt + params.sigma * s * dw;
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  return {lo, hi};
}

Sampler::Sampler(EnsembleHandle handle)
    : handle_(std::move(handle)), desc_(validate(handle_)) {
  if (handle_.kind == EnsembleKind::Pool && !handle_.pool->replacement) {
    pool_order_.resize(static_cast<std::size_t>(handle_.pool->table.rows()));
    std::iota(pool_order_.begin(), pool_order_.end(), 0);
    auto eng = rng::Stream{handle_.base_seed}.child(0x706f6f6cULL).engine();
    std::shuffle(pool_order_.begin(), pool_order_.end(), eng);
  }
}

int Sampler::pool_rows_remaining() const {
  if (handle_.kind != EnsembleKind::Pool || handle_.pool->replacement) return -1;
  return static_cast<int>(pool_order_.size() - pool_cursor_);
}

std::vector<int> Sampler::take_pool_rows(int count, rng::Stream stream) {
  const auto& pool = *handle_.pool;
  std::vector<int> rows(static_cast<std::size_t>(count));
  if (pool.replacement) {
    auto eng = stream.engine();
    std::uniform_int_distribution<int> pick(0, static_cast<int>(pool.table.rows()) - 1);
    for (auto& r : rows) r = pick(eng);
  } else {
    if (pool_cursor_ + static_cast<std::size_t>(count) > pool_order_.size())
      throw std::runtime_error("pool exhausted: not enough rows left to sample without replacement");
    std::copy_n(pool_order_.begin() + static_cast<std::ptrdiff_t>(pool_cursor_),
                count, rows.begin());
    pool_cursor_ += static_cast<std::size_t>(count);
  }
  return rows;
}

JointBatch Sampler::sample_joint(int count, rng::Stream stream) {
  if (count < 0) throw std::invalid_argument("count must be nonnegative");
  JointBatch batch;
  batch.count = count;
  batch.charged_cost = count * desc_.c_epr;
  batch.y.resize(count, desc_.dims[0]);
  batch.x.resize(static_cast<std::size_t>(desc_.n_lowfid));
  for (int i = 1; i <= desc_.n_lowfid; ++i)
    batch.x[static_cast<std::size_t>(i - 1)].resize(count, desc_.dims[static_cast<std::size_t>(i)]);
  if (count == 0) return batch;

  switch (handle_.kind) {
    case EnsembleKind::GbmExtrema: {
      const auto& p = *handle_.gbm;
      const auto n_fine = static_cast<std::size_t>(std::llround(p.horizon / p.dt_levels.front()));
      const double sqrt_dt = std::sqrt(p.dt_levels.front());
      std::vector<double> dw(n_fine);
      for (int row = 0; row < count; ++row) {
        auto eng = stream.child(static_cast<std::uint64_t>(row)).engine();
        std::normal_distribution<double> nd(0.0, sqrt_dt);
        for (auto& v : dw) v = nd(eng);
        for (std::size_t lvl = 0; lvl < p.dt_levels.size(); ++lvl) {
          auto [lo, hi] = gbm_extrema_path(p, p.dt_levels[lvl], dw);
          if (lvl == 0) {
            batch.y(row, 0) = lo;
            batch.y(row, 1) = hi;
          } else {
            batch.x[lvl - 1](row, 0) = lo;
            batch.x[lvl - 1](row, 1) = hi;
          }
        }
      }
      break;
    }
    case EnsembleKind::LinearGaussian: {
      const auto& p = *handle_.linear_gaussian;
      auto eng = stream.engine();
      std::normal_distribution<double> nd;
      for (int row = 0; row < count; ++row) {
        const double yv = p.mean + p.stddev * nd(eng);
        batch.y(row, 0) = yv;
        for (int i = 0; i < desc_.n_lowfid; ++i) {
          const auto ui = static_cast<std::size_t>(i);
          batch.x[ui](row, 0) = p.coefs[ui] * yv + p.noise_stds[ui] * nd(eng);
        }
      }
      break;
    }
    case EnsembleKind::Pool: {
      const auto rows = take_pool_rows(count, stream);
      const auto& table = handle_.pool->table;
      for (int row = 0; row < count; ++row) {
        int col = 0;
        const int src = rows[static_cast<std::size_t>(row)];
        batch.y.row(row) = table.block(src, col, 1, desc_.dims[0]);
        col += desc_.dims[0];
        for (int i = 1; i <= desc_.n_lowfid; ++i) {
          batch.x[static_cast<std::size_t>(i - 1)].row(row) =
              table.block(src, col, 1, desc_.dims[static_cast<std::size_t>(i)]);
          col += desc_.dims[static_cast<std::size_t>(i)];
        }
      }
      break;
    }
  }
  return batch;
}

SubsetBatch Sampler::sample_subset(const std::vector<int>& subset, int count,
                                   rng::Stream stream) {
  if (subset.empty()) throw std::invalid_argument("subset must be nonempty");
  for (int i : subset)
    if (i < 1 || i > desc_.n_lowfid) throw std::invalid_argument("subset index out of range");
  if (count < 0) throw std::invalid_argument("count must be nonnegative");

  SubsetBatch batch;
  batch.subset = subset;
  batch.count = count;
  batch.charged_cost = count * desc_.subset_cost(subset);
  batch.x.resize(count, desc_.subset_dim(subset));
  if (count == 0) return batch;

  switch (handle_.kind) {
    case EnsembleKind::GbmExtrema: {
      const auto& p = *handle_.gbm;
      // Only the subset models are exercised; drive them from a Brownian
      // path at the finest dt among the subset so draws stay coupled.
      double dt_fine = p.dt_levels[static_cast<std::size_t>(subset.front())];
      for (int i : subset)
        dt_fine = std::min(dt_fine, p.dt_levels[static_cast<std::size_t>(i)]);
      GbmParams sub = p;
      sub.dt_levels.assign(1, dt_fine);
      const auto n_fine = static_cast<std::size_t>(std::llround(p.horizon / dt_fine));
      const double sqrt_dt = std::sqrt(dt_fine);
      std::vector<double> dw(n_fine);
      for (int row = 0; row < count; ++row) {
        auto eng = stream.child(static_cast<std::uint64_t>(row)).engine();
        std::normal_distribution<double> nd(0.0, sqrt_dt);
        for (auto& v : dw) v = nd(eng);
        int col = 0;
        for (int i : subset) {
          auto [lo, hi] = gbm_extrema_path(sub, p.dt_levels[static_cast<std::size_t>(i)], dw);
          batch.x(row, col) = lo;
          batch.x(row, col + 1) = hi;
          col += 2;
        }
      }
      break;
    }
    case EnsembleKind::LinearGaussian: {
      const auto& p = *handle_.linear_gaussian;
      auto eng = stream.engine();
      std::normal_distribution<double> nd;
      for (int row = 0; row < count; ++row) {
        const double yv = p.mean + p.stddev * nd(eng);  // latent, not charged
        int col = 0;
        for (int i : subset) {
          const auto ui = static_cast<std::size_t>(i - 1);
          batch.x(row, col++) = p.coefs[ui] * yv + p.noise_stds[ui] * nd(eng);
        }
      }
      break;
    }
    case EnsembleKind::Pool: {
      const auto rows = take_pool_rows(count, stream);
      const auto& table = handle_.pool->table;
      std::vector<int> offsets(static_cast<std::size_t>(desc_.n_lowfid) + 1);
      offsets[0] = desc_.dims[0];
      for (int i = 1; i <= desc_.n_lowfid; ++i)
        offsets[static_cast<std::size_t>(i)] =
            offsets[static_cast<std::size_t>(i - 1)] +
            (i < static_cast<int>(desc_.dims.size())
                 ? desc_.dims[static_cast<std::size_t>(i)] : 0);
      for (int row = 0; row < count; ++row) {
        int col = 0;
        const int src = rows[static_cast<std::size_t>(row)];
        for (int i : subset) {
          const int di = desc_.dims[static_cast<std::size_t>(i)];
          batch.x.block(row, col, 1, di) =
              table.block(src, offsets[static_cast<std::size_t>(i - 1)], 1, di);
          col += di;
        }
      }
      break;
    }
  }
  return batch;
}

Eigen::MatrixXd Sampler::sample_highfid(int count, rng::Stream stream,
                                        double* charged_cost) {
  if (count < 0) throw std::invalid_argument("count must be nonnegative");
  if (charged_cost) *charged_cost = count * desc_.costs[0];
  Eigen::MatrixXd out(count, desc_.dims[0]);
  if (count == 0) return out;

  switch (handle_.kind) {
    case EnsembleKind::GbmExtrema: {
      const auto& p = *handle_.gbm;
      const auto n_fine = static_cast<std::size_t>(std::llround(p.horizon / p.dt_levels.front()));
      const double sqrt_dt = std::sqrt(p.dt_levels.front());
      std::vector<double> dw(n_fine);
      for (int row = 0; row < count; ++row) {
        auto eng = stream.child(static_cast<std::uint64_t>(row)).engine();
        std::normal_distribution<double> nd(0.0, sqrt_dt);
        for (auto& v : dw) v = nd(eng);
        auto [lo, hi] = gbm_extrema_path(p, p.dt_levels.front(), dw);
        out(row, 0) = lo;
        out(row, 1) = hi;
      }
      break;
    }
    case EnsembleKind::LinearGaussian: {
      const auto& p = *handle_.linear_gaussian;
      auto eng = stream.engine();
      std::normal_distribution<double> nd;
      for (int row = 0; row < count; ++row) out(row, 0) = p.mean + p.stddev * nd(eng);
      break;
    }
    case EnsembleKind::Pool: {
      const auto rows = take_pool_rows(count, stream);
      for (int row = 0; row < count; ++row)
        out.row(row) = handle_.pool->table.block(rows[static_cast<std::size_t>(row)], 0, 1, desc_.dims[0]);
      break;
    }
  }
  return out;
}

}  // namespace cvmdl
