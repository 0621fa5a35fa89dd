#include "cvmdl/driver.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cvmdl/surrogate.hpp"

namespace cvmdl {

long q_growth(long m, double m_star_hat) {
  if (m < 1) throw std::invalid_argument("m must be positive");
  if (static_cast<double>(m) >= m_star_hat) return m;
  if (static_cast<double>(m) < m_star_hat / 2.0) return 2 * m;
  return static_cast<long>(std::ceil((static_cast<double>(m) + m_star_hat) / 2.0));
}

std::size_t select_subset(const std::vector<SubsetEvaluation>& table, long m) {
  if (table.empty()) throw std::invalid_argument("empty subset table");
  bool any_feasible = false;
  bool any_resolved = false;
  for (const auto& ev : table) {
    any_feasible |= ev.feasible;
    any_resolved |= ev.feasible && ev.k1_hat > 0.0;
  }
  if (!any_feasible)
    throw BudgetInfeasible("no model subset admits a feasible exploitation allocation");

  // A vanishing k1 estimate means the exploration sample could not resolve
  // the surrogate's error at all (common when the fit interpolates a small
  // sample); its loss estimate is vacuous, so such entries only compete
  // when every feasible entry is in the same state.
  std::size_t best = table.size();
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (!table[i].feasible) continue;
    if (any_resolved && !(table[i].k1_hat > 0.0)) continue;
    if (best == table.size()) { best = i; continue; }
    const double li = table[i].loss_at_selection;
    const double lb = table[best].loss_at_selection;
    if (li < lb || (li == lb && table[i].c_subset < table[best].c_subset)) best = i;
    // equal loss and cost: the earlier entry wins (tables are built in
    // lexicographic subset order)
  }
  (void)m;
  return best;
}

void BudgetLedger::charge_exploration(double amount) {
  if (spent() + amount > total * (1.0 + 1e-12))
    throw std::runtime_error("budget overspent during exploration");
  exploration_spent += amount;
}

void BudgetLedger::charge_exploitation(double amount) {
  if (spent() + amount > total * (1.0 + 1e-12))
    throw std::runtime_error("budget overspent during exploitation");
  exploitation_spent += amount;
}

namespace {

EvalGrid default_grid(const CvmdlOptions& options, const Eigen::MatrixXd& y_epr,
                      const Eigen::MatrixXd& h_epr, const Eigen::MatrixXd& h_ept) {
  const long d = y_epr.cols();
  if (d == 1) {
    std::vector<double> pooled;
    pooled.reserve(static_cast<std::size_t>(2 * y_epr.rows() + h_ept.rows()));
    for (long r = 0; r < y_epr.rows(); ++r) {
      pooled.push_back(y_epr(r, 0));
      pooled.push_back(h_epr(r, 0));
    }
    for (long r = 0; r < h_ept.rows(); ++r) pooled.push_back(h_ept(r, 0));
    return build_grid_from_samples(std::move(pooled));
  }
  std::vector<double> lo(static_cast<std::size_t>(d)), hi(static_cast<std::size_t>(d));
  if (options.weight.kind == WeightKind::Rectangle) {
    lo = options.weight.lower;
    hi = options.weight.upper;
  } else {
    for (long c = 0; c < d; ++c) {
      lo[static_cast<std::size_t>(c)] = std::min(
          {y_epr.col(c).minCoeff(), h_epr.col(c).minCoeff(), h_ept.col(c).minCoeff()});
      hi[static_cast<std::size_t>(c)] = std::max(
          {y_epr.col(c).maxCoeff(), h_epr.col(c).maxCoeff(), h_ept.col(c).maxCoeff()});
    }
  }
  const std::vector<int> res(static_cast<std::size_t>(d),
                             std::max(2, options.weight.resolution));
  return build_grid_uniform(lo, hi, res);
}

}  // namespace

CvmdlOutput run_cvmdl(Sampler& sampler, double budget,
                      const CvmdlOptions& options, rng::Stream stream) {
  const EnsembleDescriptor& desc = sampler.descriptor();
  const auto subsets = enumerate_subsets(desc.n_lowfid);
  double min_subset_cost = desc.subset_cost(subsets.front());
  for (const auto& s : subsets)
    min_subset_cost = std::min(min_subset_cost, desc.subset_cost(s));

  const long m_min = desc.min_exploration();
  if (budget < static_cast<double>(m_min) * desc.c_epr + min_subset_cost)
    throw BudgetInfeasible("budget below minimum exploration plus one exploitation draw");

  CvmdlOutput out;
  out.ledger = BudgetLedger{budget, desc.c_epr, 0.0, 0.0};

  std::uint64_t draw_key = 0;
  JointBatch batch = sampler.sample_joint(static_cast<int>(m_min), stream.child(draw_key++));
  out.ledger.charge_exploration(batch.charged_cost);

  const int max_iterations = 200;  // m at most doubles, so this is generous
  std::size_t chosen = 0;
  for (int iter = 0; iter < max_iterations; ++iter) {
    IterationRecord rec;
    rec.m = batch.count;
    rec.table.reserve(subsets.size());
    for (const auto& s : subsets)
      rec.table.push_back(evaluate_subset(batch, s, desc, budget, options.weight));

    chosen = select_subset(rec.table, batch.count);
    rec.chosen = rec.table[chosen].subset;

    const SubsetEvaluation& sel = rec.table[chosen];
    const long z_max = static_cast<long>(std::floor(
        (budget - sel.c_subset) / desc.c_epr));
    long target = 0;
    if (batch.count < sel.m_star.m_star) {
      target = q_growth(batch.count, static_cast<double>(sel.m_star.m_star));
      target = std::min(target, z_max);
    }
    if (target <= batch.count) {
      rec.growth_target = 0;
      out.trace.push_back(std::move(rec));
      out.coeffs = sel.coeffs;
      out.subset = sel.subset;
      break;
    }
    rec.growth_target = target;
    const long extra = target - batch.count;
    out.trace.push_back(std::move(rec));
    JointBatch more = sampler.sample_joint(static_cast<int>(extra), stream.child(draw_key++));
    out.ledger.charge_exploration(more.charged_cost);
    batch.append(more);
  }
  if (out.subset.empty())
    throw std::runtime_error("exploration loop failed to terminate");

  out.m = batch.count;
  const double c_s = desc.subset_cost(out.subset);
  out.n_exploit = static_cast<long>(
      std::floor((budget - desc.c_epr * static_cast<double>(out.m)) / c_s));
  if (out.n_exploit < 1)
    throw std::runtime_error("internal error: selected subset has no exploitation budget");

  SubsetBatch ept = sampler.sample_subset(out.subset, static_cast<int>(out.n_exploit),
                                          stream.child(0xE0));
  out.ledger.charge_exploitation(ept.charged_cost);

  const Eigen::MatrixXd h_epr = surrogate_values(batch, out.coeffs);
  const Eigen::MatrixXd h_ept = apply_surrogate_rows(out.coeffs, ept.x);

  const EvalGrid grid = options.grid
      ? *options.grid
      : default_grid(options, batch.y, h_epr, h_ept);

  out.raw = exploitation_cdf(batch.y, h_epr, h_ept, grid, options.alpha_mode,
                             options.tau);
  out.clipped = clip_unit(out.raw);
  out.sorted = options.sort ? clip_unit(alternating_sort(out.raw)) : out.clipped;
  return out;
}

CdfEstimate run_ecdf_baseline(Sampler& sampler, double budget,
                              const std::optional<EvalGrid>& grid,
                              rng::Stream stream, int default_resolution) {
  const double c0 = sampler.descriptor().costs[0];
  const auto n = static_cast<long>(std::floor(budget / c0));
  if (n < 1) throw BudgetInfeasible("budget below one high-fidelity draw");
  Eigen::MatrixXd y = sampler.sample_highfid(static_cast<int>(n), stream);
  if (grid) return ecdf_on_grid(y, *grid);

  if (y.cols() == 1) {
    std::vector<double> vals(static_cast<std::size_t>(y.rows()));
    for (long r = 0; r < y.rows(); ++r) vals[static_cast<std::size_t>(r)] = y(r, 0);
    return ecdf_on_grid(y, build_grid_from_samples(std::move(vals)));
  }
  std::vector<double> lo, hi;
  for (long c = 0; c < y.cols(); ++c) {
    lo.push_back(y.col(c).minCoeff());
    hi.push_back(y.col(c).maxCoeff());
  }
  const std::vector<int> res(static_cast<std::size_t>(y.cols()),
                             std::max(2, default_resolution));
  return ecdf_on_grid(y, build_grid_uniform(lo, hi, res));
}

}  // namespace cvmdl
