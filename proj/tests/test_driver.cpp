#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "cvmdl/driver.hpp"
#include "cvmdl/metrics.hpp"

using namespace cvmdl;

namespace {

SubsetEvaluation make_eval(std::vector<int> subset, double loss, double c_s,
                           bool feasible = true) {
  SubsetEvaluation ev;
  ev.subset = std::move(subset);
  ev.loss_at_selection = loss;
  ev.c_subset = c_s;
  ev.feasible = feasible;
  return ev;
}

EnsembleHandle gaussian_handle(double coef, double noise, double c0, double c1,
                               std::uint64_t seed) {
  EnsembleHandle h;
  h.kind = EnsembleKind::LinearGaussian;
  h.base_seed = seed;
  h.specs.push_back({0, 1, c0});
  h.specs.push_back({1, 1, c1});
  LinearGaussianParams p;
  p.mean = 0.0;
  p.stddev = 1.0;
  p.coefs = {coef};
  p.noise_stds = {noise};
  h.linear_gaussian = p;
  return h;
}

CdfEstimate normal_cdf_dense() {
  CdfEstimate est;
  est.grid = build_grid_uniform({-6.0}, {6.0}, {4001});
  est.values = Tensor::zeros({4001});
  for (int i = 0; i < 4001; ++i) {
    const double x = est.grid.breakpoints[0][static_cast<std::size_t>(i)];
    est.values.data[static_cast<std::size_t>(i)] =
        0.5 * std::erfc(-x / std::sqrt(2.0));
  }
  est.monotone = true;
  return est;
}

}  // namespace

TEST_CASE("exploration growth rule") {
  CHECK(q_growth(100, 300.0) == 200);
  CHECK(q_growth(200, 300.0) == 250);
  CHECK(q_growth(299, 300.0) == 300);
  CHECK(q_growth(300, 300.0) == 300);
  CHECK_THROWS(q_growth(0, 10.0));
}

TEST_CASE("subset selection") {
  SUBCASE("singleton") {
    const std::vector<SubsetEvaluation> t = {make_eval({1}, 3.0, 1.0)};
    CHECK(select_subset(t, 10) == 0);
  }
  SUBCASE("smaller loss wins") {
    const std::vector<SubsetEvaluation> t = {make_eval({1}, 5.0, 1.0),
                                             make_eval({2}, 7.0, 1.0)};
    CHECK(select_subset(t, 10) == 0);
  }
  SUBCASE("equal losses break toward cheaper subset") {
    const std::vector<SubsetEvaluation> t = {make_eval({1}, 5.0, 3.0),
                                             make_eval({2}, 5.0, 2.0)};
    CHECK(select_subset(t, 10) == 1);
  }
  SUBCASE("equal loss and cost keep the earlier entry") {
    const std::vector<SubsetEvaluation> t = {make_eval({1}, 5.0, 2.0),
                                             make_eval({2}, 5.0, 2.0)};
    CHECK(select_subset(t, 10) == 0);
  }
  SUBCASE("vanished k1 estimates lose to resolved ones") {
    auto degenerate = make_eval({1}, 1e-9, 1.0);
    auto resolved = make_eval({2}, 5.0, 1.0);
    resolved.k1_hat = 0.3;
    const std::vector<SubsetEvaluation> t = {degenerate, resolved};
    CHECK(select_subset(t, 10) == 1);
  }
  SUBCASE("all k1 estimates vanished: smallest loss wins") {
    const std::vector<SubsetEvaluation> t = {make_eval({1}, 2.0, 1.0),
                                             make_eval({2}, 1.0, 1.0)};
    CHECK(select_subset(t, 10) == 1);
  }
  SUBCASE("infeasible entries are skipped") {
    const std::vector<SubsetEvaluation> t = {
        make_eval({1}, 1.0, 1.0, false), make_eval({2}, 9.0, 1.0)};
    CHECK(select_subset(t, 10) == 1);
  }
  SUBCASE("all infeasible throws") {
    const std::vector<SubsetEvaluation> t = {make_eval({1}, 1.0, 1.0, false)};
    CHECK_THROWS_AS(select_subset(t, 10), BudgetInfeasible);
  }
  SUBCASE("empty table throws") {
    CHECK_THROWS(select_subset({}, 10));
  }
}

TEST_CASE("budget ledger guards overspending") {
  BudgetLedger ledger{100.0, 10.0, 0.0, 0.0};
  ledger.charge_exploration(60.0);
  ledger.charge_exploitation(40.0);
  CHECK(ledger.spent() == 100.0);
  CHECK(ledger.remaining() == 0.0);
  CHECK_THROWS(ledger.charge_exploitation(0.1));
}

TEST_CASE("run at the minimum feasible budget") {
  Sampler sampler(gaussian_handle(1.0, 0.5, 8.0, 1.0, 3));
  const double c_epr = 9.0;
  const long m_min = 3;  // one scalar low-fidelity model
  const double budget = m_min * c_epr + 1.0;
  CvmdlOptions opts;
  const auto out = run_cvmdl(sampler, budget, opts, rng::Stream{1});
  CHECK(out.m == m_min);
  CHECK(out.n_exploit >= 1);
  CHECK(out.ledger.spent() <= budget);

  Sampler s2(gaussian_handle(1.0, 0.5, 8.0, 1.0, 3));
  CHECK_THROWS_AS(run_cvmdl(s2, budget - 1.5, opts, rng::Stream{1}),
                  BudgetInfeasible);
}

TEST_CASE("run invariants on a moderate budget") {
  Sampler sampler(gaussian_handle(1.0, 0.5, 16.0, 1.0, 5));
  CvmdlOptions opts;
  const double budget = 20000.0;
  const auto out = run_cvmdl(sampler, budget, opts, rng::Stream{7});

  // budget safety with bounded slack
  CHECK(out.ledger.spent() <= budget);
  CHECK(budget - out.ledger.spent() < 17.0 + 1.0);

  // monotone exploration, at most doubling, complete tables
  REQUIRE(!out.trace.empty());
  long prev = 0;
  for (const auto& rec : out.trace) {
    CHECK(rec.m > prev);
    if (prev > 0) CHECK(rec.m <= 2 * prev);
    CHECK(rec.table.size() == 1);  // 2^1 - 1 subsets
    CHECK(!rec.chosen.empty());
    prev = rec.m;
  }
  CHECK(out.trace.back().growth_target == 0);
  CHECK(out.m == out.trace.back().m);
  CHECK(out.n_exploit ==
        static_cast<long>(std::floor((budget - 17.0 * out.m) / 1.0)));

  // sorted output is monotone and clipped
  CHECK(out.sorted.monotone);
  for (std::size_t i = 1; i < out.sorted.values.size(); ++i) {
    CHECK(out.sorted.values.data[i] >= out.sorted.values.data[i - 1]);
    CHECK(out.sorted.values.data[i] <= 1.0);
  }
  CHECK(out.sorted.values.data.front() >= 0.0);
}

TEST_CASE("trace covers all subsets for three low-fidelity models") {
  EnsembleHandle h;
  h.kind = EnsembleKind::LinearGaussian;
  h.base_seed = 11;
  h.specs.push_back({0, 1, 32.0});
  for (int i = 1; i <= 3; ++i) h.specs.push_back({i, 1, static_cast<double>(i)});
  LinearGaussianParams p;
  p.coefs = {1.0, 0.8, 0.5};
  p.noise_stds = {0.2, 0.5, 1.0};
  h.linear_gaussian = p;

  Sampler sampler(h);
  CvmdlOptions opts;
  const auto out = run_cvmdl(sampler, 50000.0, opts, rng::Stream{13});
  for (const auto& rec : out.trace) CHECK(rec.table.size() == 7);
}

TEST_CASE("runs are bit-reproducible under a fixed stream") {
  CvmdlOptions opts;
  Sampler a(gaussian_handle(1.0, 0.5, 16.0, 1.0, 5));
  Sampler b(gaussian_handle(1.0, 0.5, 16.0, 1.0, 5));
  const auto ra = run_cvmdl(a, 20000.0, opts, rng::Stream{21});
  const auto rb = run_cvmdl(b, 20000.0, opts, rng::Stream{21});
  CHECK(ra.subset == rb.subset);
  CHECK(ra.m == rb.m);
  CHECK(ra.n_exploit == rb.n_exploit);
  CHECK(ra.raw.values.data == rb.raw.values.data);
  CHECK(ra.raw.grid.breakpoints == rb.raw.grid.breakpoints);
}

TEST_CASE("perfect cheap surrogate beats the ecdf baseline") {
  const auto oracle = normal_cdf_dense();
  WeightSpec w;
  const double budget = 20000.0;
  double cv_total = 0.0, ecdf_total = 0.0;
  for (std::uint64_t trial = 0; trial < 5; ++trial) {
    Sampler s1(gaussian_handle(1.0, 0.05, 100.0, 1.0, 31 + trial));
    CvmdlOptions opts;
    const auto out = run_cvmdl(s1, budget, opts, rng::Stream{100 + trial});
    CHECK(std::find(out.subset.begin(), out.subset.end(), 1) != out.subset.end());
    cv_total += weighted_l2_error(out.sorted, oracle, w);

    Sampler s2(gaussian_handle(1.0, 0.05, 100.0, 1.0, 31 + trial));
    const auto base = run_ecdf_baseline(s2, budget, std::nullopt,
                                        rng::Stream{200 + trial});
    ecdf_total += weighted_l2_error(base, oracle, w);
  }
  CHECK(cv_total < 0.25 * ecdf_total);
}

TEST_CASE("ecdf baseline on a pool") {
  EnsembleHandle h;
  h.kind = EnsembleKind::Pool;
  h.base_seed = 3;
  h.specs.push_back({0, 1, 2.0});
  h.specs.push_back({1, 1, 1.0});
  Eigen::MatrixXd table(3, 2);
  table << 1, 10, 2, 20, 3, 30;
  h.pool = PoolSource{table, false};

  Sampler sampler(h);
  const auto est = run_ecdf_baseline(sampler, 6.0, std::nullopt, rng::Stream{1});
  Eigen::VectorXd x(1);
  x << 2.0;
  CHECK(est.eval(x) == doctest::Approx(2.0 / 3.0));

  Sampler s2(h);
  CHECK_THROWS_AS(run_ecdf_baseline(s2, 1.5, std::nullopt, rng::Stream{1}),
                  BudgetInfeasible);
}

TEST_CASE("ecdf baseline mean loss tracks the variance integral") {
  // standard normal: int F (1 - F) dx = 1 / sqrt(pi)
  const auto oracle = normal_cdf_dense();
  WeightSpec w;
  const double c0 = 1.0, budget = 100.0;
  const double expect = c0 / std::sqrt(M_PI) / budget;
  double total = 0.0;
  const std::uint64_t trials = 200;
  for (std::uint64_t t = 0; t < trials; ++t) {
    Sampler sampler(gaussian_handle(1.0, 1.0, c0, 0.5, 7));
    const auto est = run_ecdf_baseline(sampler, budget, std::nullopt,
                                       rng::Stream{500 + t});
    total += weighted_l2_error(est, oracle, w);
  }
  const double mean = total / trials;
  CHECK(mean == doctest::Approx(expect).epsilon(0.15));
}
