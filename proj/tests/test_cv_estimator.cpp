#include <doctest.h>

#include <cmath>
#include <random>

#include "cvmdl/cv_estimator.hpp"

using namespace cvmdl;

namespace {

Eigen::MatrixXd col(const std::vector<double>& v) {
  Eigen::MatrixXd m(static_cast<long>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<long>(i), 0) = v[i];
  return m;
}

Eigen::VectorXd vec1(double v) {
  Eigen::VectorXd x(1);
  x << v;
  return x;
}

// independent oracle: integral of f_y (1 - f_y) over the real line for a
// scalar sample, by direct summation over the sorted partition
double var_integral(std::vector<double> ys) {
  std::sort(ys.begin(), ys.end());
  const auto m = static_cast<double>(ys.size());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < ys.size(); ++i) {
    const double f = static_cast<double>(i + 1) / m;
    total += f * (1.0 - f) * (ys[i + 1] - ys[i]);
  }
  return total;
}

}  // namespace

TEST_CASE("indicator stats on the four-row hand case") {
  const auto y = col({1, 2, 3, 4});
  const auto h = col({3, 1, 4, 2});
  const auto s = indicator_stats(y, h, vec1(2.5));
  CHECK(s.f_y() == 0.5);
  CHECK(s.f_h() == 0.5);
  CHECK(s.f_yh() == 0.25);
  CHECK(alpha_hat(s.f_y(), s.f_h(), s.f_yh()) == 0.0);
  const auto k = k_point(s);
  CHECK(k.k1 == doctest::Approx(0.25));
  CHECK(k.k2 == doctest::Approx(0.0));
}

TEST_CASE("indicator stats saturate above all samples") {
  const auto y = col({1, 2, 3, 4});
  const auto h = col({3, 1, 4, 2});
  const auto s = indicator_stats(y, h, vec1(100.0));
  CHECK(s.f_y() == 1.0);
  CHECK(s.f_h() == 1.0);
  CHECK(s.f_yh() == 1.0);
}

TEST_CASE("perfect surrogate collapses the triple") {
  const auto y = col({1, 2, 3, 4, 5});
  for (double x : {0.5, 1.5, 3.0, 4.9}) {
    const auto s = indicator_stats(y, y, vec1(x));
    CHECK(s.f_y() == s.f_h());
    CHECK(s.f_y() == s.f_yh());
    if (s.f_h() > 0.0 && s.f_h() < 1.0)
      CHECK(alpha_hat(s.f_y(), s.f_h(), s.f_yh()) == doctest::Approx(1.0));
    const auto k = k_point(s);
    CHECK(k.k1 == doctest::Approx(0.0));
    CHECK(k.k2 == doctest::Approx(s.f_y() * (1.0 - s.f_y())));
  }
}

TEST_CASE("alpha is zero for degenerate slice indicators") {
  CHECK(alpha_hat(0.4, 0.0, 0.0) == 0.0);
  CHECK(alpha_hat(0.4, 1.0, 0.4) == 0.0);
}

TEST_CASE("constant surrogate column reduces to intercept-only regression") {
  const auto y = col({1, 2, 3, 4});
  const auto h = col({0, 0, 0, 0});
  const auto s = indicator_stats(y, h, vec1(2.5));
  const auto k = k_point(s);
  CHECK(k.k1 == doctest::Approx(0.25));  // f_y (1 - f_y) at f_y = 0.5
  CHECK(k.k2 == doctest::Approx(0.0));
}

TEST_CASE("indicator and K-field properties under fuzzing") {
  std::mt19937_64 eng(31);
  std::normal_distribution<double> nd;
  for (int rep = 0; rep < 50; ++rep) {
    const long m = 3 + static_cast<long>(eng() % 40);
    Eigen::MatrixXd y(m, 1), h(m, 1);
    for (long r = 0; r < m; ++r) {
      y(r, 0) = nd(eng);
      h(r, 0) = 0.5 * y(r, 0) + nd(eng);
    }
    const double x = nd(eng);
    const auto s = indicator_stats(y, h, vec1(x));
    const double fy = s.f_y(), fh = s.f_h(), fyh = s.f_yh();
    CHECK(fyh <= std::min(fy, fh) + 1e-15);
    CHECK(fyh >= std::max(0.0, fy + fh - 1.0) - 1e-15);
    CHECK(std::abs(alpha_hat(fy, fh, fyh)) <= 1.0 + 1e-12);
    const auto k = k_point(s);
    CHECK(k.k1 >= -1e-15);
    CHECK(k.k2 >= -1e-15);
    CHECK(k.k1 + k.k2 == doctest::Approx(fy * (1.0 - fy)).epsilon(1e-12));
  }
}

TEST_CASE("k_hats identity against the variance integral") {
  std::mt19937_64 eng(37);
  std::normal_distribution<double> nd;
  std::vector<double> ys, hs;
  for (int i = 0; i < 60; ++i) {
    ys.push_back(nd(eng));
    hs.push_back(0.8 * ys.back() + 0.3 * nd(eng));
  }
  const double c_s = 5.0;
  WeightSpec w;  // constant one, d = 1
  const auto kh = k_hats(col(ys), col(hs), c_s, w);
  CHECK(kh.k1_hat + kh.k2_hat / c_s ==
        doctest::Approx(var_integral(ys)).epsilon(1e-10));
  CHECK(kh.k1_hat >= 0.0);
  CHECK(kh.k2_hat >= 0.0);
}

TEST_CASE("k_hats matches a dense midpoint-rule oracle") {
  const auto y = col({0.1, 0.9, 0.4, 0.7, 0.25});
  const auto h = col({0.2, 1.0, 0.35, 0.6, 0.3});
  WeightSpec w;
  const auto kh = k_hats(y, h, 2.0, w);

  // all sample values are multiples of the cell width, so every quadrature
  // cell sees a constant integrand and the midpoint rule is exact
  const double lo = 0.0, hi = 1.0;
  const int n = 10000;
  const double step = (hi - lo) / n;
  double k1 = 0.0, k2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = lo + (i + 0.5) * step;
    const auto k = k_point(indicator_stats(y, h, vec1(x)));
    k1 += k.k1 * step;
    k2 += k.k2 * step;
  }
  CHECK(kh.k1_hat == doctest::Approx(k1).epsilon(1e-6));
  CHECK(kh.k2_hat == doctest::Approx(2.0 * k2).epsilon(1e-6));
}

TEST_CASE("k_hats with a rectangle weight truncates the integral") {
  const auto y = col({0.0, 1.0, 2.0, 3.0});
  WeightSpec w;
  w.kind = WeightKind::Rectangle;
  w.lower = {0.0};
  w.upper = {2.0};
  // perfect surrogate: k1 = 0, k2 = c_s * int_0^2 f(1-f)
  const auto kh = k_hats(y, y, 3.0, w);
  CHECK(kh.k1_hat == doctest::Approx(0.0));
  // f = 1/4 on [0,1), 1/2 on [1,2)
  const double expect = 0.25 * 0.75 + 0.5 * 0.5;
  CHECK(kh.k2_hat == doctest::Approx(3.0 * expect).epsilon(1e-12));
}

TEST_CASE("loss profile closed form") {
  SUBCASE("symmetric case") {
    const double c_epr = 10.0, budget = 1e4;
    LossProfile p{1.0, c_epr, budget, c_epr, 1.0};
    const auto ms = optimal_exploration(p, 1);
    CHECK(ms.unclamped == doctest::Approx(budget / (2.0 * c_epr)));
    CHECK(scaled_loss_gamma(p.k1_hat, p.k2_hat, c_epr) ==
          doctest::Approx(4.0 * c_epr));
  }
  SUBCASE("vanishing k1 clamps to the minimum") {
    LossProfile p{0.0, 5.0, 1e4, 10.0, 1.0};
    const auto ms = optimal_exploration(p, 7);
    CHECK(ms.m_star == 7);
    CHECK(!ms.degenerate);
  }
  SUBCASE("vanishing k2 clamps to the feasible maximum") {
    LossProfile p{5.0, 0.0, 1e3, 10.0, 4.0};
    const auto ms = optimal_exploration(p, 3);
    CHECK(ms.m_star == static_cast<long>(std::floor((1e3 - 4.0) / 10.0)));
  }
  SUBCASE("both vanish flags degeneracy") {
    LossProfile p{0.0, 0.0, 1e3, 10.0, 4.0};
    CHECK(optimal_exploration(p, 3).degenerate);
  }
  SUBCASE("grid search agrees with the closed form") {
    LossProfile p{0.7, 13.0, 5e4, 21.0, 3.0};
    const auto ms = optimal_exploration(p, 2);
    const double z_hi = p.budget / p.c_epr;
    double best = 1e300, best_z = 0.0;
    for (int i = 1; i < 10000; ++i) {
      const double z = z_hi * i / 10000.0;
      if (p.loss(z) < best) { best = p.loss(z); best_z = z; }
    }
    CHECK(ms.unclamped == doctest::Approx(best_z).epsilon(z_hi / 5000.0));
    CHECK(p.loss(ms.unclamped) <= best + 1e-12);
  }
}

TEST_CASE("relative efficiency is bounded below by one quarter") {
  CHECK(relative_efficiency(1.5, 0.0, 8.0, 8.0) == doctest::Approx(1.0));
  std::mt19937_64 eng(41);
  std::uniform_real_distribution<double> u(0.01, 10.0);
  for (int rep = 0; rep < 1000; ++rep) {
    const double k1 = u(eng), k2 = u(eng), c_epr = u(eng) + u(eng);
    const double c_s = std::min(c_epr, u(eng));
    CHECK(relative_efficiency(k1, k2, c_epr, c_s) >= 0.25 - 1e-12);
  }
  CHECK_THROWS(relative_efficiency(0.0, 0.0, 1.0, 1.0));
}

TEST_CASE("tail extension equals one for a perfect surrogate") {
  std::vector<double> vals;
  for (int i = 1; i <= 100; ++i) vals.push_back(static_cast<double>(i));
  const auto y = col(vals);
  CHECK(alpha_tail_extension(y, y, 0.0, 0.05) == doctest::Approx(1.0));
  CHECK(alpha_tail_extension(y, y, 200.0, 0.05) == doctest::Approx(1.0));
  CHECK_THROWS(alpha_tail_extension(y, y, 50.0, 0.05));
}

TEST_CASE("exploitation cdf reduces to the exploration ecdf") {
  const auto y = col({0.3, 0.9, 0.1, 0.6, 0.5});
  const auto h = col({0.25, 1.0, 0.15, 0.55, 0.45});
  const auto grid = build_grid_from_samples({0.0, 0.2, 0.4, 0.6, 0.8, 1.0});
  SUBCASE("exploitation sample equals exploration surrogate rows") {
    const auto est = exploitation_cdf(y, h, h, grid);
    for (std::size_t j = 0; j < grid.breakpoints[0].size(); ++j)
      CHECK(est.values.data[j] ==
            doctest::Approx(ecdf_eval(y, vec1(grid.breakpoints[0][j]))));
  }
  SUBCASE("hand evaluation of the correction at each grid point") {
    const auto ept = col({0.05, 0.3, 0.5, 0.52, 0.7, 0.95, 1.4});
    const auto est = exploitation_cdf(y, h, ept, grid);
    for (std::size_t j = 0; j < grid.breakpoints[0].size(); ++j) {
      const double x = grid.breakpoints[0][j];
      const auto s = indicator_stats(y, h, vec1(x));
      const double a = alpha_hat(s.f_y(), s.f_h(), s.f_yh());
      const double want = s.f_y() - a * (s.f_h() - ecdf_eval(ept, vec1(x)));
      CHECK(est.values.data[j] == doctest::Approx(want).epsilon(1e-14));
    }
  }
}

TEST_CASE("exploitation cdf is translation equivariant") {
  std::mt19937_64 eng(43);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd y(30, 1), h(30, 1), ept(50, 1);
  for (long r = 0; r < 30; ++r) {
    y(r, 0) = nd(eng);
    h(r, 0) = 0.7 * y(r, 0) + 0.2 * nd(eng);
  }
  for (long r = 0; r < 50; ++r) ept(r, 0) = nd(eng);
  const auto grid = build_grid_uniform({-2.0}, {2.0}, {41});
  const auto base = exploitation_cdf(y, h, ept, grid);

  const double shift = 3.25;
  auto grid2 = grid;
  for (auto& b : grid2.breakpoints[0]) b += shift;
  const auto shifted = exploitation_cdf(
      (y.array() + shift).matrix(), (h.array() + shift).matrix(),
      (ept.array() + shift).matrix(), grid2);
  for (std::size_t i = 0; i < base.values.size(); ++i)
    CHECK(base.values.data[i] == doctest::Approx(shifted.values.data[i]).epsilon(1e-14));
}

TEST_CASE("tail-extended mode fills degenerate slices with tail constants") {
  std::vector<double> vals;
  for (int i = 1; i <= 100; ++i) vals.push_back(static_cast<double>(i));
  const auto y = col(vals);
  const auto ept = col({10.0, 20.0, 30.0});
  const auto grid = build_grid_uniform({-50.0}, {150.0}, {21});
  const auto plain = exploitation_cdf(y, y, ept, grid, AlphaMode::Plain);
  const auto ext = exploitation_cdf(y, y, ept, grid, AlphaMode::TailExtended, 0.05);
  // below the surrogate support the plain estimate keeps alpha = 0 while
  // the extension uses alpha = 1 (perfect surrogate)
  const double x0 = grid.breakpoints[0][0];
  REQUIRE(x0 < 1.0);
  CHECK(plain.values.data[0] == 0.0);
  CHECK(ext.values.data[0] == doctest::Approx(0.0 - 1.0 * (0.0 - 0.0)));
  // above the support: f_h = 1, plain alpha = 0 keeps f_y = 1; extension
  // subtracts 1 * (1 - 1) = 0 as well, so both read 1 there
  CHECK(plain.values.data[20] == 1.0);
  CHECK(ext.values.data[20] == doctest::Approx(1.0));
}

TEST_CASE("evaluate_subset flags infeasible exploration states") {
  JointBatch b;
  b.count = 20;
  b.y.resize(20, 1);
  b.x.resize(1);
  b.x[0].resize(20, 1);
  std::mt19937_64 eng(47);
  std::normal_distribution<double> nd;
  for (long r = 0; r < 20; ++r) {
    b.y(r, 0) = nd(eng);
    b.x[0](r, 0) = 0.9 * b.y(r, 0) + 0.1 * nd(eng);
  }
  EnsembleDescriptor desc;
  desc.n_lowfid = 1;
  desc.dims = {1, 1};
  desc.costs = {10.0, 1.0};
  desc.c_epr = 11.0;
  WeightSpec w;

  const auto ok = evaluate_subset(b, {1}, desc, 1e4, w);
  CHECK(ok.feasible);
  std::vector<double> ys(b.y.data(), b.y.data() + 20);
  CHECK(ok.k1_hat + ok.k2_hat / ok.c_subset ==
        doctest::Approx(var_integral(ys)).epsilon(1e-10));
  CHECK(std::isfinite(ok.loss_at_selection));

  // 20 exploration rows already exceed what a budget of 100 allows
  const auto bad = evaluate_subset(b, {1}, desc, 100.0, w);
  CHECK(!bad.feasible);
}

TEST_CASE("oracle stats on a perfectly correlated ensemble") {
  JointBatch b;
  b.count = 200;
  b.y.resize(200, 1);
  b.x.resize(1);
  b.x[0].resize(200, 1);
  std::mt19937_64 eng(53);
  std::normal_distribution<double> nd;
  for (long r = 0; r < 200; ++r) {
    b.y(r, 0) = nd(eng);
    b.x[0](r, 0) = 2.0 * b.y(r, 0) + 1.0;  // exact affine map
  }
  EnsembleDescriptor desc;
  desc.n_lowfid = 1;
  desc.dims = {1, 1};
  desc.costs = {10.0, 1.0};
  desc.c_epr = 11.0;
  WeightSpec w;

  const auto stats = oracle_stats(b, desc, 1e5, w);
  REQUIRE(stats.subsets.size() == 1);
  CHECK(stats.correlations(0, 0) == doctest::Approx(1.0));
  CHECK(stats.subsets[0].k1_hat == doctest::Approx(0.0));
  CHECK(stats.subsets[0].k2_hat > 0.0);
}
