#include <doctest.h>

#include <random>

#include "cvmdl/surrogate.hpp"

using namespace cvmdl;

namespace {

JointBatch batch_1model(const std::vector<double>& xs,
                        const std::vector<double>& ys) {
  JointBatch b;
  b.count = static_cast<int>(xs.size());
  b.y.resize(b.count, 1);
  b.x.resize(1);
  b.x[0].resize(b.count, 1);
  for (int i = 0; i < b.count; ++i) {
    b.y(i, 0) = ys[static_cast<std::size_t>(i)];
    b.x[0](i, 0) = xs[static_cast<std::size_t>(i)];
  }
  return b;
}

}  // namespace

TEST_CASE("design matrix prepends an intercept column") {
  const auto b = batch_1model({0, 1, 2, 4}, {3, 5, 7, 11});
  const auto design = build_design(b, {1});
  REQUIRE(design.rows() == 4);
  REQUIRE(design.cols() == 2);
  CHECK((design.col(0).array() == 1.0).all());
  CHECK(design(3, 1) == 4.0);
}

TEST_CASE("exact line recovers intercept and slope") {
  const auto b = batch_1model({0, 1, 2, 4}, {3, 5, 7, 11});
  const auto c = fit_surrogate(b, {1});
  CHECK(c.rank == 2);
  CHECK(c.matrix(0, 0) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(c.matrix(1, 0) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("identity map fits with zero intercept") {
  const auto b = batch_1model({-1, 0, 2, 5}, {-1, 0, 2, 5});
  const auto c = fit_surrogate(b, {1});
  CHECK(c.matrix(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(c.matrix(1, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("apply evaluates affine map") {
  SurrogateCoefficients c;
  c.subset = {1};
  c.matrix.resize(2, 1);
  c.matrix << 3.0, 2.0;
  Eigen::VectorXd x(1);
  x << 5.0;
  CHECK(apply_surrogate(c, x)(0) == 13.0);

  Eigen::MatrixXd rows(3, 1);
  rows << 0.0, 1.0, 2.0;
  const auto pred = apply_surrogate_rows(c, rows);
  CHECK(pred(0, 0) == 3.0);
  CHECK(pred(2, 0) == 7.0);
}

TEST_CASE("constant regressor yields rank one and exact fitted values") {
  const auto b = batch_1model({2, 2, 2, 2}, {7, 7, 7, 7});
  const auto c = fit_surrogate(b, {1});
  CHECK(c.rank == 1);
  const auto fitted = surrogate_values(b, c);
  for (int i = 0; i < 4; ++i) CHECK(fitted(i, 0) == doctest::Approx(7.0));
  // minimum-norm solution spreads mass along (1, 2)/5
  CHECK(c.matrix(0, 0) == doctest::Approx(7.0 / 5.0).epsilon(1e-10));
  CHECK(c.matrix(1, 0) == doctest::Approx(14.0 / 5.0).epsilon(1e-10));
}

TEST_CASE("zero response gives zero coefficients") {
  const auto b = batch_1model({1, 2, 3, 4}, {0, 0, 0, 0});
  const auto c = fit_surrogate(b, {1});
  CHECK(c.matrix.cwiseAbs().maxCoeff() == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("two-regressor exact plane") {
  JointBatch b;
  b.count = 6;
  b.y.resize(6, 1);
  b.x.resize(2);
  b.x[0].resize(6, 1);
  b.x[1].resize(6, 1);
  std::mt19937_64 eng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 6; ++i) {
    b.x[0](i, 0) = u(eng);
    b.x[1](i, 0) = u(eng);
    b.y(i, 0) = 1.5 + b.x[0](i, 0) - 2.0 * b.x[1](i, 0);
  }
  const auto c = fit_surrogate(b, {1, 2});
  CHECK(c.rank == 3);
  CHECK(c.matrix(0, 0) == doctest::Approx(1.5).epsilon(1e-10));
  CHECK(c.matrix(1, 0) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(c.matrix(2, 0) == doctest::Approx(-2.0).epsilon(1e-10));
}

TEST_CASE("residuals are orthogonal to the design columns") {
  JointBatch b;
  b.count = 40;
  b.y.resize(40, 1);
  b.x.resize(1);
  b.x[0].resize(40, 2);
  std::mt19937_64 eng(11);
  std::normal_distribution<double> nd;
  for (int i = 0; i < 40; ++i) {
    b.x[0](i, 0) = nd(eng);
    b.x[0](i, 1) = nd(eng);
    b.y(i, 0) = 0.3 * b.x[0](i, 0) + nd(eng);
  }
  const auto c = fit_surrogate(b, {1});
  const Eigen::MatrixXd design = build_design(b, {1});
  const Eigen::VectorXd resid = b.y.col(0) - (design * c.matrix).col(0);
  const Eigen::VectorXd gram = design.transpose() * resid;
  CHECK(gram.cwiseAbs().maxCoeff() == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("duplicate regressors collapse rank but keep fitted values") {
  JointBatch b;
  b.count = 20;
  b.y.resize(20, 1);
  b.x.resize(2);
  b.x[0].resize(20, 1);
  b.x[1].resize(20, 1);
  std::mt19937_64 eng(13);
  std::normal_distribution<double> nd;
  for (int i = 0; i < 20; ++i) {
    b.x[0](i, 0) = nd(eng);
    b.x[1](i, 0) = b.x[0](i, 0);
    b.y(i, 0) = 2.0 * b.x[0](i, 0) + 0.1 * nd(eng);
  }
  const auto both = fit_surrogate(b, {1, 2});
  const auto one = fit_surrogate(b, {1});
  CHECK(both.rank == 2);
  const auto fa = surrogate_values(b, both);
  const auto fb = surrogate_values(b, one);
  CHECK((fa - fb).cwiseAbs().maxCoeff() == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("fit rejects too few rows") {
  const auto b = batch_1model({1, 2}, {1, 2});
  CHECK_THROWS(fit_surrogate(b, {1}));
}
