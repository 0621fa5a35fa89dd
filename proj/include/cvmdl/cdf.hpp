#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

namespace cvmdl {

// Dense row-major value tensor (last dimension fastest).
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  static Tensor zeros(const std::vector<int>& shape);
  int dims() const { return static_cast<int>(shape.size()); }
  std::size_t size() const { return data.size(); }
  std::size_t flat_index(const std::vector<int>& idx) const;
  double& at(const std::vector<int>& idx) { return data[flat_index(idx)]; }
  double at(const std::vector<int>& idx) const { return data[flat_index(idx)]; }
};

// Rectangular evaluation grid: strictly increasing breakpoints per dimension.
struct EvalGrid {
  std::vector<std::vector<double>> breakpoints;

  int dims() const { return static_cast<int>(breakpoints.size()); }
  std::vector<int> shape() const;
  std::size_t size() const;
};

// Piecewise-constant CDF representation on an EvalGrid: value at grid
// index (j_1..j_d) applies on the cell [z_{i,j_i}, z_{i,j_i+1}).
struct CdfEstimate {
  EvalGrid grid;
  Tensor values;
  bool monotone = false;

  // Right-continuous evaluation; 0 below the first breakpoint in any
  // dimension, clamped to the last breakpoint above.
  double eval(const Eigen::VectorXd& x) const;
};

double ecdf_eval(const Eigen::MatrixXd& samples, const Eigen::VectorXd& x);

// Count of samples componentwise <= each grid point, via a d-dimensional
// histogram plus axis-wise prefix sums. O(m log M + |grid|).
Tensor count_leq_grid(const Eigen::MatrixXd& samples, const EvalGrid& grid);

// Empirical CDF of the samples materialized on the grid.
CdfEstimate ecdf_on_grid(const Eigen::MatrixXd& samples, const EvalGrid& grid);

// Dimension-wise alternating sorting until a fixed point (Algorithm:
// repeatedly sort every 1-D fiber along each axis). Preserves the entry
// multiset exactly and yields a tensor nondecreasing along every axis.
// axis_order defaults to ascending (0..d-1).
CdfEstimate alternating_sort(CdfEstimate estimate,
                             std::vector<int> axis_order = {});

CdfEstimate clip_unit(CdfEstimate estimate);

// A one-dimensional CDF as jump locations and right-continuous values.
struct Cdf1D {
  std::vector<double> xs;
  std::vector<double> ps;
};

Cdf1D ecdf1d(std::vector<double> values);
Cdf1D make_cdf1d(const CdfEstimate& estimate);  // requires d == 1

// Linear interpolation of the inverse CDF between bracketing jumps.
double quantile(const Cdf1D& cdf, double p);

// d=1 sample-driven grid: sorted unique sample values.
EvalGrid build_grid_from_samples(std::vector<double> values);
// Equispaced grid per dimension, endpoints included; resolution >= 2.
EvalGrid build_grid_uniform(const std::vector<double>& lower,
                            const std::vector<double>& upper,
                            const std::vector<int>& resolution);

}  // namespace cvmdl
