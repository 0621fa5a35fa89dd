#include "cvmdl/surrogate.hpp"

#include <limits>
#include <stdexcept>

namespace cvmdl {

Eigen::MatrixXd build_design(const JointBatch& batch, const std::vector<int>& subset) {
  int d_s = 0;
  for (int i : subset) d_s += static_cast<int>(batch.x.at(static_cast<std::size_t>(i - 1)).cols());
  Eigen::MatrixXd design(batch.count, d_s + 1);
  design.col(0).setOnes();
  int col = 1;
  for (int i : subset) {
    const auto& xi = batch.x[static_cast<std::size_t>(i - 1)];
    design.block(0, col, batch.count, xi.cols()) = xi;
    col += static_cast<int>(xi.cols());
  }
  return design;
}

SurrogateCoefficients fit_surrogate(const JointBatch& batch,
                                    const std::vector<int>& subset,
                                    double rank_tolerance) {
  if (subset.empty()) throw std::invalid_argument("subset must be nonempty");
  Eigen::MatrixXd design = build_design(batch, subset);
  if (batch.count < design.cols() + 1)
    throw std::invalid_argument("batch too small to fit surrogate (need d_S + 2 rows)");
  if (!design.allFinite() || !batch.y.allFinite())
    throw std::invalid_argument("non-finite inputs to surrogate fit");

  Eigen::BDCSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (rank_tolerance < 0.0) {
    rank_tolerance = static_cast<double>(std::max(design.rows(), design.cols())) *
                     std::numeric_limits<double>::epsilon();
  }
  svd.setThreshold(rank_tolerance);

  SurrogateCoefficients out;
  out.subset = subset;
  out.rank = static_cast<int>(svd.rank());
  out.matrix = svd.solve(batch.y);
  return out;
}

Eigen::VectorXd apply_surrogate(const SurrogateCoefficients& coeffs,
                                const Eigen::VectorXd& x_subset) {
  if (x_subset.size() + 1 != coeffs.matrix.rows())
    throw std::invalid_argument("surrogate input dimension mismatch");
  Eigen::VectorXd aug(x_subset.size() + 1);
  aug(0) = 1.0;
  aug.tail(x_subset.size()) = x_subset;
  return coeffs.matrix.transpose() * aug;
}

Eigen::MatrixXd apply_surrogate_rows(const SurrogateCoefficients& coeffs,
                                     const Eigen::MatrixXd& x_subset) {
  if (x_subset.cols() + 1 != coeffs.matrix.rows())
    throw std::invalid_argument("surrogate input dimension mismatch");
  Eigen::MatrixXd out = x_subset * coeffs.matrix.bottomRows(x_subset.cols());
  out.rowwise() += coeffs.matrix.row(0);
  return out;
}

Eigen::MatrixXd surrogate_values(const JointBatch& batch,
                                 const SurrogateCoefficients& coeffs) {
  Eigen::MatrixXd design = build_design(batch, coeffs.subset);
  return design * coeffs.matrix;
}

}  // namespace cvmdl
