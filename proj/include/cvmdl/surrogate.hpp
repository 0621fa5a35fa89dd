#pragma once

#include <Eigen/Dense>
#include <vector>

#include "cvmdl/ensemble.hpp"

namespace cvmdl {

// Least-squares linear approximator of the high-fidelity output from
// (1, X_S). matrix is (d_S + 1) x d; first row holds the intercepts.
struct SurrogateCoefficients {
  std::vector<int> subset;
  Eigen::MatrixXd matrix;
  int rank = 0;
};

// m x (d_S + 1) design matrix [1, X_S] from a joint batch.
Eigen::MatrixXd build_design(const JointBatch& batch, const std::vector<int>& subset);

// Minimum-norm least-squares fit via SVD. Requires batch.count >= d_S + 2.
SurrogateCoefficients fit_surrogate(const JointBatch& batch,
                                    const std::vector<int>& subset,
                                    double rank_tolerance = -1.0);

Eigen::VectorXd apply_surrogate(const SurrogateCoefficients& coeffs,
                                const Eigen::VectorXd& x_subset);

// Row-wise application: returns an n x d matrix of predictions.
Eigen::MatrixXd apply_surrogate_rows(const SurrogateCoefficients& coeffs,
                                     const Eigen::MatrixXd& x_subset);

// Predictions on the exploration rows the fit used.
Eigen::MatrixXd surrogate_values(const JointBatch& batch,
                                 const SurrogateCoefficients& coeffs);

}  // namespace cvmdl
