#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "cvmdl/rng.hpp"

namespace cvmdl {

// One model in a coupled multifidelity family. id 0 is the high-fidelity
// model; ids 1..n are the low-fidelity surrogates.
struct ModelSpec {
  int id = 0;
  int dim = 1;
  double cost = 1.0;
};

struct GbmParams {
  double mu = 0.0;
  double sigma = 0.0;
  double s0 = 1.0;
  double horizon = 1.0;
  std::vector<double> dt_levels;  // finest first, one per model
};

struct LinearGaussianParams {
  double mean = 0.0;
  double stddev = 1.0;
  std::vector<double> coefs;       // X_i = coefs[i] * Y + noise
  std::vector<double> noise_stds;  // one per low-fidelity model
};

struct PoolSource {
  Eigen::MatrixXd table;  // columns: y_1..y_d, then x per model
  bool replacement = false;
};

enum class EnsembleKind { GbmExtrema, LinearGaussian, Pool };

struct EnsembleHandle {
  EnsembleKind kind = EnsembleKind::LinearGaussian;
  std::vector<ModelSpec> specs;  // high fidelity first
  std::uint64_t base_seed = 0;
  std::optional<GbmParams> gbm;
  std::optional<LinearGaussianParams> linear_gaussian;
  std::optional<PoolSource> pool;
};

// Validated dimensions/costs plus derived per-subset cost helpers.
struct EnsembleDescriptor {
  int n_lowfid = 0;
  int dim_high = 1;
  std::vector<int> dims;      // dims[0] = d, dims[i] = d_i
  std::vector<double> costs;  // costs[0] = c_0, costs[i] = c_i
  double c_epr = 0.0;

  double subset_cost(const std::vector<int>& subset) const;
  int subset_dim(const std::vector<int>& subset) const;
  // Minimum exploration size: sum of low-fidelity dims + 2.
  int min_exploration() const;
};

EnsembleDescriptor validate(const EnsembleHandle& handle);

// All nonempty subsets of {1..n} in lexicographic order.
std::vector<std::vector<int>> enumerate_subsets(int n_lowfid);

struct JointBatch {
  int count = 0;
  Eigen::MatrixXd y;                // count x d
  std::vector<Eigen::MatrixXd> x;   // per model, count x d_i
  double charged_cost = 0.0;

  void append(const JointBatch& other);
};

struct SubsetBatch {
  std::vector<int> subset;
  int count = 0;
  Eigen::MatrixXd x;  // count x d_S, columns ordered by subset
  double charged_cost = 0.0;
};

// Stateful sampling front end for one run. Handles are immutable; the only
// mutable state is the pool-without-replacement cursor, which is confined
// to the Sampler that owns the run.
class Sampler {
 public:
  explicit Sampler(EnsembleHandle handle);

  const EnsembleDescriptor& descriptor() const { return desc_; }
  const EnsembleHandle& handle() const { return handle_; }

  JointBatch sample_joint(int count, rng::Stream stream);
  SubsetBatch sample_subset(const std::vector<int>& subset, int count,
                            rng::Stream stream);
  // High-fidelity-only draws (ECDF baseline); charges count * c_0.
  Eigen::MatrixXd sample_highfid(int count, rng::Stream stream,
                                 double* charged_cost = nullptr);

  int pool_rows_remaining() const;

 private:
  std::vector<int> take_pool_rows(int count, rng::Stream stream);

  EnsembleHandle handle_;
  EnsembleDescriptor desc_;
  std::vector<int> pool_order_;  // shuffled row order (without replacement)
  std::size_t pool_cursor_ = 0;
};

// Euler-Maruyama path extrema at one time-step level, driven by Brownian
// increments at the finest resolution (coarse increments are sums of fine
// ones, realizing the shared-realization coupling). Extrema include S_0.
std::pair<double, double> gbm_extrema_path(
    const GbmParams& params, double dt,
    const std::vector<double>& fine_increments);

}  // namespace cvmdl
