#pragma once

#include <cstdint>
#include <vector>

#include "mstlab/model.hpp"

namespace mstlab {

// Immutable, seeded bank of weight samples used as common random numbers by
// every estimator. Entry b is drawn from the substream keyed by (seed, b), so
// regeneration from the same (spec, seed, B) is bit-exact and independent of
// the thread count used to build it.
class SamplePool {
 public:
  SamplePool(const ModelSpec& spec, std::uint64_t seed, std::size_t size, int threads = 0);

  const ModelSpec& spec() const { return spec_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t size() const { return samples_.size(); }
  const WeightSample& operator[](std::size_t b) const { return samples_[b]; }
  const std::vector<WeightSample>& samples() const { return samples_; }
  std::uint64_t resample_count() const { return resamples_; }

  // Pool average of N*E[C] with C = C_I, I uniform: (1/B) sum_b sum_i C_{b,i}.
  Eigen::MatrixXd mean_weight_sum() const;
  Eigen::VectorXd mean_q() const;

 private:
  ModelSpec spec_;
  std::uint64_t seed_;
  std::vector<WeightSample> samples_;
  std::uint64_t resamples_ = 0;
};

struct EigenvectorSolution {
  Eigen::VectorXd r;
  bool solved = false;      // false: system singular and E[Q] not in range
  bool non_unique = false;  // singular system with consistent right-hand side
  double smallest_singular_value = 0.0;
  double largest_singular_value = 0.0;
};

// Solves r = N Ehat[C] r + Ehat[Q] with pool-averaged expectations. The
// system matrix counts as singular when smin < 1e-10 * smax.
EigenvectorSolution solve_eigenvector(const ModelSpec& spec, const SamplePool& pool);

// Frobenius norm of Sigma - N Ehat[C Sigma C^T].
double covariance_residual(const ModelSpec& spec, const SamplePool& pool,
                           const Eigen::MatrixXd& sigma);

// Same residual plus the Monte Carlo scale of the estimate: `se` is the
// Frobenius-combined standard error of the pool average, so residual <= 3 se
// is the natural pass criterion when Sigma solves the covariance identity.
struct CovarianceCheck {
  double residual = 0.0;
  double se = 0.0;
};
CovarianceCheck covariance_residual_check(const ModelSpec& spec, const SamplePool& pool,
                                          const Eigen::MatrixXd& sigma);

struct ContractionConditions {
  double z1 = 0.0;  // Ehat sum_k ||C_k||^2
  double z2 = 0.0;  // sum_k || Ehat[C_k^T C_k] ||
  double z3 = 0.0;  // || sum_k Ehat[C_k^T C_k] ||
};

ContractionConditions contraction_conditions(const ModelSpec& spec, const SamplePool& pool);

}  // namespace mstlab
