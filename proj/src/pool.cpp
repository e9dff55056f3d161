#include "mstlab/pool.hpp"

#include <atomic>
#include <cmath>

#include "mstlab/common.hpp"

namespace mstlab {

SamplePool::SamplePool(const ModelSpec& spec, std::uint64_t seed, std::size_t size, int threads)
    : spec_(spec), seed_(seed), samples_(size) {
  spec_.validate();
  std::atomic<std::uint64_t> rejected{0};
  parallel_blocks(
      size,
      [&](std::size_t, std::size_t lo, std::size_t hi) {
        std::uint64_t local = 0;
        for (std::size_t b = lo; b < hi; ++b) {
          RngStream rng = RngStream::keyed(seed_, b, /*salt=*/0x706f6f6cull);  // "pool"
          samples_[b] = sample_weights(spec_, rng, &local);
        }
        rejected.fetch_add(local);
      },
      threads);
  resamples_ = rejected.load();
}

Eigen::MatrixXd SamplePool::mean_weight_sum() const {
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(spec_.d, spec_.d);
  for (const auto& w : samples_)
    for (const auto& c : w.C) acc += c;
  return acc / double(size());
}

Eigen::VectorXd SamplePool::mean_q() const {
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(spec_.d);
  for (const auto& w : samples_) acc += w.Q;
  return acc / double(size());
}

EigenvectorSolution solve_eigenvector(const ModelSpec& spec, const SamplePool& pool) {
  if (pool.size() == 0) throw UsageError("solve_eigenvector: empty pool");
  const int d = spec.d;
  Eigen::MatrixXd sys = Eigen::MatrixXd::Identity(d, d) - pool.mean_weight_sum();
  Eigen::VectorXd rhs = pool.mean_q();

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(sys, Eigen::ComputeFullU | Eigen::ComputeFullV);
  EigenvectorSolution out;
  out.largest_singular_value = svd.singularValues()(0);
  out.smallest_singular_value = svd.singularValues()(d - 1);

  // Scale-free singularity test; the fallback absolute floor catches systems
  // that vanish entirely (N E[C] = Id holds per sample for some families).
  const double scale = std::max(out.largest_singular_value,
                                1e-3 * (1.0 + pool.mean_weight_sum().norm()));
  const bool singular = out.smallest_singular_value < 1e-10 * scale;
  if (!singular) {
    out.r = svd.solve(rhs);
    out.solved = true;
    return out;
  }
  // Minimum-norm least-squares solution; accept it only if it reproduces the
  // right-hand side (E[Q] inside the range of the singular system).
  Eigen::VectorXd r = svd.setThreshold(1e-10).solve(rhs);
  double resid = (sys * r - rhs).norm();
  double rhs_scale = std::max(1.0, rhs.norm());
  if (resid <= 1e-8 * rhs_scale) {
    out.r = r;
    out.solved = true;
    out.non_unique = true;
  } else {
    out.r = Eigen::VectorXd::Zero(d);
    out.solved = false;
  }
  return out;
}

double covariance_residual(const ModelSpec& spec, const SamplePool& pool,
                           const Eigen::MatrixXd& sigma) {
  return covariance_residual_check(spec, pool, sigma).residual;
}

CovarianceCheck covariance_residual_check(const ModelSpec& spec, const SamplePool& pool,
                                          const Eigen::MatrixXd& sigma) {
  if (sigma.rows() != spec.d || sigma.cols() != spec.d)
    throw UsageError("covariance_residual: Sigma has wrong dimensions");
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-9)
    throw UsageError("covariance_residual: Sigma must be symmetric");
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(spec.d, spec.d);
  Eigen::MatrixXd acc2 = Eigen::MatrixXd::Zero(spec.d, spec.d);
  for (const auto& w : pool.samples()) {
    Eigen::MatrixXd term = Eigen::MatrixXd::Zero(spec.d, spec.d);
    for (const auto& c : w.C) term += c * sigma * c.transpose();
    acc += term;
    acc2 += term.cwiseProduct(term);
  }
  const double b_count = double(pool.size());
  acc /= b_count;  // equals N * Ehat[C Sigma C^T]
  acc2 /= b_count;
  CovarianceCheck out;
  out.residual = (sigma - acc).norm();
  // Entrywise variances of the pool average, combined in Frobenius norm.
  double var_sum = (acc2 - acc.cwiseProduct(acc)).cwiseMax(0.0).sum();
  out.se = std::sqrt(var_sum / b_count);
  return out;
}

ContractionConditions contraction_conditions(const ModelSpec& spec, const SamplePool& pool) {
  if (pool.size() == 0) throw UsageError("contraction_conditions: empty pool");
  ContractionConditions z;
  std::vector<Eigen::MatrixXd> gram(spec.N, Eigen::MatrixXd::Zero(spec.d, spec.d));
  long double z1 = 0.0L;
  for (const auto& w : pool.samples()) {
    for (int k = 0; k < spec.N; ++k) {
      Eigen::MatrixXd g = w.C[k].transpose() * w.C[k];
      gram[k] += g;
      // ||C||^2 = largest eigenvalue of C^T C.
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g, Eigen::EigenvaluesOnly);
      z1 += es.eigenvalues()(spec.d - 1);
    }
  }
  z.z1 = double(z1 / pool.size());
  Eigen::MatrixXd total = Eigen::MatrixXd::Zero(spec.d, spec.d);
  for (int k = 0; k < spec.N; ++k) {
    gram[k] /= double(pool.size());
    total += gram[k];
    z.z2 += operator_norm(gram[k]);
  }
  z.z3 = operator_norm(total);
  return z;
}

}  // namespace mstlab
