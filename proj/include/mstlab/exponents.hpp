#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mstlab/operator.hpp"
#include "mstlab/pool.hpp"
#include "mstlab/wbp.hpp"

namespace mstlab {

struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

// Direct estimator of the moment-growth function on a fixed path pool:
//   m_hat(s) = N ( B^-1 sum_b ||Pi_n^(b)||^s )^(1/n),
// evaluated in the log domain by a log-sum-exp reduction of s log||Pi_n||,
// with a delta-method standard error.
Estimate estimate_m_direct(const PathProductPool& pool, double s);

// Same pool, but the per-level factorization ||Pi_n|| = prod_k ||C^(k)||
// (exact for similarity and diagonal families): the level means are averaged
// in the log domain, which tames the variance of high moments. Falls back to
// the direct estimator when the pool carries no per-step factors.
Estimate estimate_m_pooled(const PathProductPool& pool, double s);

struct MCurvePoint {
  double s = 0.0;
  double m_hat = 0.0;
  double se = 0.0;
};

struct ExponentReport {
  std::optional<double> alpha;          // smaller root of m(s) = 1
  std::optional<double> beta;           // larger root of m(s) = 1
  std::optional<double> m_prime_beta;   // central difference with Richardson step
  std::optional<double> s_infinity_estimate;  // user hint when provided
  std::string s_infinity_note;          // "unbounded-within-scan" otherwise
  std::vector<MCurvePoint> curve;
  std::string estimator;                // "per-level" or "full-product"
};

// Scans [s_lo, s_hi], then bisects m_hat(s) = 1 on each side of the scanned
// minimum to `tol` in s. Either root may be absent (reported as such).
ExponentReport find_exponents(const PathProductPool& pool, double s_lo, double s_hi,
                              double step, double tol = 1e-3);

// Same scan/bisection on N kappa(s) from the discretized transfer operator.
// For general matrices the finite-n product estimator sits above the n->inf
// limit (subadditivity), while the operator eigenvalue targets the limit
// directly; entrywise log-convexity in s keeps the scanned curve convex, so
// the bracketing logic is identical.
ExponentReport find_exponents_operator(const OperatorEnsemble& ensemble, const SphereGrid& grid,
                                       double s_lo, double s_hi, double step, double tol = 1e-3,
                                       int threads = 0);

// l_beta = int_S E[ e_beta((yC)~) |yC|^beta log|yC| ] nu_beta(dy), by
// nu-weighted quadrature over the grid of the ensemble average, reusing the
// operator's own draws. Positive under a valid beta; a value <= 0 beyond
// 3 SE raises ConsistencyError.
Estimate compute_l_beta(const OperatorEnsemble& ensemble, const SphereGrid& grid,
                        const SpectralSolution& solution, double beta, int threads = 0);

// m_beta = N E[ ||C||^beta log||C|| ] for similarity families.
Estimate compute_m_beta_similarity(const SamplePool& pool, double beta);

}  // namespace mstlab
