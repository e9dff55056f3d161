#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mstlab/exponents.hpp"
#include "mstlab/operator.hpp"
#include "mstlab/pool.hpp"
#include "mstlab/sphere.hpp"
#include "mstlab/stats.hpp"

namespace mstlab {

struct ConstantEstimate {
  double value = 0.0;
  double se = 0.0;
  std::string method;       // "implicit-renewal-K", "sigma-S", "beta2"
  std::string inputs_hash;  // provenance of (beta, solution, sample sets)
};

// Fixed-point samples as columns of a d x M matrix.
using FixedPointSamples = Eigen::MatrixXd;

struct DirectionalConstant {
  Eigen::VectorXd direction;  // empty for the radial constant
  ConstantEstimate estimate;
};

struct ConstantKResult {
  std::vector<DirectionalConstant> directional;
  ConstantEstimate radial;
};

// Tail constants from the renewal formula: per direction x,
//   K(x) = e_beta(x) / (2 beta l_beta) *
//          int_S E[ |sum_i yC_iR_i + yQ|^beta - sum_i |yC_iR_i|^beta ] nu_beta(dy),
// with the inner expectation paired over (pool weights, fixed-point samples)
// and estimated by median-of-means. The radial constant replaces the
// projected brackets with vector norms. For the N=2 symmetric models this
// tool targets, K(x) is the two-sided limit of t^beta P(|xR| > t).
ConstantKResult constant_K(const SamplePool& pool, const SphereGrid& grid,
                           const SpectralSolution& solution, const Estimate& l_beta,
                           double beta, const FixedPointSamples& r_samples,
                           const std::vector<Eigen::VectorXd>& directions,
                           std::uint64_t seed, int threads = 0);

// sigma(S) = (1/m_beta) E[ |sum_i C_iR_i + Q|^beta - sum_i |C_iR_i|^beta ]
// for similarity families (Pareto amplitude of the radial tail: K_+ = sigma(S)/beta).
ConstantEstimate sigma_S(const SamplePool& pool, const Estimate& m_beta, double beta,
                         const FixedPointSamples& r_samples, std::uint64_t seed,
                         int threads = 0);

struct Beta2Result {
  std::vector<DirectionalConstant> directional;
  double quadrature = 0.0;  // int_S E(yQ)^2 nu_2(dy)
  double quadrature_se = 0.0;
  bool degenerate_q = false;  // Var Q = 0: constants are 0 and flagged
};

// beta = 2 closed form: K(x) = e_2(x)/(4 l_2) * int_S E(yQ)^2 nu_2(dy).
// `beta_hat` must sit within 0.05 of 2 and E Q = 0 within sampling error.
Beta2Result beta2_constant(const SamplePool& pool, const SphereGrid& grid,
                           const SpectralSolution& solution, const Estimate& l2,
                           double beta_hat, const std::vector<Eigen::VectorXd>& directions,
                           int threads = 0);

struct GoldieDirection {
  Eigen::VectorXd direction;
  double lhs = 0.0, lhs_se = 0.0;
  double rhs = 0.0, rhs_se = 0.0;
};

struct GoldieReport {
  double s = 0.0;
  bool skipped = false;
  std::string warning;
  std::vector<GoldieDirection> per_direction;
  double lhs = 0.0, lhs_se = 0.0;  // averaged over directions
  double rhs = 0.0, rhs_se = 0.0;
};

// Moment-difference identity at real s in (alpha, beta): the left side is the
// direct Monte Carlo of E[|sum yC_iR_i + yQ|^s - sum |yC_iR_i|^s]; the right
// side integrates the tail difference s t^{s-1}(P(|yR|>t) - N P(|yCR|>t)) on
// a geometric t-grid with a Pareto tail correction folded into the SE. Both
// sides use disjoint halves of the fixed-point samples. `n_pairs` controls
// the number of left-side pairings (0 = one per pool entry); pool weights are
// recycled modulo the pool size when it exceeds them.
GoldieReport goldie_identity_residual(const SamplePool& pool, double s,
                                      std::optional<double> alpha, std::optional<double> beta,
                                      const FixedPointSamples& r_samples,
                                      const std::vector<Eigen::VectorXd>& directions,
                                      std::uint64_t seed, std::size_t t_grid_points = 200,
                                      int threads = 0, std::size_t n_pairs = 0);

}  // namespace mstlab
