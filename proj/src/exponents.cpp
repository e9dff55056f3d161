#include "mstlab/exponents.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mstlab/common.hpp"

namespace mstlab {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log( sum_b exp(s * x_b) ), skipping -inf entries; returns the count kept.
std::pair<double, std::size_t> log_sum_exp(const std::vector<double>& x, double s) {
  double mx = kNegInf;
  for (double v : x)
    if (v != kNegInf) mx = std::max(mx, s * v);
  if (mx == kNegInf) return {kNegInf, 0};
  long double acc = 0.0L;
  std::size_t kept = 0;
  for (double v : x) {
    if (v == kNegInf) continue;
    acc += std::exp(s * v - mx);
    ++kept;
  }
  return {mx + double(std::log(acc)), kept};
}

// Relative variance of the empirical mean of exp(s x): (r - 1)/B with
// r = B * sum exp(2sx) / (sum exp(sx))^2, computed in the log domain.
double rel_var_of_mean(const std::vector<double>& x, double s, std::size_t b_total) {
  auto [l1, k1] = log_sum_exp(x, s);
  auto [l2, k2] = log_sum_exp(x, 2.0 * s);
  if (k1 == 0) return 0.0;
  double log_r = l2 - 2.0 * l1 + std::log(double(b_total));
  double r = std::exp(log_r);
  return std::max(0.0, (r - 1.0) / double(b_total));
}

}  // namespace

Estimate estimate_m_direct(const PathProductPool& pool, double s) {
  if (pool.size() < 100) throw UsageError("estimate_m_direct: pool must have B >= 100");
  if (s < 0) throw UsageError("estimate_m_direct: s must be >= 0");
  const double b_count = double(pool.size());
  const double n = double(pool.length);
  auto [lse, kept] = log_sum_exp(pool.log_norms, s);
  if (kept == 0) throw EstimationError("estimate_m_direct: all path products have zero norm");
  double log_mean = lse - std::log(b_count);
  Estimate est;
  est.value = double(pool.spec.N) * std::exp(log_mean / n);
  est.se = est.value / n * std::sqrt(rel_var_of_mean(pool.log_norms, s, pool.size()));
  return est;
}

Estimate estimate_m_pooled(const PathProductPool& pool, double s) {
  if (!pool.has_steps()) return estimate_m_direct(pool, s);
  if (s < 0) throw UsageError("estimate_m_pooled: s must be >= 0");
  const double b_count = double(pool.size());
  const double n = double(pool.length);
  long double log_mean_sum = 0.0L;
  long double var_sum = 0.0L;
  for (const auto& level : pool.step_log_norms) {
    auto [lse, kept] = log_sum_exp(level, s);
    if (kept == 0) throw EstimationError("estimate_m_pooled: zero-norm level");
    log_mean_sum += lse - std::log(b_count);
    var_sum += rel_var_of_mean(level, s, pool.size());
  }
  Estimate est;
  est.value = double(pool.spec.N) * std::exp(double(log_mean_sum) / n);
  est.se = est.value / n * std::sqrt(double(var_sum));
  return est;
}

namespace {

ExponentReport scan_exponents(const std::function<Estimate(double)>& m_at, double s_lo,
                              double s_hi, double step, double tol,
                              const std::string& estimator,
                              const std::optional<double>& s_max_hint) {
  if (!(s_lo > 0) || !(s_hi > s_lo) || !(step > 0))
    throw UsageError("find_exponents: need 0 < s_lo < s_hi and step > 0");
  if (s_max_hint && s_hi >= *s_max_hint)
    throw ConfigError("find_exponents: scan range exceeds the declared s-max-hint");

  ExponentReport rep;
  rep.estimator = estimator;

  std::vector<double> grid;
  for (double s = s_lo; s < s_hi + 0.5 * step; s += step) grid.push_back(std::min(s, s_hi));
  if (grid.back() < s_hi) grid.push_back(s_hi);

  std::size_t min_idx = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    Estimate e = m_at(grid[i]);
    rep.curve.push_back({grid[i], e.value, e.se});
    if (e.value < rep.curve[min_idx].m_hat) min_idx = i;
  }

  auto bisect = [&](double lo, double hi, bool decreasing) {
    // Root of m_hat(s) - 1; `decreasing` tells which side is above 1.
    while (hi - lo > tol) {
      double mid = 0.5 * (lo + hi);
      double v = m_at(mid).value;
      bool above = v > 1.0;
      if (above == decreasing)
        lo = mid;
      else
        hi = mid;
    }
    return 0.5 * (lo + hi);
  };

  const auto& curve = rep.curve;
  // alpha: first crossing from above on [s_lo, argmin].
  if (curve.front().m_hat > 1.0 && curve[min_idx].m_hat <= 1.0) {
    std::size_t i = 0;
    while (curve[i + 1].m_hat > 1.0) ++i;
    rep.alpha = bisect(curve[i].s, curve[i + 1].s, /*decreasing=*/true);
  }
  // beta: crossing back through 1 on [argmin, s_hi].
  if (curve[min_idx].m_hat <= 1.0 && curve.back().m_hat > 1.0) {
    std::size_t i = min_idx;
    while (curve[i + 1].m_hat <= 1.0) ++i;
    rep.beta = bisect(curve[i].s, curve[i + 1].s, /*decreasing=*/false);
  }

  if (rep.beta) {
    // Central difference with one Richardson step; h matches the bisection scale.
    const double h = 1e-2;
    auto diff = [&](double hh) {
      return (m_at(*rep.beta + hh).value - m_at(*rep.beta - hh).value) / (2.0 * hh);
    };
    double d1 = diff(h), d2 = diff(0.5 * h);
    rep.m_prime_beta = (4.0 * d2 - d1) / 3.0;
  }

  if (s_max_hint)
    rep.s_infinity_estimate = *s_max_hint;
  else
    rep.s_infinity_note = "unbounded-within-scan";
  return rep;
}

}  // namespace

ExponentReport find_exponents(const PathProductPool& pool, double s_lo, double s_hi,
                              double step, double tol) {
  return scan_exponents([&](double s) { return estimate_m_pooled(pool, s); }, s_lo, s_hi, step,
                        tol, pool.has_steps() ? "per-level" : "full-product",
                        pool.spec.s_max_hint);
}

ExponentReport find_exponents_operator(const OperatorEnsemble& ensemble, const SphereGrid& grid,
                                       double s_lo, double s_hi, double step, double tol,
                                       int threads) {
  auto m_at = [&](double s) {
    TransferOperator op(ensemble, grid, s, threads);
    SpectralSolution sol = power_iterate(op);
    Estimate e;
    e.value = double(ensemble.spec.N) * sol.kappa;
    // Rows of the operator come from independent banks (one per antipodal
    // pair), so the spread of the per-row Rayleigh quotients gives the Monte
    // Carlo scale of kappa.
    Eigen::VectorXd quot = op.apply(sol.e).cwiseQuotient(sol.e);
    double mean = quot.mean();
    double var = (quot.array() - mean).square().sum() / std::max(1, grid.size() - 1);
    e.se = double(ensemble.spec.N) * std::sqrt(var / std::max(1, grid.size() / 2));
    return e;
  };
  return scan_exponents(m_at, s_lo, s_hi, step, tol, "operator", ensemble.spec.s_max_hint);
}

Estimate compute_l_beta(const OperatorEnsemble& ensemble, const SphereGrid& grid,
                        const SpectralSolution& solution, double beta, int threads) {
  if (solution.grid_size != grid.size() || solution.grid_dim != grid.dim())
    throw UsageError("compute_l_beta: solution does not match the grid");
  if (ensemble.draws_per_row == 0) throw UsageError("compute_l_beta: empty ensemble");

  const int g_count = grid.size();
  const int n_branches = ensemble.spec.N;

  // Per-index integrand integrated over the nu-weighted grid, on the same
  // draws the operator was built from; blocked for a robust standard error.
  // The mirrored row of each antipodal pair has an identical integrand (the
  // eigenfunction is exactly symmetric), so canonical rows carry both
  // nu-weights.
  BlockSums blocks = blocked_sums(
      ensemble.draws_per_row, 32,
      [&](std::size_t b) {
        Eigen::VectorXd v(grid.dim());
        double contrib = 0.0;
        for (int g = 0; g < g_count; ++g) {
          int ga = grid.antipode(g);
          if (ga < g) continue;
          WeightSample w = ensemble.draw(std::size_t(g), b);
          double node_term = 0.0;
          for (int i = 0; i < n_branches; ++i) {
            v.noalias() = w.C[i].transpose() * grid.node(g);
            double norm = v.norm();
            if (norm == 0.0) continue;
            node_term += solution.e(grid.cell_of(v)) * std::pow(norm, beta) * std::log(norm);
          }
          double nu_weight = solution.nu(g) + (ga != g ? solution.nu(ga) : 0.0);
          contrib += nu_weight * node_term / n_branches;
        }
        return contrib;
      },
      threads);

  Estimate est;
  est.value = blocks.total_mean();
  est.se = blocks.mean_se();
  if (est.value <= 0.0 && -est.value > 3.0 * est.se)
    throw ConsistencyError("l_beta estimate is negative beyond 3 SE (" +
                           std::to_string(est.value) + " +- " + std::to_string(est.se) +
                           "); wrong beta or bad spectral solution");
  return est;
}

Estimate compute_m_beta_similarity(const SamplePool& pool, double beta) {
  if (pool.spec().family != Family::kSimilarity)
    throw UsageError("compute_m_beta_similarity: spec family must be similarity");
  if (pool.size() == 0) throw UsageError("compute_m_beta_similarity: empty pool");
  long double acc = 0.0L, acc2 = 0.0L;
  for (const auto& w : pool.samples()) {
    double v = 0.0;
    for (const auto& c : w.C) {
      double t = operator_norm(c);
      v += std::pow(t, beta) * std::log(t);
    }
    acc += v;
    acc2 += double(v) * double(v);
  }
  const double b_count = double(pool.size());
  Estimate est;
  est.value = double(acc / b_count);  // already N * Ehat[...]: the sum runs over branches
  double var = std::max(0.0, double(acc2) / b_count - est.value * est.value);
  est.se = std::sqrt(var / b_count);
  return est;
}

}  // namespace mstlab
