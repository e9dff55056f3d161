#include "mstlab/constants.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mstlab/rng.hpp"

namespace mstlab {

namespace {

std::string inputs_hash(const SamplePool& pool, double beta, double kappa,
                        const FixedPointSamples& r) {
  std::uint64_t h = pool.spec().hash();
  h = fnv1a64(&beta, sizeof beta, h);
  h = fnv1a64(&kappa, sizeof kappa, h);
  std::uint64_t seed = pool.seed();
  h = fnv1a64(&seed, sizeof seed, h);
  std::uint64_t sizes[2] = {pool.size(), std::uint64_t(r.cols())};
  h = fnv1a64(sizes, sizeof sizes, h);
  return hex64(h);
}

// One paired draw: weights from pool entry b, branch arguments resampled with
// replacement from the fixed-point array. Returns the per-branch images
// u_i = C_i R_{j_i} and the total sum_i u_i + Q.
struct PairedDraw {
  Eigen::MatrixXd branch_images;  // d x N
  Eigen::VectorXd total;
};

PairedDraw paired_draw(const SamplePool& pool, const FixedPointSamples& r, std::size_t b,
                       std::uint64_t seed, std::uint64_t salt) {
  const WeightSample& w = pool[b % pool.size()];
  const int d = static_cast<int>(r.rows());
  const int n = static_cast<int>(w.C.size());
  RngStream rng = RngStream::keyed(seed, b, salt);
  PairedDraw out;
  out.branch_images.resize(d, n);
  out.total = w.Q;
  for (int i = 0; i < n; ++i) {
    auto j = static_cast<Eigen::Index>(rng.below(std::uint64_t(r.cols())));
    out.branch_images.col(i).noalias() = w.C[i] * r.col(j);
    out.total += out.branch_images.col(i);
  }
  return out;
}

double combine_se(double value, double num_se, double num, double den_se, double den) {
  if (num == 0.0) return std::abs(num_se / den);
  return std::abs(value) * std::sqrt((num_se / num) * (num_se / num) +
                                     (den_se / den) * (den_se / den));
}

}  // namespace

ConstantKResult constant_K(const SamplePool& pool, const SphereGrid& grid,
                           const SpectralSolution& solution, const Estimate& l_beta,
                           double beta, const FixedPointSamples& r_samples,
                           const std::vector<Eigen::VectorXd>& directions,
                           std::uint64_t seed, int threads) {
  if (!(l_beta.value > 0)) throw UsageError("constant_K: l_beta must be positive");
  if (r_samples.cols() == 0) throw UsageError("constant_K: no fixed-point samples");
  if (solution.grid_size != grid.size()) throw UsageError("constant_K: solution/grid mismatch");
  const std::size_t draws = pool.size();
  const int g_count = grid.size();
  const int n_branches = pool.spec().N;

  // nu-weighted quadrature of the projected bracket, one value per pairing.
  RobustMean quad = median_of_means(
      draws,
      [&](std::size_t b) {
        PairedDraw pd = paired_draw(pool, r_samples, b, seed, /*salt=*/0x634b5f71ull);
        double acc = 0.0;
        for (int g = 0; g < g_count; ++g) {
          double nu_g = solution.nu(g);
          if (nu_g == 0.0) continue;
          const auto& y = grid.node(g);
          double bracket = std::pow(std::abs(y.dot(pd.total)), beta);
          for (int i = 0; i < n_branches; ++i)
            bracket -= std::pow(std::abs(y.dot(pd.branch_images.col(i))), beta);
          acc += nu_g * bracket;
        }
        return acc;
      },
      32, threads);

  // Radial analog with vector norms (the sigma(S)-type bracket).
  RobustMean radial = median_of_means(
      draws,
      [&](std::size_t b) {
        PairedDraw pd = paired_draw(pool, r_samples, b, seed, /*salt=*/0x634b5f71ull);
        double bracket = std::pow(pd.total.norm(), beta);
        for (int i = 0; i < n_branches; ++i)
          bracket -= std::pow(pd.branch_images.col(i).norm(), beta);
        return bracket;
      },
      32, threads);

  const std::string hash = inputs_hash(pool, beta, solution.kappa, r_samples);
  const double denom = 2.0 * beta * l_beta.value;

  ConstantKResult out;
  for (const auto& x : directions) {
    DirectionalConstant dc;
    dc.direction = x;
    double e_x = solution.e(grid.cell_of(x));
    dc.estimate.method = "implicit-renewal-K";
    dc.estimate.inputs_hash = hash;
    dc.estimate.value = e_x * quad.value / denom;
    double num_se = e_x * quad.se / (2.0 * beta);
    double num = e_x * quad.value / (2.0 * beta);
    dc.estimate.se = combine_se(dc.estimate.value, num_se, num, l_beta.se, l_beta.value);
    out.directional.push_back(std::move(dc));
  }
  out.radial.method = "implicit-renewal-K";
  out.radial.inputs_hash = hash;
  out.radial.value = radial.value / denom;
  out.radial.se = combine_se(out.radial.value, radial.se / (2.0 * beta),
                             radial.value / (2.0 * beta), l_beta.se, l_beta.value);
  return out;
}

ConstantEstimate sigma_S(const SamplePool& pool, const Estimate& m_beta, double beta,
                         const FixedPointSamples& r_samples, std::uint64_t seed, int threads) {
  if (pool.spec().family != Family::kSimilarity)
    throw UsageError("sigma_S: spec family must be similarity");
  if (!(m_beta.value > 0)) throw UsageError("sigma_S: m_beta must be positive");
  if (r_samples.cols() == 0) throw UsageError("sigma_S: no fixed-point samples");
  const int n_branches = pool.spec().N;

  RobustMean bracket = median_of_means(
      pool.size(),
      [&](std::size_t b) {
        PairedDraw pd = paired_draw(pool, r_samples, b, seed, /*salt=*/0x73675f71ull);
        double v = std::pow(pd.total.norm(), beta);
        for (int i = 0; i < n_branches; ++i)
          v -= std::pow(pd.branch_images.col(i).norm(), beta);
        return v;
      },
      32, threads);

  ConstantEstimate out;
  out.method = "sigma-S";
  out.inputs_hash = inputs_hash(pool, beta, m_beta.value, r_samples);
  out.value = bracket.value / m_beta.value;
  out.se = combine_se(out.value, bracket.se, bracket.value, m_beta.se, m_beta.value);
  return out;
}

Beta2Result beta2_constant(const SamplePool& pool, const SphereGrid& grid,
                           const SpectralSolution& solution, const Estimate& l2,
                           double beta_hat, const std::vector<Eigen::VectorXd>& directions,
                           int threads) {
  if (std::abs(beta_hat - 2.0) > 0.05)
    throw UsageError("beta2_constant: estimated beta " + std::to_string(beta_hat) +
                     " is not within 0.05 of 2");
  if (!(l2.value > 0)) throw UsageError("beta2_constant: l_2 must be positive");
  const int g_count = grid.size();

  // E Q = 0 check and degeneracy flag, from the pool's immigration draws.
  Eigen::VectorXd q_mean = pool.mean_q();
  long double q_sq = 0.0L;
  for (const auto& w : pool.samples()) q_sq += w.Q.squaredNorm();
  double var_q = double(q_sq / pool.size()) - q_mean.squaredNorm();
  double q_se = std::sqrt(std::max(var_q, 0.0) / double(pool.size()));
  if (q_mean.norm() > 3.0 * std::max(q_se, 1e-12) && var_q > 0)
    throw UsageError("beta2_constant: E Q = 0 is violated beyond sampling error");

  Beta2Result out;
  if (!(var_q > 0)) {
    out.degenerate_q = true;
    for (const auto& x : directions) {
      DirectionalConstant dc;
      dc.direction = x;
      dc.estimate.method = "beta2";
      dc.estimate.inputs_hash = inputs_hash(pool, 2.0, solution.kappa,
                                            FixedPointSamples(pool.spec().d, 0));
      out.directional.push_back(std::move(dc));
    }
    return out;
  }

  BlockSums blocks = blocked_sums(
      pool.size(), 32,
      [&](std::size_t b) {
        const auto& q = pool[b].Q;
        double acc = 0.0;
        for (int g = 0; g < g_count; ++g) {
          double yq = grid.node(g).dot(q);
          acc += solution.nu(g) * yq * yq;
        }
        return acc;
      },
      threads);
  out.quadrature = blocks.total_mean();
  out.quadrature_se = blocks.mean_se();

  const std::string hash =
      inputs_hash(pool, 2.0, solution.kappa, FixedPointSamples(pool.spec().d, 0));
  for (const auto& x : directions) {
    DirectionalConstant dc;
    dc.direction = x;
    double e_x = solution.e(grid.cell_of(x));
    dc.estimate.method = "beta2";
    dc.estimate.inputs_hash = hash;
    dc.estimate.value = e_x * out.quadrature / (4.0 * l2.value);
    double num = e_x * out.quadrature / 4.0;
    double num_se = e_x * out.quadrature_se / 4.0;
    dc.estimate.se = combine_se(dc.estimate.value, num_se, num, l2.se, l2.value);
    out.directional.push_back(std::move(dc));
  }
  return out;
}

namespace {

// s * integral of t^{s-1} (P_A(t) - N P_B(t)) dt from the empirical survival
// functions, with an exact piece below the sample range and a Pareto
// extrapolation above it whose magnitude is folded into the error.
struct TailIntegral {
  double value = 0.0;
  double truncation = 0.0;
};

TailIntegral tail_difference_integral(const std::vector<double>& a_sorted,
                                      const std::vector<double>& b_sorted, double s, int n_mult,
                                      std::size_t points) {
  double min_pos = std::numeric_limits<double>::infinity();
  for (double v : a_sorted)
    if (v > 0) {
      min_pos = std::min(min_pos, v);
      break;
    }
  for (double v : b_sorted)
    if (v > 0) {
      min_pos = std::min(min_pos, v);
      break;
    }
  if (!std::isfinite(min_pos)) return {};  // all mass at zero on both sides

  auto quantile = [](const std::vector<double>& v, double q) {
    return v[std::min(v.size() - 1, std::size_t(q * double(v.size())))];
  };
  double hi = std::max(quantile(a_sorted, 0.9999), quantile(b_sorted, 0.9999));
  double lo = 0.5 * min_pos;
  if (!(hi > lo)) hi = lo * 2.0;

  // Exact below lo: both survivals are 1 there.
  TailIntegral out;
  out.value = (1.0 - double(n_mult)) * std::pow(lo, s);

  auto f = [&](double t) {
    return s * std::pow(t, s - 1.0) *
           (survival_at(a_sorted, t) - double(n_mult) * survival_at(b_sorted, t));
  };
  double ratio = std::pow(hi / lo, 1.0 / double(points - 1));
  double prev_t = lo, prev_f = f(lo);
  for (std::size_t i = 1; i < points; ++i) {
    double t = lo * std::pow(ratio, double(i));
    double ft = f(t);
    out.value += 0.5 * (prev_f + ft) * (t - prev_t);
    prev_t = t;
    prev_f = ft;
  }

  // Pareto continuation of each survival beyond the grid.
  auto tail_piece = [&](const std::vector<double>& v) {
    double p_end = survival_at(v, hi);
    if (p_end <= 0) return 0.0;
    std::size_t k = std::max<std::size_t>(10, v.size() / 1000);
    double gamma;
    try {
      std::vector<double> copy(v.end() - std::min(v.size(), 4 * k), v.end());
      gamma = hill_estimate(copy, k).value;
    } catch (const EstimationError&) {
      gamma = s + 1.0;  // conservative fallback
    }
    if (gamma <= s + 0.1) gamma = s + 0.1;
    return s * p_end * std::pow(hi, s) / (gamma - s);
  };
  out.truncation = tail_piece(a_sorted) - double(n_mult) * tail_piece(b_sorted);
  out.value += out.truncation;
  return out;
}

}  // namespace

GoldieReport goldie_identity_residual(const SamplePool& pool, double s,
                                      std::optional<double> alpha, std::optional<double> beta,
                                      const FixedPointSamples& r_samples,
                                      const std::vector<Eigen::VectorXd>& directions,
                                      std::uint64_t seed, std::size_t t_grid_points,
                                      int threads, std::size_t n_pairs) {
  GoldieReport rep;
  rep.s = s;
  if (!alpha || !beta || !(s > *alpha) || !(s < *beta)) {
    rep.skipped = true;
    rep.warning = "finiteness window requires alpha < s < beta; identity check skipped";
    return rep;
  }
  if (r_samples.cols() < 64 || pool.size() == 0)
    throw UsageError("goldie_identity_residual: too few samples");
  if (n_pairs == 0) n_pairs = pool.size();
  const auto m_total = static_cast<std::size_t>(r_samples.cols());
  const std::size_t half = m_total / 2;
  const int n_branches = pool.spec().N;

  long double lhs_acc = 0.0L, lhs_var_acc = 0.0L;
  long double rhs_acc = 0.0L, rhs_var_acc = 0.0L;

  for (const auto& y : directions) {
    GoldieDirection gd;
    gd.direction = y;

    // Left side: paired bracket, restricted to the first half of the samples.
    FixedPointSamples first = r_samples.leftCols(static_cast<Eigen::Index>(half));
    RobustMean lhs = median_of_means(
        n_pairs,
        [&](std::size_t b) {
          PairedDraw pd = paired_draw(pool, first, b, seed, /*salt=*/0x676f6c64ull);
          double v = std::pow(std::abs(y.dot(pd.total)), s);
          for (int i = 0; i < n_branches; ++i)
            v -= std::pow(std::abs(y.dot(pd.branch_images.col(i))), s);
          return v;
        },
        32, threads);
    gd.lhs = lhs.value;
    gd.lhs_se = lhs.se;

    // Right side from the second half: |yR| against |yCR| with a fresh
    // uniformly chosen branch weight per sample.
    std::vector<double> proj_r(m_total - half), proj_cr(m_total - half);
    parallel_for(m_total - half, [&](std::size_t m) {
      auto col = static_cast<Eigen::Index>(half + m);
      proj_r[m] = std::abs(y.dot(r_samples.col(col)));
      const WeightSample& w = pool[m % pool.size()];
      RngStream rng = RngStream::keyed(seed, m, /*salt=*/0x67634952ull);
      auto i = static_cast<int>(rng.below(std::uint64_t(n_branches)));
      proj_cr[m] = std::abs(y.dot(w.C[i] * r_samples.col(col)));
    });

    // Blocked SE over 8 sample blocks, then the pooled integral.
    const std::size_t n_se_blocks = 8;
    std::vector<double> block_vals;
    for (std::size_t j = 0; j < n_se_blocks; ++j) {
      std::size_t lo = j * proj_r.size() / n_se_blocks;
      std::size_t hi = (j + 1) * proj_r.size() / n_se_blocks;
      std::vector<double> pa(proj_r.begin() + lo, proj_r.begin() + hi);
      std::vector<double> pb(proj_cr.begin() + lo, proj_cr.begin() + hi);
      std::sort(pa.begin(), pa.end());
      std::sort(pb.begin(), pb.end());
      block_vals.push_back(tail_difference_integral(pa, pb, s, n_branches, t_grid_points).value);
    }
    std::sort(proj_r.begin(), proj_r.end());
    std::sort(proj_cr.begin(), proj_cr.end());
    TailIntegral ti = tail_difference_integral(proj_r, proj_cr, s, n_branches, t_grid_points);
    gd.rhs = ti.value;
    double mean_b = 0;
    for (double v : block_vals) mean_b += v;
    mean_b /= double(block_vals.size());
    long double var_b = 0;
    for (double v : block_vals) var_b += (v - mean_b) * (v - mean_b);
    gd.rhs_se = std::sqrt(double(var_b) / (double(block_vals.size()) *
                                           double(block_vals.size() - 1))) +
                std::abs(ti.truncation);

    lhs_acc += gd.lhs;
    lhs_var_acc += gd.lhs_se * gd.lhs_se;
    rhs_acc += gd.rhs;
    rhs_var_acc += gd.rhs_se * gd.rhs_se;
    rep.per_direction.push_back(std::move(gd));
  }

  const double n_dir = double(rep.per_direction.size());
  rep.lhs = double(lhs_acc) / n_dir;
  rep.rhs = double(rhs_acc) / n_dir;
  rep.lhs_se = std::sqrt(double(lhs_var_acc)) / n_dir;
  rep.rhs_se = std::sqrt(double(rhs_var_acc)) / n_dir;
  return rep;
}

}  // namespace mstlab
