#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mstlab/common.hpp"

namespace mstlab {

struct HillEstimate {
  double value = 0.0;  // tail index
  double se = 0.0;     // value / sqrt(k)
  std::size_t k = 0;
};

inline std::size_t default_hill_k(std::size_t n) {
  return std::max<std::size_t>(100, n / 100);
}

// Reciprocal mean log-excess over the k-th largest order statistic.
HillEstimate hill_estimate(std::vector<double> samples, std::size_t k);

// OLS slope of log rank/n against log X over the top k order statistics;
// returns the implied tail index (negated slope) with its OLS error.
HillEstimate rank_regression(std::vector<double> samples, std::size_t k);

struct SurvivalCurve {
  std::vector<double> t;
  std::vector<double> p;  // empirical P(X > t), nonincreasing
};

// Empirical survival on a geometric t-grid spanning the sample range.
SurvivalCurve survival_curve(const std::vector<double>& samples, std::size_t points = 200);

// P(X > t) against a sorted sample.
double survival_at(const std::vector<double>& sorted_samples, double t);

struct PlateauEstimate {
  double value = 0.0;                       // median of t^beta * P_hat over the window
  std::vector<double> t, height;            // the full read-off curve
};

// t^beta P(X > t) read off where the empirical survival lies in
// [p_lo, p_hi] (one probability decade in the default setting).
PlateauEstimate plateau_estimate(const std::vector<double>& samples, double beta,
                                 double p_hi = 1e-2, double p_lo = 1e-3);

struct RobustMean {
  double value = 0.0;  // median of block means
  double se = 0.0;     // 1.2533 * sd(block means)/sqrt(blocks)
  std::size_t blocks = 0;
};

// Median-of-means of fn(i) over i in [0,n); block layout is fixed, so the
// result does not depend on the thread count. Throws EstimationError when a
// block mean is non-finite.
RobustMean median_of_means(std::size_t n, const std::function<double(std::size_t)>& fn,
                           std::size_t blocks = 32, int threads = 0);

struct MomentProbePoint {
  double s = 0.0;
  std::vector<double> prefix_means;  // Ehat|R|^s on nested prefixes (doubling curve)
  double top_share = 0.0;            // fraction of sum_i |R_i|^s carried by the top 32
  bool divergence_consistent = false;
};

struct MomentProbe {
  std::vector<MomentProbePoint> points;  // explicitly a heuristic diagnostic
};

// Flags s as divergence-consistent when the running moment estimate fails to
// stabilize, i.e. a handful of extreme samples carry a macroscopic fraction
// of the moment sum (top-32 share above 0.12; at that cut a tail index of
// 1.5 false-fires ~1% of the time at n = 4*10^5 while index <= 1 is caught
// essentially always). The nested prefix means are reported alongside.
MomentProbe moment_divergence_probe(const std::vector<double>& samples,
                                    const std::vector<double>& s_grid);

struct TailReport {
  std::string direction_label;  // "radial" or an index into the direction set
  std::vector<double> direction;
  HillEstimate hill;
  HillEstimate rank;            // rank-regression variant
  SurvivalCurve survival;
  std::optional<double> beta;
  PlateauEstimate plateau;      // only filled when beta is supplied
};

TailReport make_tail_report(const std::vector<double>& samples, const std::string& label,
                            const std::vector<double>& direction,
                            std::optional<double> beta,
                            std::size_t hill_k = 0);

}  // namespace mstlab
