#include "mstlab/stats.hpp"

#include <algorithm>
#include <cmath>

namespace mstlab {

HillEstimate hill_estimate(std::vector<double> samples, std::size_t k) {
  if (k == 0) k = default_hill_k(samples.size());
  if (samples.size() < 11 || k + 1 > samples.size())
    throw EstimationError("hill_estimate: needs k+1 <= n and at least 10 exceedances");
  if (k < 10) throw EstimationError("hill_estimate: fewer than 10 exceedances");
  for (double x : samples)
    if (!(x > 0)) throw EstimationError("hill_estimate: samples must be positive");
  std::partial_sort(samples.begin(), samples.begin() + k + 1, samples.end(),
                    std::greater<double>());
  const double pivot = std::log(samples[k]);
  long double acc = 0.0L;
  for (std::size_t i = 0; i < k; ++i) acc += std::log(samples[i]) - pivot;
  double mean_excess = double(acc) / double(k);
  if (!(mean_excess > 0))
    throw EstimationError("hill_estimate: zero log-excesses (degenerate sample)");
  HillEstimate h;
  h.k = k;
  h.value = 1.0 / mean_excess;
  h.se = h.value / std::sqrt(double(k));
  return h;
}

HillEstimate rank_regression(std::vector<double> samples, std::size_t k) {
  if (k == 0) k = default_hill_k(samples.size());
  if (samples.size() < 11 || k + 1 > samples.size())
    throw EstimationError("rank_regression: needs k+1 <= n");
  std::partial_sort(samples.begin(), samples.begin() + k, samples.end(), std::greater<double>());
  const double n = double(samples.size());
  // Regress log((i+0.5)/n) on log X_(i); slope estimates -beta.
  long double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < k; ++i) {
    if (!(samples[i] > 0)) throw EstimationError("rank_regression: samples must be positive");
    double x = std::log(samples[i]);
    double y = std::log((double(i) + 0.5) / n);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  double kk = double(k);
  double denom = double(sxx - sx * sx / kk);
  if (!(denom > 0)) throw EstimationError("rank_regression: degenerate regressor");
  double slope = double(sxy - sx * sy / kk) / denom;
  // Residual-based OLS slope error.
  double mean_x = double(sx) / kk, mean_y = double(sy) / kk;
  long double rss = 0;
  for (std::size_t i = 0; i < k; ++i) {
    double x = std::log(samples[i]);
    double y = std::log((double(i) + 0.5) / n);
    double r = y - mean_y - slope * (x - mean_x);
    rss += double(r) * double(r);
  }
  HillEstimate h;
  h.k = k;
  h.value = -slope;
  h.se = std::sqrt(double(rss) / std::max(1.0, kk - 2.0) / denom);
  return h;
}

double survival_at(const std::vector<double>& sorted_samples, double t) {
  auto it = std::upper_bound(sorted_samples.begin(), sorted_samples.end(), t);
  return double(sorted_samples.end() - it) / double(sorted_samples.size());
}

SurvivalCurve survival_curve(const std::vector<double>& samples, std::size_t points) {
  if (samples.empty()) throw EstimationError("survival_curve: empty sample");
  std::vector<double> sorted = samples;
  std::sort(sorted.begin(), sorted.end());
  double lo = sorted[std::size_t(0.01 * double(sorted.size() - 1))];
  double hi = sorted.back();
  lo = std::max(lo, hi * 1e-12);
  if (!(lo > 0)) lo = 1e-12;
  if (hi <= lo) hi = lo * (1.0 + 1e-9);
  SurvivalCurve c;
  c.t.reserve(points);
  c.p.reserve(points);
  double ratio = std::pow(hi / lo, 1.0 / double(points - 1));
  double t = lo;
  for (std::size_t i = 0; i < points; ++i, t *= ratio) {
    c.t.push_back(t);
    c.p.push_back(survival_at(sorted, t));
  }
  return c;
}

PlateauEstimate plateau_estimate(const std::vector<double>& samples, double beta,
                                 double p_hi, double p_lo) {
  if (!(p_lo < p_hi)) throw UsageError("plateau_estimate: need p_lo < p_hi");
  std::vector<double> sorted = samples;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  if (double(n) * p_lo < 10)
    throw EstimationError("plateau_estimate: too few exceedances in the read-off window");
  PlateauEstimate out;
  std::vector<double> heights;
  // Heights at the order statistics inside the probability window; the median
  // over the window is the plateau read-off.
  std::size_t i_lo = std::size_t(std::ceil(double(n) * p_lo));
  std::size_t i_hi = std::size_t(std::floor(double(n) * p_hi));
  for (std::size_t i = i_lo; i <= i_hi; ++i) {
    double t = sorted[n - i];  // P(X > t) = (i-..)/n ~ i/n
    if (!(t > 0)) continue;
    double p = double(i) / double(n);
    out.t.push_back(t);
    out.height.push_back(std::pow(t, beta) * p);
    heights.push_back(out.height.back());
  }
  if (heights.empty()) throw EstimationError("plateau_estimate: empty read-off window");
  std::nth_element(heights.begin(), heights.begin() + heights.size() / 2, heights.end());
  out.value = heights[heights.size() / 2];
  return out;
}

RobustMean median_of_means(std::size_t n, const std::function<double(std::size_t)>& fn,
                           std::size_t blocks, int threads) {
  if (n == 0) throw UsageError("median_of_means: empty input");
  BlockSums sums = blocked_sums(n, blocks, fn, threads);
  std::vector<double> means(sums.blocks());
  for (std::size_t j = 0; j < sums.blocks(); ++j) {
    means[j] = sums.mean(j);
    if (!std::isfinite(means[j]))
      throw EstimationError("median_of_means: non-finite block mean");
  }
  std::vector<double> sorted = means;
  std::sort(sorted.begin(), sorted.end());
  RobustMean out;
  out.blocks = sorted.size();
  out.value = sorted.size() % 2 ? sorted[sorted.size() / 2]
                                : 0.5 * (sorted[sorted.size() / 2 - 1] + sorted[sorted.size() / 2]);
  // Asymptotic efficiency factor of the median of approximately normal block
  // means: sqrt(pi/2).
  double mean_all = 0;
  for (double m : means) mean_all += m;
  mean_all /= double(means.size());
  long double var = 0;
  for (double m : means) var += (m - mean_all) * (m - mean_all);
  double sd = std::sqrt(double(var) / std::max<std::size_t>(1, means.size() - 1));
  out.se = 1.2533141373155003 * sd / std::sqrt(double(means.size()));
  return out;
}

MomentProbe moment_divergence_probe(const std::vector<double>& samples,
                                    const std::vector<double>& s_grid) {
  if (samples.size() < 16) throw UsageError("moment_divergence_probe: sample too small");
  MomentProbe probe;
  const std::size_t n = samples.size();
  const std::size_t cuts[4] = {n / 8, n / 4, n / 2, n};
  for (double s : s_grid) {
    MomentProbePoint pt;
    pt.s = s;
    long double acc = 0.0L;
    std::vector<double> top(32, 0.0);  // min-heap of the largest terms
    std::size_t next = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double term = std::pow(std::abs(samples[i]), s);
      acc += term;
      if (term > top.front()) {
        std::pop_heap(top.begin(), top.end(), std::greater<double>());
        top.back() = term;
        std::push_heap(top.begin(), top.end(), std::greater<double>());
      }
      if (next < 4 && i + 1 == cuts[next]) {
        pt.prefix_means.push_back(double(acc / static_cast<long double>(cuts[next])));
        ++next;
      }
    }
    long double top_sum = 0.0L;
    for (double t : top) top_sum += t;
    pt.top_share = acc > 0.0L ? double(top_sum / acc) : 0.0;
    pt.divergence_consistent = pt.top_share > 0.12;
    probe.points.push_back(std::move(pt));
  }
  return probe;
}

TailReport make_tail_report(const std::vector<double>& samples, const std::string& label,
                            const std::vector<double>& direction,
                            std::optional<double> beta, std::size_t hill_k) {
  TailReport rep;
  rep.direction_label = label;
  rep.direction = direction;
  rep.hill = hill_estimate(samples, hill_k);
  rep.rank = rank_regression(samples, hill_k);
  rep.survival = survival_curve(samples);
  rep.beta = beta;
  if (beta) rep.plateau = plateau_estimate(samples, *beta);
  return rep;
}

}  // namespace mstlab
