#include "mstlab/wbp.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

#include "mstlab/common.hpp"

namespace mstlab {

Population make_population(const ModelSpec& spec, std::size_t count, std::uint64_t seed,
                           const Eigen::VectorXd& init) {
  spec.validate();
  if (count == 0) throw UsageError("population must be nonempty");
  Population pop;
  pop.spec = spec;
  pop.seed = seed;
  pop.samples = init.replicate(1, static_cast<Eigen::Index>(count));
  return pop;
}

Population make_population_gaussian(const ModelSpec& spec, std::size_t count, std::uint64_t seed) {
  Population pop = make_population(spec, count, seed, Eigen::VectorXd::Zero(spec.d));
  parallel_for(count, [&](std::size_t m) {
    RngStream rng = RngStream::keyed(seed, m, /*salt=*/0x696e6974ull);  // "init"
    for (int i = 0; i < spec.d; ++i) pop.samples(i, m) = rng.normal();
  });
  return pop;
}

namespace {

// Permutations are only needed for the permutation check; 0 = identity.
Population iterate_impl(const Population& pop, int threads, bool permute_weights) {
  const std::size_t m_count = pop.count();
  if (m_count == 0) throw UsageError("population_iterate: empty population");
  const ModelSpec& spec = pop.spec;
  Population out;
  out.spec = spec;
  out.seed = pop.seed;
  out.generation = pop.generation + 1;
  out.samples.resize(spec.d, static_cast<Eigen::Index>(m_count));

  std::atomic<bool> bad{false};
  parallel_blocks(
      m_count,
      [&](std::size_t, std::size_t lo, std::size_t hi) {
        Eigen::VectorXd acc(spec.d);
        std::vector<int> order(spec.N);
        for (std::size_t m = lo; m < hi; ++m) {
          RngStream rng = RngStream::keyed(pop.seed ^ (pop.generation * 0x9e3779b97f4a7c15ull),
                                           m, /*salt=*/0x73776565ull);  // "swee"
          WeightSample w = sample_weights(spec, rng);
          for (int i = 0; i < spec.N; ++i) order[i] = i;
          if (permute_weights) {
            // Fisher-Yates from an independent salt so the weight draws match
            // the unpermuted run exactly.
            RngStream prng = RngStream::keyed(pop.seed ^ (pop.generation * 0x9e3779b97f4a7c15ull),
                                              m, /*salt=*/0x7065726dull);  // "perm"
            for (int i = spec.N - 1; i > 0; --i)
              std::swap(order[i], order[prng.below(static_cast<std::uint64_t>(i + 1))]);
          }
          acc = w.Q;
          for (int i = 0; i < spec.N; ++i) {
            auto j = static_cast<Eigen::Index>(rng.below(m_count));
            acc.noalias() += w.C[order[i]] * pop.samples.col(j);
          }
          if (!acc.allFinite()) bad.store(true);
          out.samples.col(static_cast<Eigen::Index>(m)) = acc;
        }
      },
      threads);
  if (bad.load())
    throw EstimationError("population_iterate: non-finite sample at generation " +
                          std::to_string(out.generation));
  return out;
}

}  // namespace

Population population_iterate(const Population& pop, int threads) {
  return iterate_impl(pop, threads, false);
}

Population population_sweeps(Population pop, std::uint64_t sweeps, int threads,
                             std::vector<SweepDiagnostics>* diag) {
  for (std::uint64_t k = 0; k < sweeps; ++k) {
    pop = iterate_impl(pop, threads, false);
    if (diag) {
      SweepDiagnostics d;
      d.generation = pop.generation;
      // Extended-precision accumulation: heavy-tailed samples can dwarf the
      // running sum in double.
      Eigen::Matrix<long double, Eigen::Dynamic, 1> acc =
          Eigen::Matrix<long double, Eigen::Dynamic, 1>::Zero(pop.spec.d);
      for (Eigen::Index m = 0; m < pop.samples.cols(); ++m)
        acc += pop.samples.col(m).cast<long double>();
      d.mean = (acc / static_cast<long double>(pop.count())).cast<double>();
      d.max_abs = pop.samples.cwiseAbs().maxCoeff();
      diag->push_back(std::move(d));
    }
  }
  return pop;
}

std::vector<Eigen::VectorXd> sample_R_recursive(const ModelSpec& spec, int depth,
                                                std::size_t count, std::uint64_t seed,
                                                const Eigen::VectorXd& leaf,
                                                std::uint64_t node_budget, int threads) {
  spec.validate();
  if (depth < 0) throw UsageError("sample_R_recursive: depth must be >= 0");
  double nodes = std::pow(double(spec.N), double(depth));
  if (nodes > double(node_budget))
    throw ConfigError("sample_R_recursive: N^depth exceeds the node budget (" +
                      std::to_string(node_budget) + ")");

  std::vector<Eigen::VectorXd> out(count);
  parallel_for(
      count,
      [&](std::size_t m) {
        RngStream rng = RngStream::keyed(seed, m, /*salt=*/0x74726565ull);  // "tree"
        // Depth-first evaluation of value(v) = Q(v) + sum_i C_i(v) value(vi).
        struct Frame {
          WeightSample w;
          int next_child;
          Eigen::VectorXd acc;
        };
        if (depth == 0) {
          out[m] = leaf;
          return;
        }
        std::vector<Frame> stack;
        stack.reserve(depth);
        auto push = [&](int) {
          Frame f;
          f.w = sample_weights(spec, rng);
          f.next_child = 0;
          f.acc = f.w.Q;
          stack.push_back(std::move(f));
        };
        push(0);
        Eigen::VectorXd ret;
        while (!stack.empty()) {
          Frame& top = stack.back();
          if (top.next_child < spec.N) {
            int child = top.next_child++;
            if (static_cast<int>(stack.size()) == depth) {
              top.acc.noalias() += top.w.C[child] * leaf;
            } else {
              push(child);
            }
          } else {
            ret = top.acc;
            stack.pop_back();
            if (!stack.empty()) {
              Frame& parent = stack.back();
              parent.acc.noalias() += parent.w.C[parent.next_child - 1] * ret;
            }
          }
        }
        out[m] = ret;
      },
      threads);
  return out;
}

PathProduct sample_path_product(const ModelSpec& spec, int n, RngStream& rng) {
  if (n < 0) throw UsageError("sample_path_product: n must be >= 0");
  PathProduct p;
  p.n = n;
  p.matrix = Eigen::MatrixXd::Identity(spec.d, spec.d);
  if (n == 0) {
    p.log_norm = 0.0;
    return p;
  }
  // Accumulate with Frobenius rescaling so the log-norm stays exact for path
  // lengths where the raw product would leave double range.
  Eigen::MatrixXd scaled = p.matrix;
  double log_scale = 0.0;
  for (int k = 0; k < n; ++k) {
    WeightSample w = sample_weights(spec, rng);
    auto i = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.N)));
    scaled = scaled * w.C[i];
    double f = scaled.norm();
    if (f <= 0.0) {
      p.matrix = Eigen::MatrixXd::Zero(spec.d, spec.d);
      p.log_norm = -std::numeric_limits<double>::infinity();
      return p;
    }
    scaled /= f;
    log_scale += std::log(f);
  }
  p.log_norm = log_scale + std::log(operator_norm(scaled));
  p.matrix = scaled * std::exp(log_scale);
  return p;
}

PathProductPool build_path_pool(const ModelSpec& spec, int length, std::size_t count,
                                std::uint64_t seed, int threads) {
  spec.validate();
  if (length < 1) throw UsageError("build_path_pool: length must be >= 1");
  PathProductPool pool;
  pool.spec = spec;
  pool.seed = seed;
  pool.length = length;
  pool.log_norms.assign(count, 0.0);
  const bool steps = spec.norm_multiplicative();
  if (steps) pool.step_log_norms.assign(length, std::vector<double>(count, 0.0));

  parallel_for(
      count,
      [&](std::size_t b) {
        RngStream rng = RngStream::keyed(seed, b, /*salt=*/0x70617468ull);  // "path"
        if (steps) {
          // The operator norm is multiplicative along the path for these
          // families, so per-step factor norms determine the product norm.
          double acc = 0.0;
          for (int k = 0; k < length; ++k) {
            WeightSample w = sample_weights(spec, rng);
            auto i = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.N)));
            double ln = std::log(operator_norm(w.C[i]));
            pool.step_log_norms[k][b] = ln;
            acc += ln;
          }
          pool.log_norms[b] = acc;
        } else {
          pool.log_norms[b] = sample_path_product(spec, length, rng).log_norm;
        }
      },
      threads);
  return pool;
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw UsageError("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j])
      ++i;
    else
      ++j;
    double fa = double(i) / double(a.size());
    double fb = double(j) / double(b.size());
    d = std::max(d, std::abs(fa - fb));
  }
  return d;
}

PermutationCheck permutation_check(const ModelSpec& spec, std::size_t count,
                                   std::uint64_t seed, std::uint64_t sweeps, int threads) {
  if (count < 1000) throw UsageError("permutation_check: needs at least 10^3 samples");
  auto evolve = [&](std::uint64_t s, bool permuted) {
    Population p = make_population_gaussian(spec, count, s);
    for (std::uint64_t k = 0; k < sweeps; ++k) p = iterate_impl(p, threads, permuted);
    std::vector<double> v(p.count());  // fixed projection direction e1
    for (std::size_t m = 0; m < p.count(); ++m) v[m] = p.samples(0, static_cast<Eigen::Index>(m));
    return v;
  };

  std::vector<double> original = evolve(seed, false);
  std::vector<double> permuted = evolve(seed, true);

  PermutationCheck out;
  out.ks_distance = ks_two_sample(original, permuted);

  // Population samples are exchangeable but not independent (shared ancestry
  // and weights), which inflates the two-sample Kolmogorov statistic relative
  // to the iid null. Calibrate the null by a same-law bootstrap: pairwise
  // distances between independently seeded original-order runs, rescaled from
  // the mean (0.8687/sqrt(n_eff)) to the 99% quantile (1.6276/sqrt(n_eff)).
  std::vector<std::vector<double>> base;
  for (std::uint64_t j = 0; j < 4; ++j)
    base.push_back(evolve(detail::mix64(seed + 0xb00757 + j), false));
  double mean_base = 0.0;
  int pairs = 0;
  for (std::size_t i = 0; i < base.size(); ++i)
    for (std::size_t j = i + 1; j < base.size(); ++j) {
      mean_base += ks_two_sample(base[i], base[j]);
      ++pairs;
    }
  mean_base /= pairs;
  out.ks_baseline = mean_base;
  constexpr double kQ99OverMean = 1.62762 / 0.86873;  // Kolmogorov quantile/mean
  constexpr double kBootstrapSlack = 1.25;            // few-sample quantile slack
  out.threshold = std::max(kQ99OverMean * kBootstrapSlack * mean_base,
                           1.62762 * std::sqrt(2.0 / double(count)));
  out.pass = out.ks_distance <= out.threshold;
  return out;
}

}  // namespace mstlab
