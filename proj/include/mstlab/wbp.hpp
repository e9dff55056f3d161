#pragma once

#include <cstdint>
#include <vector>

#include "mstlab/model.hpp"

namespace mstlab {

// Particle approximation of the fixed-point law: column m of `samples` is one
// d-vector. Sweeps replace every particle by sum_i C_i X_{j_i} + Q with fresh
// weights and indices resampled with replacement from the previous array.
struct Population {
  ModelSpec spec;
  std::uint64_t seed = 0;
  std::uint64_t generation = 0;
  Eigen::MatrixXd samples;  // d x M

  std::size_t count() const { return static_cast<std::size_t>(samples.cols()); }
};

struct SweepDiagnostics {
  std::uint64_t generation = 0;
  Eigen::VectorXd mean;
  double max_abs = 0.0;
  double covariance_residual_identity = -1.0;  // filled when requested
};

Population make_population(const ModelSpec& spec, std::size_t count, std::uint64_t seed,
                           const Eigen::VectorXd& init);
// Initial particles ~ N(0, Id).
Population make_population_gaussian(const ModelSpec& spec, std::size_t count, std::uint64_t seed);

// One sweep of the smoothing transform on the empirical law. Per-particle
// randomness is keyed by (seed, generation, index); aborts on non-finite
// output components (huge finite values are legitimate and kept).
Population population_iterate(const Population& pop, int threads = 0);
Population population_sweeps(Population pop, std::uint64_t sweeps, int threads = 0,
                             std::vector<SweepDiagnostics>* diag = nullptr);

// Finite-depth backward recursion: evaluates the level-n tree functional with
// leaves pinned at `leaf` (the mean identity solution, or zero).
std::vector<Eigen::VectorXd> sample_R_recursive(const ModelSpec& spec, int depth,
                                                std::size_t count, std::uint64_t seed,
                                                const Eigen::VectorXd& leaf,
                                                std::uint64_t node_budget = (1ull << 20),
                                                int threads = 0);

// Ordered product of n independent draws of C = C_I, I uniform on {1..N}.
struct PathProduct {
  int n = 0;
  Eigen::MatrixXd matrix;
  double log_norm = 0.0;  // log operator norm, accumulated with rescaling
};

PathProduct sample_path_product(const ModelSpec& spec, int n, RngStream& rng);

// Bank of B independent path products at a fixed length. Only the log-norms
// are kept (plus per-step factor log-norms for families whose operator norm
// is exactly multiplicative along the path).
struct PathProductPool {
  ModelSpec spec;
  std::uint64_t seed = 0;
  int length = 0;
  std::vector<double> log_norms;             // B entries: log ||Pi_n||
  std::vector<std::vector<double>> step_log_norms;  // length rows x B, multiplicative families only

  std::size_t size() const { return log_norms.size(); }
  bool has_steps() const { return !step_log_norms.empty(); }
};

PathProductPool build_path_pool(const ModelSpec& spec, int length, std::size_t count,
                                std::uint64_t seed, int threads = 0);

struct PermutationCheck {
  double ks_distance = 0.0;        // permuted run vs original run
  double ks_baseline = 0.0;        // independent-seed run vs original run
  double threshold = 0.0;          // 99% two-sample Kolmogorov quantile
  bool pass = false;
};

// Runs population dynamics with original and per-draw permuted weight order
// (same seeds otherwise) and compares the empirical laws of the projection
// x.R by the two-sample Kolmogorov distance.
PermutationCheck permutation_check(const ModelSpec& spec, std::size_t count,
                                   std::uint64_t seed, std::uint64_t sweeps = 30,
                                   int threads = 0);

double ks_two_sample(std::vector<double> a, std::vector<double> b);

}  // namespace mstlab
