#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "mstlab/common.hpp"
#include "mstlab/pool.hpp"
#include "mstlab/wbp.hpp"

using namespace mstlab;

TEST_CASE("population fixed point of a deterministic map") {
  // t = 1/2, identity rotation, Q = (1,0): r = (2,0) satisfies the mean
  // identity and C1 r + C2 r + Q = r, so the population never moves.
  ModelSpec spec = fixtures::deterministic_similarity(0.25);
  spec.q.dist = QDist::kFixed;
  spec.q.value = Eigen::Vector2d(1.0, 0.0);
  Population pop = make_population(spec, 64, 5, Eigen::Vector2d(2.0, 0.0));
  pop = population_sweeps(std::move(pop), 10);
  for (Eigen::Index m = 0; m < pop.samples.cols(); ++m) {
    CHECK(pop.samples(0, m) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(pop.samples(1, m) == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("population sweeps reproduce the deterministic diagonal iteration") {
  // Every sample stays equal, and the k-th sweep multiplies componentwise by
  // (2^(2/3), 2^(1/2)).
  Population pop = make_population(fixtures::diagonal(), 32, 9, Eigen::Vector2d(1.0, 1.0));
  for (int k = 1; k <= 12; ++k) {
    pop = population_iterate(pop);
    double first = std::pow(2.0, 2.0 * k / 3.0);
    double second = std::pow(2.0, 0.5 * k);
    for (Eigen::Index m = 0; m < pop.samples.cols(); ++m) {
      CHECK(pop.samples(0, m) == doctest::Approx(first).epsilon(1e-12));
      CHECK(pop.samples(1, m) == doctest::Approx(second).epsilon(1e-12));
    }
  }
}

TEST_CASE("maxwell population keeps covariance Id within sampling error") {
  ModelSpec spec = fixtures::maxwell(3);
  Population pop = make_population_gaussian(spec, 20000, 3);
  for (int sweep = 0; sweep < 10; ++sweep) {
    pop = population_iterate(pop);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(3, 3);
    Eigen::MatrixXd m2 = Eigen::MatrixXd::Zero(3, 3);
    for (Eigen::Index m = 0; m < pop.samples.cols(); ++m) {
      Eigen::MatrixXd outer = pop.samples.col(m) * pop.samples.col(m).transpose();
      cov += outer;
      m2 += outer.cwiseProduct(outer);
    }
    cov /= double(pop.count());
    m2 /= double(pop.count());
    double se =
        std::sqrt((m2 - cov.cwiseProduct(cov)).cwiseMax(0.0).sum() / double(pop.count()));
    double residual = (cov - Eigen::MatrixXd::Identity(3, 3)).norm();
    CHECK(residual <= 3.5 * se);  // union over 10 sweeps needs a little slack
  }
}

TEST_CASE("mean is preserved when the mean identity holds") {
  ModelSpec spec = fixtures::lognormal_beta3();  // E C = 0, E Q = 0, so r = 0
  Population pop = make_population_gaussian(spec, 20000, 21);
  std::vector<SweepDiagnostics> diag;
  pop = population_sweeps(std::move(pop), 50, 0, &diag);
  for (const auto& d : diag) {
    // beta = 3: component variance is finite; sd(|R|) ~ 2 covers the drift.
    double se = 2.0 / std::sqrt(double(pop.count()));
    CHECK(d.mean.cwiseAbs().maxCoeff() <= 5.0 * se);
  }
}

TEST_CASE("recursive sampler basics") {
  ModelSpec spec = fixtures::lognormal_beta3();
  Eigen::VectorXd leaf = Eigen::Vector2d(0.7, -0.2);
  SUBCASE("depth 0 returns the leaf for every sample") {
    auto out = sample_R_recursive(spec, 0, 10, 1, leaf);
    for (const auto& v : out) CHECK((v - leaf).norm() == 0.0);
  }
  SUBCASE("homogeneous zero solution is exact at any depth") {
    ModelSpec hom = spec;
    hom.q.dist = QDist::kZero;
    auto out = sample_R_recursive(hom, 6, 20, 2, Eigen::Vector2d::Zero());
    for (const auto& v : out) CHECK(v.norm() == 0.0);
  }
  SUBCASE("budget violations are configuration errors") {
    CHECK_THROWS_AS(sample_R_recursive(spec, 25, 1, 3, leaf), ConfigError);
  }
}

namespace {
struct MeanRadial {
  double mean, se;
};
template <typename GetNorm>
MeanRadial mean_radial(std::size_t n, GetNorm&& norm_of) {
  long double acc = 0, acc2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double v = norm_of(i);
    acc += v;
    acc2 += double(v) * double(v);
  }
  double mean = double(acc / n);
  double var = std::max(0.0, double(acc2 / n) - mean * mean);
  return {mean, std::sqrt(var / double(n))};
}
}  // namespace

TEST_CASE("recursion and population dynamics agree on E|R|") {
  ModelSpec spec = fixtures::lognormal_beta3();
  auto rec = sample_R_recursive(spec, 12, 10000, 11, Eigen::Vector2d::Zero());
  MeanRadial mr = mean_radial(rec.size(), [&](std::size_t i) { return rec[i].norm(); });

  Population pop = make_population_gaussian(spec, 10000, 13);
  pop = population_sweeps(std::move(pop), 50);
  MeanRadial mp = mean_radial(pop.count(), [&](std::size_t i) {
    return pop.samples.col(static_cast<Eigen::Index>(i)).norm();
  });

  CHECK(std::abs(mr.mean - mp.mean) / mp.mean < 0.10);
}

TEST_CASE("cross-method agreement within combined errors when m(1) < 1") {
  // Lognormal contraction with m(1) = 2 E t < 1 and a fixed immigration
  // term; leaves pinned at the mean-identity solution remove the low-order
  // truncation bias, so the two samplers agree within sampling error.
  ModelSpec spec = fixtures::lognormal_beta3();
  spec.scale.mu -= 0.35;  // shift the whole m-curve below 1 at s = 1
  spec.q.dist = QDist::kFixed;
  spec.q.value = Eigen::Vector2d(1.0, 0.0);

  SamplePool pool(spec, 23, 20000);
  EigenvectorSolution ev = solve_eigenvector(spec, pool);
  REQUIRE(ev.solved);

  auto rec = sample_R_recursive(spec, 14, 20000, 17, ev.r);
  MeanRadial mr = mean_radial(rec.size(), [&](std::size_t i) { return rec[i].norm(); });

  Population pop = make_population_gaussian(spec, 20000, 19);
  pop = population_sweeps(std::move(pop), 50);
  MeanRadial mp = mean_radial(pop.count(), [&](std::size_t i) {
    return pop.samples.col(static_cast<Eigen::Index>(i)).norm();
  });

  double combined = 3.0 * std::sqrt(mr.se * mr.se + mp.se * mp.se);
  CHECK(std::abs(mr.mean - mp.mean) <= combined);
}

TEST_CASE("path products") {
  RngStream rng = RngStream::keyed(1, 2, 3);
  SUBCASE("n = 0 is the identity") {
    PathProduct p = sample_path_product(fixtures::general2x2(), 0, rng);
    CHECK(p.log_norm == 0.0);
    CHECK((p.matrix - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("diagonal model: log-norm is -(n/3) log 2 exactly") {
    for (int n : {1, 5, 17}) {
      RngStream r = RngStream::keyed(4, 5, n);
      PathProduct p = sample_path_product(fixtures::diagonal(), n, r);
      CHECK(p.log_norm == doctest::Approx(-n / 3.0 * std::log(2.0)).epsilon(1e-12));
    }
  }
  SUBCASE("similarity: log-norm is the sum of the drawn scale logs") {
    ModelSpec spec = fixtures::deterministic_similarity(0.8, 0.3);
    RngStream r = RngStream::keyed(6, 7, 8);
    PathProduct p = sample_path_product(spec, 9, r);
    CHECK(p.log_norm == doctest::Approx(9 * std::log(0.8)).epsilon(1e-12));
  }
  SUBCASE("log-norm is consistent with the matrix") {
    RngStream r = RngStream::keyed(9, 10, 11);
    PathProduct p = sample_path_product(fixtures::general2x2(), 20, r);
    CHECK(std::abs(std::log(operator_norm(p.matrix)) - p.log_norm) <= 1e-10);
  }
  SUBCASE("same stream state gives a bit-identical product") {
    RngStream r1 = RngStream::keyed(12, 13, 14);
    RngStream r2 = RngStream::keyed(12, 13, 14);
    PathProduct p1 = sample_path_product(fixtures::general2x2(), 15, r1);
    PathProduct p2 = sample_path_product(fixtures::general2x2(), 15, r2);
    CHECK((p1.matrix.array() == p2.matrix.array()).all());
    CHECK(p1.log_norm == p2.log_norm);
  }
}

TEST_CASE("permutation invariance of the fixed point") {
  SUBCASE("exchangeable weights") {
    PermutationCheck pc = permutation_check(fixtures::lognormal_beta3(), 4000, 31, 25);
    CHECK(pc.pass);
  }
  SUBCASE("maxwell") {
    PermutationCheck pc = permutation_check(fixtures::maxwell(3), 4000, 37, 25);
    CHECK(pc.pass);
  }
  SUBCASE("asymmetric branch laws still give an invariant solution") {
    PermutationCheck pc = permutation_check(fixtures::general2x2(), 4000, 41, 25);
    CHECK(pc.pass);
    CHECK(pc.ks_baseline <= 2.0 * pc.threshold);  // same-law reference for context
  }
}

TEST_CASE("non-finite population values abort") {
  // Huge deterministic expansion overflows to inf within a few sweeps.
  ModelSpec spec = fixtures::deterministic_similarity(1e300);
  spec.q.dist = QDist::kFixed;
  spec.q.value = Eigen::Vector2d(1.0, 0.0);
  Population pop = make_population(spec, 8, 1, Eigen::Vector2d(1.0, 1.0));
  CHECK_THROWS_AS(population_sweeps(std::move(pop), 4), EstimationError);
}
