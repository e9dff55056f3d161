// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Time budgets are stated for an 8-core machine and scaled by the
// actual core count.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fixtures.hpp"
#include "mstlab/cli.hpp"
#include "mstlab/constants.hpp"
#include "mstlab/io.hpp"
#include "oracles.hpp"

using namespace mstlab;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void line(int criterion, bool ok, const std::string& detail) {
  std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", criterion, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double time_budget(double budget_8core_seconds) {
  double cores = std::max(1, default_thread_count());
  return budget_8core_seconds * std::max(1.0, 8.0 / cores);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

Eigen::MatrixXd simulate(const ModelSpec& spec, std::size_t count, std::uint64_t seed,
                         std::uint64_t sweeps) {
  Population pop = make_population_gaussian(spec, count, seed);
  pop = population_sweeps(std::move(pop), sweeps);
  return pop.samples;
}

std::vector<double> radial(const Eigen::MatrixXd& samples) {
  std::vector<double> out(static_cast<std::size_t>(samples.cols()));
  for (Eigen::Index m = 0; m < samples.cols(); ++m) out[m] = samples.col(m).norm();
  return out;
}

std::vector<double> projections(const Eigen::MatrixXd& samples, const Eigen::VectorXd& x) {
  std::vector<double> out(static_cast<std::size_t>(samples.cols()));
  for (Eigen::Index m = 0; m < samples.cols(); ++m) out[m] = std::abs(x.dot(samples.col(m)));
  return out;
}

// --------------------------------------------------------------------------
// 1. Exponent recovery: diagonal alpha = 3 within 1e-3; lognormal similarity
//    alpha within 3% of 1 and beta within 3% of 3 at B = 1e5, n = 30.
void criterion_1() {
  auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::string detail;

  PathProductPool diag_paths = build_path_pool(fixtures::diagonal(), 30, 5000, 11);
  ExponentReport diag_rep = find_exponents(diag_paths, 0.5, 6.0, 0.25);
  bool diag_ok = diag_rep.alpha && std::abs(*diag_rep.alpha - 3.0) <= 1e-3 && !diag_rep.beta;
  ok = ok && diag_ok;
  detail += "diagonal alpha=" + (diag_rep.alpha ? fmt(*diag_rep.alpha) : "absent") +
            " beta=" + (diag_rep.beta ? fmt(*diag_rep.beta) : "absent");

  PathProductPool ln_paths = build_path_pool(fixtures::lognormal_beta3(), 30, 100000, 13);
  ExponentReport ln_rep = find_exponents(ln_paths, 0.3, 4.0, 0.1);
  bool ln_ok = ln_rep.alpha && ln_rep.beta && std::abs(*ln_rep.alpha - 1.0) <= 0.03 &&
               std::abs(*ln_rep.beta - 3.0) <= 0.09;
  ok = ok && ln_ok;
  detail += "; lognormal alpha=" + (ln_rep.alpha ? fmt(*ln_rep.alpha) : "absent") +
            " beta=" + (ln_rep.beta ? fmt(*ln_rep.beta) : "absent");

  double secs = seconds_since(t0);
  double budget = time_budget(60.0);
  ok = ok && secs <= budget;
  detail += "; " + fmt(secs) + "s (budget " + fmt(budget) + "s)";
  line(1, ok, detail);
}

// --------------------------------------------------------------------------
// 2. Spectral consistency on the Maxwell model, d=3, G=1000, B=2e4:
//    2 kappa(s) within 2% of the closed form for s in {1,2,3}; eigenfunction
//    constant within 2%; eigenmeasure uniform within 5% per node.
void criterion_2() {
  ModelSpec spec = fixtures::maxwell(3);
  OperatorEnsemble ensemble{spec, 17, 20000};
  SphereGrid grid(3, 1000, 17);
  bool ok = true;
  std::string detail;
  for (double s : {1.0, 2.0, 3.0}) {
    TransferOperator op(ensemble, grid, s);
    SpectralSolution sol = power_iterate(op);
    double closed = oracles::maxwell_m(spec, s);
    double rel = std::abs(2.0 * sol.kappa - closed) / closed;
    double e_mean = sol.e.mean();
    double e_dev = (sol.e.array() / e_mean - 1.0).abs().maxCoeff();
    double nu_dev = (sol.nu.array() * grid.size() - 1.0).abs().maxCoeff();
    ok = ok && rel <= 0.02 && e_dev <= 0.02 && nu_dev <= 0.05;
    detail += "s=" + fmt(s) + ": |2k/m-1|=" + fmt(rel) + " e-dev=" + fmt(e_dev) +
              " nu-dev=" + fmt(nu_dev) + (s < 3.0 ? "; " : "");
  }
  line(2, ok, detail);
}

// --------------------------------------------------------------------------
// 3. Tail-index reproduction: lognormal similarity (beta = 3), population
//    1e6, 50 sweeps; radial Hill estimate within 15% of 3.
Eigen::MatrixXd criterion_3() {
  auto t0 = std::chrono::steady_clock::now();
  Eigen::MatrixXd samples = simulate(fixtures::lognormal_beta3(), 1000000, 19, 50);
  HillEstimate hill = hill_estimate(radial(samples), 0);
  double rel = std::abs(hill.value - 3.0) / 3.0;
  double secs = seconds_since(t0);
  double budget = time_budget(600.0);
  bool ok = rel <= 0.15 && secs <= budget;
  line(3, ok,
       "hill=" + fmt(hill.value) + " (k=" + std::to_string(hill.k) + ", rel err " + fmt(rel) +
           "); " + fmt(secs) + "s (budget " + fmt(budget) + "s)");
  return samples;
}

// --------------------------------------------------------------------------
// 4. beta = 2 constant: plateau of t^2 P(|xR| > t) within 25% of 1/(4 l_2)
//    for 3 directions; beta2_constant matches constant_K within 3 SE.
void criterion_4() {
  ModelSpec spec = fixtures::lognormal_beta2();
  bool ok = true;
  std::string detail;

  // Estimated beta must sit within 0.05 of 2 (precondition of the formula).
  PathProductPool paths = build_path_pool(spec, 30, 20000, 23);
  ExponentReport rep = find_exponents(paths, 0.3, 3.4, 0.1);
  double beta_hat = rep.beta ? *rep.beta : std::nan("");
  ok = ok && rep.beta && std::abs(beta_hat - 2.0) <= 0.05;
  detail += "beta_hat=" + (rep.beta ? fmt(beta_hat) : "absent");

  Eigen::MatrixXd samples = simulate(spec, 1000000, 29, 50);
  SamplePool pool(spec, 31, 20000);
  OperatorEnsemble ensemble{spec, 31, 20000};
  SphereGrid grid(2, 500, 31);
  TransferOperator op(ensemble, grid, 2.0);
  SpectralSolution sol = power_iterate(op);
  Estimate l2 = compute_l_beta(ensemble, grid, sol, 2.0);
  double target = 1.0 / (4.0 * l2.value);
  detail += " 1/(4l2)=" + fmt(target);

  auto dirs = std::vector<Eigen::VectorXd>{Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1),
                                           Eigen::Vector2d(std::sqrt(0.5), std::sqrt(0.5))};
  for (const auto& x : dirs) {
    PlateauEstimate p = plateau_estimate(projections(samples, x), 2.0);
    double rel = std::abs(p.value - target) / target;
    ok = ok && rel <= 0.25;
    detail += " plateau-rel=" + fmt(rel);
  }

  Beta2Result b2 = beta2_constant(pool, grid, sol, l2, beta_hat, dirs);
  ConstantKResult k = constant_K(pool, grid, sol, l2, 2.0, samples, dirs, 37);
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    double se = std::sqrt(b2.directional[i].estimate.se * b2.directional[i].estimate.se +
                          k.directional[i].estimate.se * k.directional[i].estimate.se);
    double diff = std::abs(b2.directional[i].estimate.value - k.directional[i].estimate.value);
    ok = ok && diff <= 3.0 * se;
    if (i == 0) detail += "; |beta2-K|=" + fmt(diff) + " vs 3se=" + fmt(3.0 * se);
  }
  line(4, ok, detail);
}

// --------------------------------------------------------------------------
// 5. Cross-formula agreement (similarities): beta * K_radial vs sigma(S)
//    within 3 combined SEs on the lognormal beta=3 model.
void criterion_5(const Eigen::MatrixXd& samples) {
  ModelSpec spec = fixtures::lognormal_beta3();
  SamplePool pool(spec, 41, 20000);
  OperatorEnsemble ensemble{spec, 41, 20000};
  SphereGrid grid(2, 500, 41);
  TransferOperator op(ensemble, grid, 3.0);
  SpectralSolution sol = power_iterate(op);
  Estimate l3 = compute_l_beta(ensemble, grid, sol, 3.0);
  auto dirs = std::vector<Eigen::VectorXd>{Eigen::Vector2d(1, 0)};
  ConstantKResult k = constant_K(pool, grid, sol, l3, 3.0, samples, dirs, 43);
  Estimate m_beta = compute_m_beta_similarity(pool, 3.0);
  ConstantEstimate sig = sigma_S(pool, m_beta, 3.0, samples, 47);
  double lhs = 3.0 * k.radial.value;
  double se = std::sqrt(9.0 * k.radial.se * k.radial.se + sig.se * sig.se);
  bool ok = std::abs(lhs - sig.value) <= 3.0 * se;
  line(5, ok,
       "beta*K_radial=" + fmt(lhs) + " sigma_S=" + fmt(sig.value) + " |diff|=" +
           fmt(std::abs(lhs - sig.value)) + " vs 3se=" + fmt(3.0 * se));
}

// --------------------------------------------------------------------------
// 6. Goldie identity at s = 2 on the lognormal model with 1e6 paired samples.
void criterion_6(const Eigen::MatrixXd& samples) {
  ModelSpec spec = fixtures::lognormal_beta3();
  SamplePool pool(spec, 53, 200000);
  auto dirs = std::vector<Eigen::VectorXd>{Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)};
  GoldieReport rep =
      goldie_identity_residual(pool, 2.0, 1.0, 3.0, samples, dirs, 59, 200, 0, 1000000);
  double se = std::sqrt(rep.lhs_se * rep.lhs_se + rep.rhs_se * rep.rhs_se);
  bool ok = !rep.skipped && std::abs(rep.lhs - rep.rhs) <= 3.0 * se;
  line(6, ok,
       "lhs=" + fmt(rep.lhs) + " rhs=" + fmt(rep.rhs) + " |diff|=" +
           fmt(std::abs(rep.lhs - rep.rhs)) + " vs 3se=" + fmt(3.0 * se));
}

// --------------------------------------------------------------------------
// 7. Invariant suite.
void criterion_7() {
  auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::string detail;

  {  // fixed-pool log-convexity, exact midpoint test on 20 s-triples
    PathProductPool paths = build_path_pool(fixtures::general2x2(), 8, 2000, 61);
    bool convex = true;
    for (int i = 0; i < 20; ++i) {
      double s1 = 0.2 + 0.15 * i, s2 = s1 + 0.9 + 0.05 * i;
      double mid = estimate_m_direct(paths, 0.5 * (s1 + s2)).value;
      double geo =
          std::sqrt(estimate_m_direct(paths, s1).value * estimate_m_direct(paths, s2).value);
      convex = convex && mid <= geo * (1.0 + 1e-12);
    }
    ok = ok && convex;
    detail += std::string("log-convexity=") + (convex ? "exact" : "VIOLATED");
  }

  {  // T_0 row sums exactly 1
    bool rows_ok = true;
    for (auto spec : {fixtures::maxwell(3), fixtures::general2x2()}) {
      OperatorEnsemble ens{spec, 67, 2000};
      SphereGrid grid(spec.d, 200, 67);
      rows_ok = rows_ok && (TransferOperator(ens, grid, 0.0).row_sums().array() == 1.0).all();
    }
    ok = ok && rows_ok;
    detail += std::string("; T0-rows=") + (rows_ok ? "exact" : "VIOLATED");
  }

  {  // spectral normalizations, positivity, central symmetry
    ModelSpec spec = fixtures::maxwell(3);
    OperatorEnsemble ens{spec, 71, 5000};
    SphereGrid grid(3, 500, 71);
    TransferOperator op(ens, grid, 2.0);
    SpectralSolution sol = power_iterate(op);
    bool pos = sol.e.minCoeff() > 0.0;
    double sym = 0.0;
    for (int g = 0; g < grid.size(); ++g)
      sym = std::max(sym, std::abs(sol.e(g) - sol.e(grid.antipode(g))));
    bool sym_ok = sym <= 5.0 * std::max(sol.residual, 1e-12) * sol.e.maxCoeff() + 1e-12;
    double mass = std::abs(sol.nu.sum() - 1.0);
    double norm = std::abs(sol.e.dot(sol.nu) - 1.0);
    ok = ok && pos && sym_ok && mass <= 1e-12 && norm <= 1e-8;
    detail += "; e>0=" + std::string(pos ? "yes" : "NO") + " sym=" + fmt(sym) +
              " |nu|-1=" + fmt(mass) + " <e,nu>-1=" + fmt(norm);
  }

  {  // permutation invariance at the calibrated 99% level
    PermutationCheck pc = permutation_check(fixtures::lognormal_beta3(), 4000, 73, 25);
    ok = ok && pc.pass;
    detail += "; permutation KS=" + fmt(pc.ks_distance) + "<=" + fmt(pc.threshold) +
              (pc.pass ? "" : " VIOLATED");
  }

  {  // maxwell partition of identity
    SamplePool pool(fixtures::maxwell(3), 79, 500);
    double worst = 0.0;
    for (const auto& w : pool.samples())
      worst = std::max(worst, (w.C[0] + w.C[1] - Eigen::MatrixXd::Identity(3, 3))
                                  .cwiseAbs()
                                  .maxCoeff());
    ok = ok && worst <= 1e-12;
    detail += "; maxwell |C1+C2-Id|=" + fmt(worst);
  }

  {  // covariance identity residuals
    SamplePool mpool(fixtures::maxwell(3), 83, 20000);
    CovarianceCheck cc = covariance_residual_check(fixtures::maxwell(3), mpool,
                                                   Eigen::MatrixXd::Identity(3, 3));
    bool cov_ok = cc.residual <= 3.0 * cc.se;
    ModelSpec sim = fixtures::deterministic_similarity(std::sqrt(0.5), 0.7);
    SamplePool spool(sim, 89, 2000);
    cov_ok = cov_ok && covariance_residual(sim, spool, Eigen::MatrixXd::Identity(2, 2)) <= 1e-12;
    SamplePool dpool(fixtures::diagonal(), 97, 100);
    Eigen::MatrixXd sigma(2, 2);
    sigma << 0, 0, 0, 1;
    cov_ok = cov_ok && covariance_residual(fixtures::diagonal(), dpool, sigma) <= 1e-14;
    ok = ok && cov_ok;
    detail += std::string("; covariance=") + (cov_ok ? "ok" : "VIOLATED");
  }

  double secs = seconds_since(t0);
  double budget = time_budget(300.0);
  ok = ok && secs <= budget;
  detail += "; " + fmt(secs) + "s (budget " + fmt(budget) + "s)";
  line(7, ok, detail);
}

// --------------------------------------------------------------------------
// 8. Determinism: identical manifests give byte-identical outputs,
//    independent of thread count.
void criterion_8() {
  fs::path root = fs::temp_directory_path() / "mstlab_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  fs::path cfg = root / "model.cfg";
  std::ofstream(cfg) << fixtures::lognormal_beta3().canonical_text();

  auto run = [&](std::vector<std::string> args, const fs::path& out, const std::string& threads) {
    args.insert(args.end(), {"--config", cfg.string(), "--out", out.string(), "--threads",
                             threads, "--seed", "7"});
    return run_cli(args);
  };
  bool ok = true;
  std::string detail;

  std::vector<std::string> spectrum_args = {"spectrum", "--pool", "3000",   "--depth", "8",
                                            "--grid",   "64",     "--op-pool", "1000",
                                            "--s-lo",   "0.5",    "--s-hi", "3.5",
                                            "--step",   "0.5"};
  ok = ok && run(spectrum_args, root / "sp1", "1") == kExitOk;
  ok = ok && run(spectrum_args, root / "sp2", "5") == kExitOk;
  bool sp_same =
      ok && read_file(root / "sp1" / "m_curve.csv") == read_file(root / "sp2" / "m_curve.csv") &&
      read_file(root / "sp1" / "exponents.json") == read_file(root / "sp2" / "exponents.json");
  ok = ok && sp_same;
  detail += std::string("spectrum=") + (sp_same ? "identical" : "DIFFERS");

  ok = ok && run({"simulate", "--pop", "20000", "--sweeps", "20"}, root / "si1", "3") == kExitOk;
  ok = ok && run({"simulate", "--pop", "20000", "--sweeps", "20"}, root / "si2", "1") == kExitOk;
  bool si_same =
      ok && read_file(root / "si1" / "samples.bin") == read_file(root / "si2" / "samples.bin") &&
      read_file(root / "si1" / "samples.meta.json") ==
          read_file(root / "si2" / "samples.meta.json");
  ok = ok && si_same;
  detail += std::string("; simulate=") + (si_same ? "identical" : "DIFFERS");

  std::vector<std::string> tails_args = {"tails", "--samples",
                                         (root / "si1" / "samples.meta.json").string(), "--beta",
                                         "3"};
  ok = ok && run(tails_args, root / "t1", "2") == kExitOk;
  ok = ok && run(tails_args, root / "t2", "4") == kExitOk;
  bool tl_same =
      ok && read_file(root / "t1" / "tails.json") == read_file(root / "t2" / "tails.json") &&
      read_file(root / "t1" / "survival.csv") == read_file(root / "t2" / "survival.csv");
  ok = ok && tl_same;
  detail += std::string("; tails=") + (tl_same ? "identical" : "DIFFERS");

  std::vector<std::string> const_args = {"constants", "--samples",
                                         (root / "si1" / "samples.meta.json").string(),
                                         "--beta", "3", "--pool", "2000", "--grid", "64",
                                         "--goldie-s", "2"};
  ok = ok && run(const_args, root / "c1", "1") == kExitOk;
  ok = ok && run(const_args, root / "c2", "6") == kExitOk;
  bool co_same =
      ok && read_file(root / "c1" / "constants.json") == read_file(root / "c2" / "constants.json");
  ok = ok && co_same;
  detail += std::string("; constants=") + (co_same ? "identical" : "DIFFERS");

  line(8, ok, detail);
}

}  // namespace

int main() {
  criterion_1();
  criterion_2();
  Eigen::MatrixXd beta3_samples = criterion_3();
  criterion_4();
  criterion_5(beta3_samples);
  criterion_6(beta3_samples);
  criterion_7();
  criterion_8();
  if (g_failures == 0)
    std::printf("acceptance: all criteria passed\n");
  else
    std::printf("acceptance: %d criterion(s) failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
