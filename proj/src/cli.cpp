#include "mstlab/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <json.hpp>

#include "mstlab/common.hpp"
#include "mstlab/constants.hpp"
#include "mstlab/io.hpp"

namespace mstlab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOpts {
  std::string config;
  std::string out = ".";
  std::uint64_t seed = 1;
  int threads = 0;
};

ModelSpec load_spec(const CommonOpts& c) { return ModelSpec::load(c.config); }

Manifest make_manifest(const std::string& command, const CommonOpts& c, const ModelSpec& spec,
                       std::map<std::string, std::string> knobs) {
  Manifest m;
  m.command = command;
  m.config_path = c.config;
  m.config_hash = hex64(spec.hash());
  m.seed = c.seed;
  m.threads = c.threads > 0 ? c.threads : default_thread_count();
  m.knobs = std::move(knobs);
  return m;
}

void write_manifest(const Manifest& m, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  atomic_write(out_dir / "manifest.json", m.to_json().dump(2) + "\n");
}

// Deterministic direction set: the leading nodes of a small sphere grid.
std::vector<Eigen::VectorXd> direction_set(int d, int count) {
  SphereGrid grid(d, std::max(4, count + (count % 2)));
  std::vector<Eigen::VectorXd> dirs;
  for (int i = 0; i < count; ++i) dirs.push_back(grid.node(i % grid.size()));
  return dirs;
}

std::vector<double> abs_projections(const Eigen::MatrixXd& samples, const Eigen::VectorXd& dir) {
  std::vector<double> out(static_cast<std::size_t>(samples.cols()));
  for (Eigen::Index m = 0; m < samples.cols(); ++m)
    out[static_cast<std::size_t>(m)] = std::abs(dir.dot(samples.col(m)));
  return out;
}

std::vector<double> radial_values(const Eigen::MatrixXd& samples) {
  std::vector<double> out(static_cast<std::size_t>(samples.cols()));
  for (Eigen::Index m = 0; m < samples.cols(); ++m)
    out[static_cast<std::size_t>(m)] = samples.col(m).norm();
  return out;
}

// ---------------------------------------------------------------------------

int cmd_spectrum(const CommonOpts& c, double s_lo, double s_hi, double step, std::size_t pool_b,
                 int depth, int grid_g, std::size_t op_pool_b) {
  ModelSpec spec = load_spec(c);
  Manifest manifest = make_manifest(
      "spectrum", c, spec,
      {{"s_lo", format_double(s_lo)},
       {"s_hi", format_double(s_hi)},
       {"step", format_double(step)},
       {"pool", std::to_string(pool_b)},
       {"depth", std::to_string(depth)},
       {"grid", std::to_string(grid_g)},
       {"op_pool", std::to_string(op_pool_b)}});

  PathProductPool paths = build_path_pool(spec, depth, pool_b, c.seed, c.threads);
  OperatorEnsemble ensemble{spec, c.seed ^ 0x6f702d706f6f6cull, op_pool_b};
  SphereGrid grid(spec.d, grid_g, c.seed);

  // Exponent roots: the factorized path estimator is exact in n for
  // norm-multiplicative families; for general matrices the finite-n product
  // estimator sits above the limit (subadditivity), so the roots come from
  // N kappa(s) of the transfer operator instead.
  ExponentReport report =
      spec.norm_multiplicative()
          ? find_exponents(paths, s_lo, s_hi, step)
          : find_exponents_operator(ensemble, grid, s_lo, s_hi, step, 1e-3, c.threads);

  // The curve table carries both estimators per scanned s: the direct
  // product estimate and the operator eigenvalue.
  CsvWriter csv(manifest.hash());
  csv.header({"s", "m_hat", "se", "kappa", "residual", "iterations"});
  for (const auto& pt : report.curve) {
    Estimate direct = estimate_m_direct(paths, pt.s);
    double kappa = std::nan(""), residual = std::nan("");
    double iters = 0;
    try {
      TransferOperator op(ensemble, grid, pt.s, c.threads);
      SpectralSolution sol = power_iterate(op);
      kappa = sol.kappa;
      residual = sol.residual;
      iters = double(sol.iterations);
    } catch (const EstimationError&) {
      // keep NaN columns; the direct estimate still stands
    }
    csv.row({pt.s, direct.value, direct.se, kappa, residual, iters});
  }

  fs::create_directories(c.out);
  json rep_json = exponent_report_to_json(report);
  rep_json["manifest_hash"] = manifest.hash();
  rep_json["config_hash"] = manifest.config_hash;
  atomic_write(fs::path(c.out) / "m_curve.csv", csv.str());
  atomic_write(fs::path(c.out) / "exponents.json", rep_json.dump(2) + "\n");
  write_manifest(manifest, c.out);
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_simulate(const CommonOpts& c, std::size_t pop_m, std::uint64_t sweeps,
                 const std::string& init, const std::string& format) {
  ModelSpec spec = load_spec(c);
  Manifest manifest = make_manifest("simulate", c, spec,
                                    {{"pop", std::to_string(pop_m)},
                                     {"sweeps", std::to_string(sweeps)},
                                     {"init", init},
                                     {"format", format}});

  Population pop(
      [&] {
        if (init == "gaussian") return make_population_gaussian(spec, pop_m, c.seed);
        if (init == "zero")
          return make_population(spec, pop_m, c.seed, Eigen::VectorXd::Zero(spec.d));
        if (init == "mean") {
          // Start at the solution of the mean identity when it exists.
          SamplePool small(spec, c.seed ^ 0x6d65616eull, 20000, c.threads);
          EigenvectorSolution ev = solve_eigenvector(spec, small);
          Eigen::VectorXd r = ev.solved ? ev.r : Eigen::VectorXd::Zero(spec.d);
          return make_population(spec, pop_m, c.seed, r);
        }
        throw ConfigError("init must be mean|zero|gaussian");
      }());

  // Per-sweep diagnostics; for the kinetic model the empirical covariance is
  // checked against its identity fixed point at every generation.
  const bool check_cov = spec.family == Family::kMaxwell && spec.q.is_zero();
  json diag_json = json::array();
  for (std::uint64_t k = 0; k < sweeps; ++k) {
    std::vector<SweepDiagnostics> diag;
    pop = population_sweeps(std::move(pop), 1, c.threads, &diag);
    json row;
    row["generation"] = diag[0].generation;
    row["mean"] = std::vector<double>(diag[0].mean.data(),
                                      diag[0].mean.data() + diag[0].mean.size());
    row["max_abs"] = diag[0].max_abs;
    if (check_cov) {
      Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(spec.d, spec.d);
      Eigen::MatrixXd m2 = Eigen::MatrixXd::Zero(spec.d, spec.d);
      for (Eigen::Index m = 0; m < pop.samples.cols(); ++m) {
        Eigen::MatrixXd outer = pop.samples.col(m) * pop.samples.col(m).transpose();
        cov += outer;
        m2 += outer.cwiseProduct(outer);
      }
      cov /= double(pop.count());
      m2 /= double(pop.count());
      double se =
          std::sqrt((m2 - cov.cwiseProduct(cov)).cwiseMax(0.0).sum() / double(pop.count()));
      row["covariance_residual_identity"] =
          (cov - Eigen::MatrixXd::Identity(spec.d, spec.d)).norm();
      row["covariance_residual_se"] = se;
    }
    diag_json.push_back(row);
  }

  SampleDumpMeta meta;
  meta.format = format;
  meta.config_hash = manifest.config_hash;
  meta.manifest_hash = manifest.hash();
  meta.seed = c.seed;
  meta.generation = pop.generation;
  meta.diagnostics = diag_json;
  fs::create_directories(c.out);
  write_sample_dump(c.out, "samples", pop.samples, meta);
  write_manifest(manifest, c.out);
  return kExitOk;
}

// ---------------------------------------------------------------------------

Eigen::MatrixXd load_samples_checked(const std::string& samples_meta, const ModelSpec& spec,
                                     SampleDumpMeta* meta) {
  Eigen::MatrixXd samples = read_sample_dump(samples_meta, meta);
  if (meta->config_hash != hex64(spec.hash()))
    throw ProvenanceError("sample dump was produced from a different config (hash " +
                          meta->config_hash + " vs " + hex64(spec.hash()) + ")");
  if (static_cast<int>(meta->cols) != spec.d)
    throw ProvenanceError("sample dump dimension does not match the config");
  return samples;
}

int cmd_tails(const CommonOpts& c, const std::string& samples_meta, double beta_flag,
              const std::string& exponents_path, int n_directions) {
  ModelSpec spec = load_spec(c);
  Manifest manifest = make_manifest("tails", c, spec,
                                    {{"samples", samples_meta},
                                     {"beta", format_double(beta_flag)},
                                     {"exponents", exponents_path},
                                     {"directions", std::to_string(n_directions)}});

  SampleDumpMeta meta;
  Eigen::MatrixXd samples = load_samples_checked(samples_meta, spec, &meta);

  std::optional<double> beta;
  if (!std::isnan(beta_flag)) beta = beta_flag;
  if (!exponents_path.empty()) {
    ExponentReport rep = exponent_report_from_json(json::parse(read_file(exponents_path)));
    if (rep.beta) {
      if (beta && std::abs(*beta - *rep.beta) > 0.1)
        std::cerr << "warning: --beta " << *beta << " differs from the stored exponent report ("
                  << *rep.beta << ") by more than 0.1\n";
      if (!beta) beta = rep.beta;
    }
  }

  auto dirs = direction_set(spec.d, n_directions);
  std::vector<TailReport> reports;
  reports.push_back(make_tail_report(radial_values(samples), "radial", {}, beta));
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    std::vector<double> dir(dirs[i].data(), dirs[i].data() + dirs[i].size());
    reports.push_back(make_tail_report(abs_projections(samples, dirs[i]),
                                       "x" + std::to_string(i), dir, beta));
  }

  std::vector<double> s_grid =
      beta ? std::vector<double>{*beta / 2, *beta, *beta + 1} : std::vector<double>{1, 2, 3};
  MomentProbe probe = moment_divergence_probe(radial_values(samples), s_grid);

  json out;
  out["manifest_hash"] = manifest.hash();
  out["config_hash"] = manifest.config_hash;
  out["samples_manifest"] = meta.manifest_hash;
  out["reports"] = json::array();
  for (const auto& r : reports) out["reports"].push_back(tail_report_to_json(r));
  out["moment_probe"] = json::array();
  for (const auto& pt : probe.points)
    out["moment_probe"].push_back({{"s", pt.s},
                                   {"prefix_means", pt.prefix_means},
                                   {"top_share", pt.top_share},
                                   {"divergence_consistent", pt.divergence_consistent},
                                   {"note", "heuristic doubling diagnostic"}});

  CsvWriter surv(manifest.hash());
  surv.header({"direction", "t", "value", "se"});
  CsvWriter plat(manifest.hash());
  plat.header({"direction", "t", "value", "se"});
  const double n_inv = 1.0 / double(samples.cols());
  for (const auto& r : reports) {
    for (std::size_t i = 0; i < r.survival.t.size(); ++i) {
      double p = r.survival.p[i];
      surv.mixed_row({r.direction_label, format_double(r.survival.t[i]), format_double(p),
                      format_double(std::sqrt(std::max(0.0, p * (1 - p) * n_inv)))});
    }
    if (r.beta)
      for (std::size_t i = 0; i < r.plateau.t.size(); ++i) {
        double t = r.plateau.t[i];
        double p = r.plateau.height[i] / std::pow(t, *r.beta);
        plat.mixed_row({r.direction_label, format_double(t), format_double(r.plateau.height[i]),
                        format_double(std::pow(t, *r.beta) *
                                      std::sqrt(std::max(0.0, p * (1 - p) * n_inv)))});
      }
  }

  fs::create_directories(c.out);
  atomic_write(fs::path(c.out) / "tails.json", out.dump(2) + "\n");
  atomic_write(fs::path(c.out) / "survival.csv", surv.str());
  atomic_write(fs::path(c.out) / "plateau.csv", plat.str());
  write_manifest(manifest, c.out);
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_constants(const CommonOpts& c, const std::string& samples_meta,
                  const std::string& exponents_path, double beta_flag, std::size_t pool_b,
                  int grid_g, int n_directions, double goldie_s,
                  const std::string& solution_path) {
  ModelSpec spec = load_spec(c);
  Manifest manifest = make_manifest("constants", c, spec,
                                    {{"samples", samples_meta},
                                     {"exponents", exponents_path},
                                     {"beta", format_double(beta_flag)},
                                     {"pool", std::to_string(pool_b)},
                                     {"grid", std::to_string(grid_g)},
                                     {"directions", std::to_string(n_directions)},
                                     {"goldie_s", format_double(goldie_s)},
                                     {"solution", solution_path}});

  SampleDumpMeta meta;
  Eigen::MatrixXd samples = load_samples_checked(samples_meta, spec, &meta);

  std::optional<double> alpha, beta;
  if (!exponents_path.empty()) {
    ExponentReport rep = exponent_report_from_json(json::parse(read_file(exponents_path)));
    alpha = rep.alpha;
    beta = rep.beta;
  }
  if (!std::isnan(beta_flag)) {
    if (beta && std::abs(*beta - beta_flag) > 0.1)
      std::cerr << "warning: --beta differs from the stored exponent report by more than 0.1\n";
    beta = beta_flag;
  }
  if (!beta) throw ConfigError("constants: beta is required (flag or exponent report)");

  SamplePool pool(spec, c.seed ^ 0x636f6e7374ull, pool_b, c.threads);
  std::uint64_t grid_seed = c.seed;
  OperatorEnsemble ensemble{spec, c.seed ^ 0x6f702d706f6f6cull, pool_b};
  SpectralSolution sol;
  if (!solution_path.empty()) {
    // Reuse a previously saved spectral record; its eigensolve and the
    // l_beta quadrature are tied to the recorded ensemble.
    sol = solution_from_json(json::parse(read_file(solution_path)), manifest.config_hash,
                             &grid_seed);
    if (std::abs(sol.s - *beta) > 1e-9)
      throw ProvenanceError("stored spectral solution is at s = " + format_double(sol.s) +
                            ", not the requested beta");
    json rec = json::parse(read_file(solution_path));
    ensemble.seed = rec["ensemble_seed"].get<std::uint64_t>();
    ensemble.draws_per_row = rec["ensemble_draws"].get<std::uint64_t>();
    grid_g = sol.grid_size;
  }
  SphereGrid grid(spec.d, grid_g, grid_seed);
  if (solution_path.empty()) {
    TransferOperator op(ensemble, grid, *beta, c.threads);
    sol = power_iterate(op);
  }
  Estimate l_beta = compute_l_beta(ensemble, grid, sol, *beta, c.threads);

  auto dirs = direction_set(spec.d, n_directions);
  ConstantKResult k_res =
      constant_K(pool, grid, sol, l_beta, *beta, samples, dirs, c.seed, c.threads);

  json out;
  out["manifest_hash"] = manifest.hash();
  out["config_hash"] = manifest.config_hash;
  out["samples_manifest"] = meta.manifest_hash;
  out["beta"] = *beta;
  out["kappa"] = sol.kappa;
  out["l_beta"] = {{"value", l_beta.value}, {"se", l_beta.se}};

  auto constant_json = [](const ConstantEstimate& e) {
    return json{{"value", e.value}, {"se", e.se}, {"method", e.method},
                {"inputs_hash", e.inputs_hash}};
  };
  out["K"] = json::array();
  for (const auto& dc : k_res.directional) {
    json j = constant_json(dc.estimate);
    j["direction"] =
        std::vector<double>(dc.direction.data(), dc.direction.data() + dc.direction.size());
    out["K"].push_back(j);
  }
  out["K_radial"] = constant_json(k_res.radial);

  if (spec.family == Family::kSimilarity) {
    Estimate m_beta = compute_m_beta_similarity(pool, *beta);
    ConstantEstimate sig = sigma_S(pool, m_beta, *beta, samples, c.seed, c.threads);
    out["m_beta"] = {{"value", m_beta.value}, {"se", m_beta.se}};
    out["sigma_S"] = constant_json(sig);
  }

  if (std::abs(*beta - 2.0) <= 0.05) {
    Beta2Result b2 = beta2_constant(pool, grid, sol, l_beta, *beta, dirs, c.threads);
    out["beta2"] = json::array();
    for (const auto& dc : b2.directional) {
      json j = constant_json(dc.estimate);
      j["direction"] =
          std::vector<double>(dc.direction.data(), dc.direction.data() + dc.direction.size());
      j["degenerate_q"] = b2.degenerate_q;
      out["beta2"].push_back(j);
    }
  }

  // Positivity gate: a significantly positive K should cohere with the
  // moment-divergence heuristic at s = beta; a conflict is a diagnostics
  // flag, not an error.
  MomentProbe probe = moment_divergence_probe(radial_values(samples), {*beta});
  bool k_positive = k_res.radial.value > 3.0 * k_res.radial.se;
  out["diagnostics"] = {
      {"moment_probe_divergence_consistent", probe.points[0].divergence_consistent},
      {"K_significantly_positive", k_positive},
      {"positivity_gate_conflict", k_positive && !probe.points[0].divergence_consistent}};

  if (!std::isnan(goldie_s)) {
    GoldieReport gr = goldie_identity_residual(pool, goldie_s, alpha, beta, samples, dirs,
                                               c.seed, 200, c.threads);
    json gj;
    gj["s"] = gr.s;
    gj["skipped"] = gr.skipped;
    if (!gr.warning.empty()) gj["warning"] = gr.warning;
    if (!gr.skipped) {
      gj["lhs"] = {{"value", gr.lhs}, {"se", gr.lhs_se}};
      gj["rhs"] = {{"value", gr.rhs}, {"se", gr.rhs_se}};
    }
    out["goldie"] = gj;
  }

  fs::create_directories(c.out);
  // Versioned spectral record plus a plot-ready eigen-element table, for
  // reuse by later runs (--solution).
  json sol_json = solution_to_json(sol, manifest.config_hash, ensemble.seed,
                                   ensemble.draws_per_row, grid_seed);
  sol_json["manifest_hash"] = manifest.hash();
  CsvWriter eigen_csv(manifest.hash());
  {
    std::vector<std::string> cols;
    for (int i = 0; i < spec.d; ++i) cols.push_back("x" + std::to_string(i));
    cols.push_back("e");
    cols.push_back("nu");
    eigen_csv.header(cols);
    for (int g = 0; g < grid.size(); ++g) {
      std::vector<double> row;
      for (int i = 0; i < spec.d; ++i) row.push_back(grid.node(g)(i));
      row.push_back(sol.e(g));
      row.push_back(sol.nu(g));
      eigen_csv.row(row);
    }
  }
  atomic_write(fs::path(c.out) / "constants.json", out.dump(2) + "\n");
  atomic_write(fs::path(c.out) / "solution.json", sol_json.dump(2) + "\n");
  atomic_write(fs::path(c.out) / "eigen_elements.csv", eigen_csv.str());
  write_manifest(manifest, c.out);
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_validate(const CommonOpts& c) {
  ModelSpec spec;
  int failures = 0;
  auto report = [&](bool ok, const std::string& name, const std::string& detail) {
    std::cout << (ok ? "PASS " : "FAIL ") << name << ": " << detail << "\n";
    if (!ok) ++failures;
  };

  try {
    spec = load_spec(c);
  } catch (const ConfigError& e) {
    if (!fs::exists(c.config)) throw;  // missing file is a hard error
    report(false, "config", e.what());
    std::cout << "validate: 1 check failed\n";
    return kExitOk;
  }
  report(true, "config", "parsed, hash " + hex64(spec.hash()));

  const std::size_t pool_b = 2000;
  SamplePool pool(spec, c.seed, pool_b, c.threads);

  // Family-specific structural invariants on the samples themselves.
  switch (spec.family) {
    case Family::kMaxwell: {
      double worst = 0;
      for (const auto& w : pool.samples())
        worst = std::max(worst, (w.C[0] + w.C[1] - Eigen::MatrixXd::Identity(spec.d, spec.d))
                                    .cwiseAbs()
                                    .maxCoeff());
      report(worst <= 1e-12, "maxwell-partition", "max |C1+C2-Id| = " + format_double(worst));
      break;
    }
    case Family::kSimilarity: {
      double worst = 0;
      for (std::size_t b = 0; b < 64 && b < pool.size(); ++b)
        for (const auto& cmat : pool[b].C) {
          double t = operator_norm(cmat);
          for (int j = 0; j < spec.d; ++j)
            worst = std::max(worst,
                             std::abs(cmat.col(j).norm() - t));  // |C e_j| = ||C|| for similarities
        }
      report(worst <= 1e-10, "similarity-isometry", "max ||Ce_j|-t| = " + format_double(worst));
      break;
    }
    case Family::kDiagonalDeterministic: {
      Eigen::MatrixXd expected = Eigen::VectorXd::Constant(spec.d, std::pow(double(spec.N), -0.5))
                                     .asDiagonal();
      expected(0, 0) = std::pow(double(spec.N), -1.0 / 3.0);
      double dev = (pool[0].C[0] - expected).cwiseAbs().maxCoeff();
      report(dev == 0.0, "diagonal-weights", "deviation " + format_double(dev));
      break;
    }
    case Family::kGeneralMatrix:
      report(true, "general-matrix",
             "condition-number resamples: " + std::to_string(pool.resample_count()));
      break;
  }

  {
    SamplePool again(spec, c.seed, pool_b, 1);
    bool same = true;
    for (std::size_t b = 0; b < pool_b && same; ++b) {
      same = (again[b].Q.array() == pool[b].Q.array()).all();
      for (int i = 0; i < spec.N && same; ++i)
        same = (again[b].C[i].array() == pool[b].C[i].array()).all();
    }
    report(same, "pool-determinism", "rebuilt pool is bit-identical across thread counts");
  }

  {
    EigenvectorSolution ev = solve_eigenvector(spec, pool);
    std::string detail = ev.solved
                             ? (ev.non_unique ? "solved (non-unique)" : "solved")
                             : "no solution (singular system, E[Q] outside range)";
    report(true, "mean-identity", detail + ", smin/smax = " +
                                      format_double(ev.smallest_singular_value) + "/" +
                                      format_double(ev.largest_singular_value));
  }

  if (spec.family == Family::kMaxwell) {
    CovarianceCheck cc =
        covariance_residual_check(spec, pool, Eigen::MatrixXd::Identity(spec.d, spec.d));
    report(cc.residual <= 3 * cc.se, "covariance-identity",
           "residual " + format_double(cc.residual) + " vs 3se " + format_double(3 * cc.se));
  }

  {
    ContractionConditions z = contraction_conditions(spec, pool);
    bool ordered = z.z3 <= z.z2 + 1e-12 && z.z2 <= z.z1 + 1e-12;
    report(ordered, "contraction-ordering",
           "z1=" + format_double(z.z1) + " z2=" + format_double(z.z2) +
               " z3=" + format_double(z.z3));
  }

  {
    RngStream r1 = RngStream::keyed(c.seed, 7, 1);
    RngStream r2 = RngStream::keyed(c.seed, 7, 1);
    PathProduct p1 = sample_path_product(spec, 20, r1);
    PathProduct p2 = sample_path_product(spec, 20, r2);
    bool det = p1.log_norm == p2.log_norm;
    double consistency = std::abs(std::log(operator_norm(p1.matrix)) - p1.log_norm);
    report(det && consistency <= 1e-10, "path-product",
           "deterministic, |log||Pi|| - lognorm| = " + format_double(consistency));
  }

  {
    SphereGrid grid(spec.d, 64, c.seed);
    OperatorEnsemble ensemble{spec, c.seed, 1000};
    TransferOperator t0(ensemble, grid, 0.0, c.threads);
    double row_dev = (t0.row_sums().array() - 1.0).abs().maxCoeff();
    report(row_dev == 0.0, "markov-rows", "max |row sum - 1| = " + format_double(row_dev));
    try {
      TransferOperator t1(ensemble, grid, 1.0, c.threads);
      SpectralSolution sol = power_iterate(t1, 1e-9);
      bool pos = sol.e.minCoeff() > 0 && sol.nu.minCoeff() >= 0;
      double mass = std::abs(sol.nu.sum() - 1.0);
      double norm = std::abs(sol.e.dot(sol.nu) - 1.0);
      report(pos && mass < 1e-12 && norm < 1e-8, "spectral-normalization",
             "kappa=" + format_double(sol.kappa) + " mass-1=" + format_double(mass) +
                 " <e,nu>-1=" + format_double(norm));
    } catch (const EstimationError& e) {
      report(false, "spectral-normalization", e.what());
    }
  }

  {
    PathProductPool paths = build_path_pool(spec, 8, 2000, c.seed, c.threads);
    bool convex = true;
    for (int i = 0; i < 5; ++i) {
      double s1 = 0.3 + 0.4 * i, s2 = s1 + 1.2;
      double mid = estimate_m_direct(paths, 0.5 * (s1 + s2)).value;
      double geo = std::sqrt(estimate_m_direct(paths, s1).value *
                             estimate_m_direct(paths, s2).value);
      convex = convex && mid <= geo * (1 + 1e-12);
    }
    report(convex, "log-convexity", "midpoint inequality on the fixed pool");
  }

  {
    PermutationCheck pc = permutation_check(spec, 2000, c.seed, 15, c.threads);
    report(pc.pass, "permutation-invariance",
           "KS=" + format_double(pc.ks_distance) + " threshold=" + format_double(pc.threshold) +
               " baseline=" + format_double(pc.ks_baseline));
  }

  std::cout << (failures == 0 ? "validate: all checks passed\n"
                              : "validate: " + std::to_string(failures) + " check(s) failed\n");
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"mstlab: fixed points of multivariate smoothing transforms - "
               "spectral elements, tail exponents, and limiting constants"};
  app.require_subcommand(1);

  CommonOpts c;
  auto add_common = [&](CLI::App* sub, bool needs_out) {
    sub->add_option("--config", c.config, "model config file (key=value lines)")->required();
    sub->add_option("--seed", c.seed, "master seed");
    sub->add_option("--threads", c.threads,
                    "worker threads (0 = MSTLAB_THREADS env or hardware)");
    if (needs_out) sub->add_option("--out", c.out, "output directory")->required();
  };

  // spectrum
  double s_lo = 0.2, s_hi = 4.0, step = 0.1;
  std::size_t pool_b = 100000, op_pool_b = 5000;
  int depth = 30, grid_g = 200;
  auto* sp = app.add_subcommand("spectrum", "m-curve, exponents alpha/beta, operator spectrum");
  add_common(sp, true);
  sp->add_option("--s-lo", s_lo);
  sp->add_option("--s-hi", s_hi);
  sp->add_option("--step", step);
  sp->add_option("--pool", pool_b, "path-product pool size B");
  sp->add_option("--depth", depth, "path length n");
  sp->add_option("--grid", grid_g, "sphere grid size G");
  sp->add_option("--op-pool", op_pool_b, "weight pool size for the operator column");

  // simulate
  std::size_t pop_m = 100000;
  std::uint64_t sweeps = 50;
  std::string init = "mean", format = "binary";
  auto* sim = app.add_subcommand("simulate", "population dynamics sample dump");
  add_common(sim, true);
  sim->add_option("--pop", pop_m, "population size M");
  sim->add_option("--sweeps", sweeps, "number of sweeps (burn-in default 50)");
  sim->add_option("--init", init, "mean|zero|gaussian");
  sim->add_option("--format", format, "csv|binary");

  // tails
  std::string samples_meta, exponents_path;
  double beta_flag = std::nan("");
  int n_directions = 3;
  auto* tl = app.add_subcommand("tails", "tail index estimates and survival curves");
  add_common(tl, true);
  tl->add_option("--samples", samples_meta, "sample dump sidecar (.meta.json)")->required();
  tl->add_option("--beta", beta_flag, "tail exponent for plateau read-off");
  tl->add_option("--exponents", exponents_path, "exponents.json from `spectrum`");
  tl->add_option("--directions", n_directions);

  // constants
  std::size_t const_pool = 20000;
  int const_grid = 500;
  double goldie_s = std::nan("");
  std::string solution_path;
  auto* co = app.add_subcommand("constants", "limiting constants K, sigma(S), beta=2 case");
  add_common(co, true);
  co->add_option("--samples", samples_meta, "sample dump sidecar (.meta.json)")->required();
  co->add_option("--exponents", exponents_path, "exponents.json from `spectrum`");
  co->add_option("--beta", beta_flag, "tail exponent (overrides the report)");
  co->add_option("--pool", const_pool);
  co->add_option("--grid", const_grid);
  co->add_option("--directions", n_directions);
  co->add_option("--goldie-s", goldie_s, "run the moment/tail identity check at this s");
  co->add_option("--solution", solution_path, "reuse a saved solution.json spectral record");

  // validate
  auto* va = app.add_subcommand("validate", "structural invariant battery at reduced sizes");
  add_common(va, false);

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (sp->parsed()) return cmd_spectrum(c, s_lo, s_hi, step, pool_b, depth, grid_g, op_pool_b);
    if (sim->parsed()) return cmd_simulate(c, pop_m, sweeps, init, format);
    if (tl->parsed()) return cmd_tails(c, samples_meta, beta_flag, exponents_path, n_directions);
    if (co->parsed())
      return cmd_constants(c, samples_meta, exponents_path, beta_flag, const_pool, const_grid,
                           n_directions, goldie_s, solution_path);
    if (va->parsed()) return cmd_validate(c);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ProvenanceError& e) {
    std::cerr << "provenance error: " << e.what() << "\n";
    return kExitProvenance;
  } catch (const ConsistencyError& e) {
    std::cerr << "consistency error: " << e.what() << "\n";
    return kExitEstimation;
  } catch (const EstimationError& e) {
    std::cerr << "estimation error: " << e.what() << "\n";
    return kExitEstimation;
  }
  return kExitConfig;
}

}  // namespace mstlab
