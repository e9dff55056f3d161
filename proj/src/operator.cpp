#include "mstlab/operator.hpp"

#include <cmath>
#include <limits>

#include "mstlab/common.hpp"

namespace mstlab {

TransferOperator::TransferOperator(const OperatorEnsemble& ensemble, const SphereGrid& grid,
                                   double s, int threads)
    : grid_(&grid), s_(s) {
  if (ensemble.draws_per_row == 0) throw UsageError("TransferOperator: empty ensemble");
  if (ensemble.spec.d != grid.dim())
    throw UsageError("TransferOperator: grid/spec dimension mismatch");
  const int g_count = grid.size();
  const int n_branches = ensemble.spec.N;
  acc_.setZero(g_count, g_count);
  den_ = double(ensemble.draws_per_row) * double(n_branches);

  // Each antipodal row pair shares one draw bank: |(-x)C| = |xC| and the
  // image cells are exact antipodes, so filling the mirrored row from the
  // same pass gives T(-x, -h) = T(x, h) identically.
  parallel_for(
      static_cast<std::size_t>(g_count),
      [&](std::size_t g) {
        const int gi = static_cast<int>(g);
        const int ga = grid.antipode(gi);
        if (ga < gi) return;  // handled by the canonical row of the pair
        Eigen::VectorXd x = grid.node(gi);
        auto row = acc_.row(static_cast<Eigen::Index>(gi));
        auto mirror = acc_.row(static_cast<Eigen::Index>(ga));
        Eigen::VectorXd v(grid.dim());
        for (std::size_t b = 0; b < ensemble.draws_per_row; ++b) {
          WeightSample w = ensemble.draw(g, b);
          for (int i = 0; i < n_branches; ++i) {
            v.noalias() = w.C[i].transpose() * x;  // the row vector xC
            double norm = v.norm();
            if (norm == 0.0) continue;
            int cell = grid.cell_of(v);
            double weight = std::pow(norm, s_);
            row(cell) += weight;
            if (ga != gi) mirror(grid.antipode(cell)) += weight;
          }
        }
      },
      threads);
}

Eigen::VectorXd TransferOperator::apply(const Eigen::VectorXd& f) const {
  return (acc_ * f) / den_;
}

Eigen::VectorXd TransferOperator::apply_adjoint(const Eigen::VectorXd& nu) const {
  return (acc_.transpose() * nu) / den_;
}

Eigen::VectorXd TransferOperator::row_sums() const {
  return apply(Eigen::VectorXd::Ones(size()));
}

SpectralSolution power_iterate(const TransferOperator& op, double tol, std::uint64_t max_iter) {
  const int g_count = op.size();
  Eigen::VectorXd e = Eigen::VectorXd::Ones(g_count);
  Eigen::VectorXd nu = Eigen::VectorXd::Constant(g_count, 1.0 / g_count);

  double kappa = 0.0;
  double resid = std::numeric_limits<double>::infinity();
  std::uint64_t it = 0;
  for (; it < max_iter; ++it) {
    Eigen::VectorXd te = op.apply(e);
    Eigen::VectorXd tnu = op.apply_adjoint(nu);
    double num = nu.dot(te);
    double dendot = nu.dot(e);
    if (!(dendot > 0.0) || !(num > 0.0))
      throw EstimationError("power_iterate: iterate lost positivity");
    kappa = num / dendot;

    double resid_e = (te - kappa * e).cwiseAbs().maxCoeff() / e.cwiseAbs().maxCoeff();
    double resid_nu = (tnu - kappa * nu).cwiseAbs().maxCoeff() / nu.cwiseAbs().maxCoeff();
    resid = std::max(resid_e, resid_nu);
    if (resid <= tol * std::max(kappa, 1e-300)) break;

    // Damped update keeps a spectral gap when T has eigenvalues near the
    // peripheral circle.
    e = te + kappa * e;
    e /= e.cwiseAbs().maxCoeff();
    nu = tnu + kappa * nu;
    nu /= nu.sum();
  }
  if (resid > tol * std::max(kappa, 1e-300))
    throw EstimationError("power_iterate: no convergence after " + std::to_string(max_iter) +
                          " iterations, residual " + std::to_string(resid));

  SpectralSolution sol;
  sol.s = op.s();
  sol.kappa = kappa;
  nu /= nu.sum();
  double c = e.dot(nu);
  if (!(c > 0.0)) throw EstimationError("power_iterate: degenerate normalization");
  e /= c;
  sol.e = std::move(e);
  sol.nu = std::move(nu);
  sol.residual = resid / std::max(kappa, 1e-300);
  sol.iterations = it + 1;
  sol.grid_dim = op.grid().dim();
  sol.grid_size = op.grid().size();
  return sol;
}

}  // namespace mstlab
