#pragma once

#include <cstdint>

#include "mstlab/model.hpp"
#include "mstlab/sphere.hpp"

namespace mstlab {

// Weight draws backing a discretized transfer operator: entry (row, b) comes
// from the substream keyed by (seed, row-pair, b), so every antipodal pair of
// grid rows has its own independent bank while the draws stay identical
// across all s (common random numbers in s) and across thread counts.
// Per-pair banks keep the image directions from collapsing onto shared point
// atoms, which would leave B/G-granular noise in the eigenmeasure; sharing
// within a pair makes e(x) = e(-x) hold exactly on symmetric grids.
struct OperatorEnsemble {
  ModelSpec spec;
  std::uint64_t seed = 0;
  std::size_t draws_per_row = 0;  // B

  WeightSample draw(std::size_t row_pair, std::size_t b) const {
    RngStream rng = RngStream::keyed(seed, (std::uint64_t(row_pair) << 40) | b,
                                     /*salt=*/0x6f706572ull);  // "oper"
    return sample_weights(spec, rng);
  }
};

// Monte Carlo discretization of the transfer operator
//   T_s f(x) = E[ f((xC)~) |xC|^s ],  C = C_I, I uniform on {1..N},
// on a sphere grid: every (draw, branch) pair contributes weight
// |x_g C|^s / (B N) to the cell containing the image direction. Terms with
// |x_g C| = 0 are dropped. Entries are kept unnormalized with an explicit
// denominator so the s=0 operator has row sums exactly 1.
class TransferOperator {
 public:
  TransferOperator(const OperatorEnsemble& ensemble, const SphereGrid& grid, double s,
                   int threads = 0);

  double s() const { return s_; }
  int size() const { return static_cast<int>(acc_.rows()); }
  const SphereGrid& grid() const { return *grid_; }

  Eigen::VectorXd apply(const Eigen::VectorXd& f) const;          // T f
  Eigen::VectorXd apply_adjoint(const Eigen::VectorXd& nu) const; // T^T nu
  Eigen::VectorXd row_sums() const;                               // T applied to 1

 private:
  const SphereGrid* grid_;
  double s_;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> acc_;
  double den_;
};

// Eigen-elements of one discretized operator at a fixed s.
struct SpectralSolution {
  double s = 0.0;
  double kappa = 0.0;           // dominant eigenvalue; m(s) = N kappa(s)
  Eigen::VectorXd e;            // eigenfunction on the nodes, int e dnu = 1
  Eigen::VectorXd nu;           // eigenmeasure weights, total mass 1
  double residual = 0.0;        // ||T e - kappa e||_inf / (kappa ||e||_inf)
  std::uint64_t iterations = 0;
  int grid_dim = 0;
  int grid_size = 0;
};

// Power iteration (forward for e, adjoint for nu) with eigenvalue damping so
// kernels with near-peripheral spectrum (deterministic rotations) still
// converge. Throws EstimationError with the last residual on non-convergence.
SpectralSolution power_iterate(const TransferOperator& op, double tol = 1e-10,
                               std::uint64_t max_iter = 20000);

}  // namespace mstlab
