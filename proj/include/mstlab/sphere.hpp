#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace mstlab {

// Discretization of the unit sphere by G cells with one node per cell.
//   d=1: the two points {+1,-1}.
//   d=2: equiangular arcs (G even), nodes at arc midpoints.
//   d=3: zonal equal-area partition (equal-height z-bands split into an even
//        number of sectors), nodes at cell centers; exactly antipodally
//        symmetric and every cell has spherical measure 1/G.
//   d>=4: seeded quasi-uniform node cloud, nearest-node cells (measure
//        weights approximated as 1/G).
// `cell_of` maps a direction to its cell index in O(1) for d<=3; transfer
// operators use it as the piecewise-constant projection onto the grid.
class SphereGrid {
 public:
  SphereGrid(int d, int count, std::uint64_t seed = 0);

  int dim() const { return d_; }
  int size() const { return static_cast<int>(nodes_.cols()); }
  const Eigen::MatrixXd& nodes() const { return nodes_; }             // d x G
  Eigen::VectorXd node(int g) const { return nodes_.col(g); }
  const Eigen::VectorXd& weights() const { return weights_; }         // sums to 1

  // Index of the cell containing direction v (need not be normalized).
  int cell_of(const Eigen::VectorXd& v) const;

  // Index of the node at -x_g; exact for d<=3 by construction.
  int antipode(int g) const { return antipode_[g]; }
  bool centrally_symmetric() const { return symmetric_; }

 private:
  void build_circle(int count);
  void build_zonal3(int count);
  void build_cloud(int count, std::uint64_t seed);

  int d_;
  Eigen::MatrixXd nodes_;
  Eigen::VectorXd weights_;
  std::vector<int> antipode_;
  bool symmetric_ = false;

  // d=3 zonal layout: ring r spans z in [z_hi_[r+1], z_hi_[r]] with sectors_[r]
  // equal sectors; cell index = ring_offset_[r] + sector.
  std::vector<double> z_hi_;
  std::vector<int> sectors_;
  std::vector<int> ring_offset_;
};

}  // namespace mstlab
