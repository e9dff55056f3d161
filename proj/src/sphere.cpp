#include "mstlab/sphere.hpp"

#include <algorithm>
#include <cmath>

#include "mstlab/common.hpp"
#include "mstlab/model.hpp"
#include "mstlab/rng.hpp"

namespace mstlab {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

SphereGrid::SphereGrid(int d, int count, std::uint64_t seed) : d_(d) {
  if (d < 1) throw UsageError("SphereGrid: d must be >= 1");
  if (count < 2) count = 2;
  if (d == 1) {
    nodes_.resize(1, 2);
    nodes_(0, 0) = 1.0;
    nodes_(0, 1) = -1.0;
    weights_ = Eigen::VectorXd::Constant(2, 0.5);
    antipode_ = {1, 0};
    symmetric_ = true;
    return;
  }
  if (count % 2) ++count;  // central symmetry needs an even node count
  if (d == 2) {
    build_circle(count);
  } else if (d == 3) {
    build_zonal3(count);
  } else {
    build_cloud(count, seed);
  }
}

void SphereGrid::build_circle(int count) {
  nodes_.resize(2, count);
  weights_ = Eigen::VectorXd::Constant(count, 1.0 / count);
  antipode_.resize(count);
  for (int g = 0; g < count; ++g) {
    double a = kTwoPi * (g + 0.5) / count;
    nodes_(0, g) = std::cos(a);
    nodes_(1, g) = std::sin(a);
    antipode_[g] = (g + count / 2) % count;
  }
  symmetric_ = true;
}

void SphereGrid::build_zonal3(int count) {
  // Even sector counts per ring, mirrored about the equator; ring heights are
  // derived from the sector counts so every cell has measure exactly 1/G.
  const int half = count / 2;
  int rings_half = std::max(1, int(std::lround(std::sqrt(3.141592653589793 * count) / 4.0)));
  // Provisional equal-height bands to estimate ring latitudes.
  std::vector<double> ideal(rings_half);
  double total = 0.0;
  for (int r = 0; r < rings_half; ++r) {
    double z_mid = 1.0 - (r + 0.5) / rings_half;  // in (0,1)
    ideal[r] = std::sqrt(std::max(0.0, 1.0 - z_mid * z_mid));
    total += ideal[r];
  }
  std::vector<int> sec(rings_half);
  int assigned = 0;
  for (int r = 0; r < rings_half; ++r) {
    int n = 2 * std::max(1, int(std::lround(ideal[r] / total * half / 2.0)));
    sec[r] = n;
    assigned += n;
  }
  // Repair the rounding so the hemisphere holds exactly half the cells,
  // keeping every sector count even and positive.
  int r_fix = rings_half - 1;
  while (assigned != half) {
    if (assigned < half) {
      sec[r_fix] += 2;
      assigned += 2;
    } else if (sec[r_fix] > 2) {
      sec[r_fix] -= 2;
      assigned -= 2;
    } else {
      r_fix = (r_fix + rings_half - 1) % rings_half;
      continue;
    }
    r_fix = (r_fix + rings_half - 1) % rings_half;
  }

  const int rings = 2 * rings_half;
  sectors_.resize(rings);
  for (int r = 0; r < rings_half; ++r) {
    sectors_[r] = sec[r];
    sectors_[rings - 1 - r] = sec[r];
  }
  z_hi_.resize(rings + 1);
  z_hi_[0] = 1.0;
  for (int r = 0; r < rings; ++r) z_hi_[r + 1] = z_hi_[r] - 2.0 * sectors_[r] / count;
  // Pin the equator and mirror the southern boundaries so the cell complex is
  // exactly antipodally symmetric despite accumulation rounding.
  z_hi_[rings / 2] = 0.0;
  for (int r = rings / 2 + 1; r <= rings; ++r) z_hi_[r] = -z_hi_[rings - r];

  ring_offset_.resize(rings + 1);
  ring_offset_[0] = 0;
  for (int r = 0; r < rings; ++r) ring_offset_[r + 1] = ring_offset_[r] + sectors_[r];

  nodes_.resize(3, count);
  weights_ = Eigen::VectorXd::Constant(count, 1.0 / count);
  antipode_.resize(count);
  for (int r = 0; r < rings; ++r) {
    double z_mid = 0.5 * (z_hi_[r] + z_hi_[r + 1]);
    double rho = std::sqrt(std::max(0.0, 1.0 - z_mid * z_mid));
    int n = sectors_[r];
    for (int j = 0; j < n; ++j) {
      int g = ring_offset_[r] + j;
      double phi = kTwoPi * (j + 0.5) / n;
      nodes_(0, g) = rho * std::cos(phi);
      nodes_(1, g) = rho * std::sin(phi);
      nodes_(2, g) = z_mid;
      antipode_[g] = ring_offset_[rings - 1 - r] + (j + n / 2) % n;
    }
  }
  symmetric_ = true;
}

void SphereGrid::build_cloud(int count, std::uint64_t seed) {
  nodes_.resize(d_, count);
  weights_ = Eigen::VectorXd::Constant(count, 1.0 / count);
  antipode_.resize(count);
  RngStream rng = RngStream::keyed(seed, 0, /*salt=*/0x67726964ull);  // "grid"
  for (int g = 0; g < count / 2; ++g) {
    Eigen::VectorXd y = uniform_sphere(d_, rng);
    nodes_.col(2 * g) = y;
    nodes_.col(2 * g + 1) = -y;
    antipode_[2 * g] = 2 * g + 1;
    antipode_[2 * g + 1] = 2 * g;
  }
  symmetric_ = true;
}

int SphereGrid::cell_of(const Eigen::VectorXd& v) const {
  if (d_ == 1) return v(0) >= 0.0 ? 0 : 1;
  if (d_ == 2) {
    double phi = std::atan2(v(1), v(0));
    if (phi < 0) phi += kTwoPi;
    int g = int(phi / kTwoPi * size());
    return std::min(g, size() - 1);
  }
  if (d_ == 3) {
    double n = v.norm();
    double z = n > 0 ? v(2) / n : 1.0;
    z = std::clamp(z, -1.0, 1.0);
    // Ring r covers z in (z_hi_[r+1], z_hi_[r]].
    int lo = 0, hi = int(sectors_.size()) - 1;
    while (lo < hi) {
      int mid = (lo + hi) / 2;
      if (z > z_hi_[mid + 1])
        hi = mid;
      else
        lo = mid + 1;
    }
    double phi = std::atan2(v(1), v(0));
    if (phi < 0) phi += kTwoPi;
    int nr = sectors_[lo];
    int j = std::min(int(phi / kTwoPi * nr), nr - 1);
    return ring_offset_[lo] + j;
  }
  // Nearest node, brute force.
  Eigen::VectorXd u = v.normalized();
  int best = 0;
  double best_dot = -2.0;
  for (int g = 0; g < size(); ++g) {
    double dot = nodes_.col(g).dot(u);
    if (dot > best_dot) {
      best_dot = dot;
      best = g;
    }
  }
  return best;
}

}  // namespace mstlab
