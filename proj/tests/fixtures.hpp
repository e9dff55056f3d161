#pragma once

#include <cmath>
#include <string>

#include "mstlab/model.hpp"

// Reference models shared across the test suites.
namespace fixtures {

// Similarity scales lognormal with sigma^2 = 2 ln2 / 3, mu = -2 sigma^2:
// the roots of ln2 + mu s + sigma^2 s^2/2 are exactly s = 1 and s = 3.
inline mstlab::ModelSpec lognormal_beta3() {
  const double sigma2 = 2.0 * std::log(2.0) / 3.0;
  mstlab::ModelSpec spec;
  spec.family = mstlab::Family::kSimilarity;
  spec.d = 2;
  spec.N = 2;
  spec.scale.dist = mstlab::ScalarDist::kLogNormal;
  spec.scale.sigma2 = sigma2;
  spec.scale.mu = -2.0 * sigma2;
  spec.rotation.dist = mstlab::RotationDist::kUniform;
  spec.q.dist = mstlab::QDist::kGaussian;
  spec.q.scale = 1.0;
  return spec;
}

// sigma^2 = ln2, mu = -1.5 ln2: roots at s = 1 and s = 2 with m'(2) > 0,
// and l_2 = E[t^2 log t] = ln2/4 exactly.
inline mstlab::ModelSpec lognormal_beta2() {
  const double ln2 = std::log(2.0);
  mstlab::ModelSpec spec;
  spec.family = mstlab::Family::kSimilarity;
  spec.d = 2;
  spec.N = 2;
  spec.scale.dist = mstlab::ScalarDist::kLogNormal;
  spec.scale.sigma2 = ln2;
  spec.scale.mu = -1.5 * ln2;
  spec.rotation.dist = mstlab::RotationDist::kUniform;
  spec.q.dist = mstlab::QDist::kGaussian;
  spec.q.scale = 1.0;
  return spec;
}

// Two-point inelasticity U in {1/2, 3/2} with P(U=1/2)=3/4: E U = E U^2 = 3/4,
// so E[U(1-U)] = 0 and the covariance identity holds with Sigma = Id.
inline mstlab::ModelSpec maxwell(int d = 3) {
  mstlab::ModelSpec spec;
  spec.family = mstlab::Family::kMaxwell;
  spec.d = d;
  spec.N = 2;
  spec.inelasticity.dist = mstlab::ScalarDist::kTwoPoint;
  spec.inelasticity.a = 0.5;
  spec.inelasticity.b = 1.5;
  spec.inelasticity.p = 0.75;
  spec.q.dist = mstlab::QDist::kZero;
  return spec;
}

inline mstlab::ModelSpec diagonal() {
  mstlab::ModelSpec spec;
  spec.family = mstlab::Family::kDiagonalDeterministic;
  spec.d = 2;
  spec.N = 2;
  spec.q.dist = mstlab::QDist::kZero;
  return spec;
}

inline mstlab::ModelSpec general2x2() {
  mstlab::ModelSpec spec;
  spec.family = mstlab::Family::kGeneralMatrix;
  spec.d = 2;
  spec.N = 2;
  spec.entry_mean = 0.3;
  spec.entry_scale = 0.4;
  spec.mean_pattern = mstlab::MeanPattern::kBranchDiagonal;
  spec.cond_cap = 1e8;
  spec.q.dist = mstlab::QDist::kGaussian;
  spec.q.scale = 1.0;
  return spec;
}

// Deterministic similarity: C_i = t k with a fixed rotation angle.
inline mstlab::ModelSpec deterministic_similarity(double t, double angle = 0.0) {
  mstlab::ModelSpec spec;
  spec.family = mstlab::Family::kSimilarity;
  spec.d = 2;
  spec.N = 2;
  spec.scale.dist = mstlab::ScalarDist::kFixed;
  spec.scale.value = t;
  spec.rotation.dist = mstlab::RotationDist::kFixedAngle;
  spec.rotation.angle = angle;
  spec.q.dist = mstlab::QDist::kZero;
  return spec;
}

}  // namespace fixtures
