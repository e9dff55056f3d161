#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mstlab/rng.hpp"

namespace mstlab {

enum class Family { kGeneralMatrix, kSimilarity, kMaxwell, kDiagonalDeterministic };

std::string family_name(Family f);
Family family_from_name(const std::string& s);

enum class ScalarDist { kLogNormal, kTwoPoint, kFixed };
enum class RotationDist { kUniform, kFixedAngle, kFixedMatrix };
enum class QDist { kZero, kGaussian, kFixed };
enum class MeanPattern { kConstant, kBranchDiagonal };

// Law of the positive scalar part (similarity scale t, Maxwell inelasticity U).
struct ScalarLaw {
  ScalarDist dist = ScalarDist::kLogNormal;
  double mu = 0.0;      // lognormal: log t ~ N(mu, sigma2)
  double sigma2 = 1.0;
  double a = 0.5, b = 1.5, p = 0.5;  // two-point: P(t=a)=p, P(t=b)=1-p
  double value = 1.0;                // fixed

  double sample(RngStream& rng) const;
  double moment(double s) const;          // E t^s
  double log_moment(double s) const;      // E[t^s log t]
};

struct QLaw {
  QDist dist = QDist::kZero;
  double scale = 1.0;                 // gaussian: Q ~ N(0, scale^2 Id)
  Eigen::VectorXd value;              // fixed

  bool is_zero() const { return dist == QDist::kZero; }
  Eigen::VectorXd sample(int d, RngStream& rng) const;
  Eigen::VectorXd mean(int d) const;
};

struct RotationLaw {
  RotationDist dist = RotationDist::kUniform;
  double angle = 0.0;          // fixed-angle, d=2
  Eigen::MatrixXd matrix;      // fixed-matrix

  Eigen::MatrixXd sample(int d, RngStream& rng) const;
};

// Declarative description of the joint law of (C_1, ..., C_N, Q).
struct ModelSpec {
  Family family = Family::kSimilarity;
  int d = 2;
  int N = 2;
  QLaw q;
  std::optional<double> s_max_hint;

  // similarity
  ScalarLaw scale;
  RotationLaw rotation;

  // maxwell: inelasticity U; the two-point/lognormal parameters are
  // reparameterized so that E[U(1-U)] = 0 (see docs/README).
  ScalarLaw inelasticity;

  // general-matrix: iid Gaussian entries, optional per-branch mean pattern,
  // condition-number resampling cap.
  double entry_mean = 0.0;
  double entry_scale = 1.0;
  MeanPattern mean_pattern = MeanPattern::kConstant;
  double cond_cap = 1e8;

  void validate() const;  // throws ConfigError
  bool norm_multiplicative() const {
    return family == Family::kSimilarity || family == Family::kDiagonalDeterministic;
  }
  std::string canonical_text() const;
  std::uint64_t hash() const;

  static ModelSpec parse(const std::string& text);  // flat key=value config
  static ModelSpec load(const std::string& path);
};

// One realization of (C_1, ..., C_N, Q).
struct WeightSample {
  std::vector<Eigen::MatrixXd> C;
  Eigen::VectorXd Q;
};

// Scale/rotation decomposition of a similarity t*k; k k^T = Id within 1e-10
// and the operator norm of the assembled matrix equals t.
struct SimilarityElement {
  double scale = 1.0;
  Eigen::MatrixXd rotation;
  Eigen::MatrixXd matrix() const { return scale * rotation; }
  double orthogonality_defect() const {
    return (rotation * rotation.transpose() -
            Eigen::MatrixXd::Identity(rotation.rows(), rotation.cols()))
        .cwiseAbs()
        .maxCoeff();
  }
};

SimilarityElement sample_similarity_element(const ModelSpec& spec, RngStream& rng);

// Draws one weight sample from the spec's joint law; `resamples`, when given,
// counts condition-number rejections of the general-matrix family.
WeightSample sample_weights(const ModelSpec& spec, RngStream& rng,
                            std::uint64_t* resamples = nullptr);

// Maxwell kernel for a forced draw (U, Y): C1 = U Y^T Y, C2 = Id - U Y^T Y.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> maxwell_weights(double u,
                                                            const Eigen::VectorXd& y);

// Direction action used throughout: for a row direction y, the row vector yC
// is represented as C^T y (all our matrices act on column vectors).
inline Eigen::VectorXd direction_action(const Eigen::MatrixXd& c, const Eigen::VectorXd& y) {
  return c.transpose() * y;
}

double operator_norm(const Eigen::MatrixXd& m);
Eigen::VectorXd uniform_sphere(int d, RngStream& rng);

}  // namespace mstlab
