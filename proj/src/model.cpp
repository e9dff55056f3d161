#include "mstlab/model.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "mstlab/common.hpp"

namespace mstlab {

std::string family_name(Family f) {
  switch (f) {
    case Family::kGeneralMatrix: return "general-matrix";
    case Family::kSimilarity: return "similarity";
    case Family::kMaxwell: return "maxwell";
    case Family::kDiagonalDeterministic: return "diagonal-deterministic";
  }
  return "?";
}

Family family_from_name(const std::string& s) {
  if (s == "general-matrix") return Family::kGeneralMatrix;
  if (s == "similarity") return Family::kSimilarity;
  if (s == "maxwell") return Family::kMaxwell;
  if (s == "diagonal-deterministic") return Family::kDiagonalDeterministic;
  throw ConfigError("unknown family: " + s);
}

double ScalarLaw::sample(RngStream& rng) const {
  switch (dist) {
    case ScalarDist::kLogNormal:
      return std::exp(mu + std::sqrt(sigma2) * rng.normal());
    case ScalarDist::kTwoPoint:
      return rng.uniform01() < p ? a : b;
    case ScalarDist::kFixed:
      return value;
  }
  return value;
}

double ScalarLaw::moment(double s) const {
  switch (dist) {
    case ScalarDist::kLogNormal:
      return std::exp(mu * s + 0.5 * sigma2 * s * s);
    case ScalarDist::kTwoPoint:
      return p * std::pow(a, s) + (1.0 - p) * std::pow(b, s);
    case ScalarDist::kFixed:
      return std::pow(value, s);
  }
  return 0.0;
}

double ScalarLaw::log_moment(double s) const {
  switch (dist) {
    case ScalarDist::kLogNormal:
      return moment(s) * (mu + sigma2 * s);
    case ScalarDist::kTwoPoint:
      return p * std::pow(a, s) * std::log(a) + (1.0 - p) * std::pow(b, s) * std::log(b);
    case ScalarDist::kFixed:
      return std::pow(value, s) * std::log(value);
  }
  return 0.0;
}

Eigen::VectorXd QLaw::sample(int d, RngStream& rng) const {
  switch (dist) {
    case QDist::kZero: return Eigen::VectorXd::Zero(d);
    case QDist::kGaussian: {
      Eigen::VectorXd q(d);
      for (int i = 0; i < d; ++i) q(i) = scale * rng.normal();
      return q;
    }
    case QDist::kFixed: return value;
  }
  return Eigen::VectorXd::Zero(d);
}

Eigen::VectorXd QLaw::mean(int d) const {
  if (dist == QDist::kFixed) return value;
  return Eigen::VectorXd::Zero(d);
}

Eigen::VectorXd uniform_sphere(int d, RngStream& rng) {
  Eigen::VectorXd y(d);
  for (;;) {
    for (int i = 0; i < d; ++i) y(i) = rng.normal();
    double n = y.norm();
    if (n > 1e-12) return y / n;
  }
}

Eigen::MatrixXd RotationLaw::sample(int d, RngStream& rng) const {
  switch (dist) {
    case RotationDist::kFixedAngle: {
      Eigen::MatrixXd k = Eigen::MatrixXd::Identity(d, d);
      double c = std::cos(angle), s = std::sin(angle);
      k(0, 0) = c; k(0, 1) = -s; k(1, 0) = s; k(1, 1) = c;
      return k;
    }
    case RotationDist::kFixedMatrix:
      return matrix;
    case RotationDist::kUniform:
      break;
  }
  if (d == 1) return Eigen::MatrixXd::Constant(1, 1, rng.uniform01() < 0.5 ? -1.0 : 1.0);
  if (d == 2) {
    double a = 6.283185307179586476925286766559 * rng.uniform01();
    Eigen::MatrixXd k(2, 2);
    k << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
    return k;
  }
  // Haar rotation via QR of a Gaussian matrix, sign-fixed on the R diagonal.
  Eigen::MatrixXd g(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < d; ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  return q;
}

void ModelSpec::validate() const {
  if (N < 2) throw ConfigError("N must be >= 2 (the smoothing transform assumes N > 1)");
  if (d < 1) throw ConfigError("d must be >= 1");
  switch (family) {
    case Family::kMaxwell:
      if (N != 2) throw ConfigError("maxwell family requires N=2");
      if (inelasticity.dist == ScalarDist::kLogNormal && inelasticity.sigma2 <= 0)
        throw ConfigError("u.sigma2 must be > 0");
      if (inelasticity.dist == ScalarDist::kTwoPoint) {
        if (!(inelasticity.a > 0) || !(inelasticity.b > 0))
          throw ConfigError("u.a and u.b must be > 0");
        if (!(inelasticity.p > 0.0 && inelasticity.p < 1.0))
          throw ConfigError("two-point inelasticity needs a < 1 < b so that E U(1-U) = 0 "
                            "admits a mixing weight in (0,1)");
      }
      break;
    case Family::kSimilarity:
      if (scale.dist == ScalarDist::kLogNormal && scale.sigma2 <= 0)
        throw ConfigError("t.sigma2 must be > 0");
      if (scale.dist == ScalarDist::kTwoPoint &&
          (!(scale.a > 0) || !(scale.b > 0) || !(scale.p >= 0 && scale.p <= 1)))
        throw ConfigError("two-point scale parameters out of range");
      if (scale.dist == ScalarDist::kFixed && !(scale.value > 0))
        throw ConfigError("t.value must be > 0");
      if (rotation.dist == RotationDist::kFixedAngle && d != 2)
        throw ConfigError("rot.dist=fixed-angle requires d=2");
      if (rotation.dist == RotationDist::kFixedMatrix) {
        if (rotation.matrix.rows() != d || rotation.matrix.cols() != d)
          throw ConfigError("rot.matrix has wrong dimensions");
        double dev = (rotation.matrix * rotation.matrix.transpose() -
                      Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff();
        if (dev > 1e-10)
          throw ConfigError("rot.matrix is not orthogonal (k k^T deviates from Id by " +
                            std::to_string(dev) + ")");
      }
      break;
    case Family::kDiagonalDeterministic:
      if (d < 2) throw ConfigError("diagonal-deterministic family requires d >= 2");
      break;
    case Family::kGeneralMatrix:
      if (!(entry_scale > 0)) throw ConfigError("c.scale must be > 0");
      if (!(cond_cap > 1)) throw ConfigError("c.cond-cap must be > 1");
      break;
  }
  if (q.dist == QDist::kGaussian && !(q.scale >= 0)) throw ConfigError("q.scale must be >= 0");
  if (q.dist == QDist::kFixed && q.value.size() != d)
    throw ConfigError("q.value must have d components");
}

SimilarityElement sample_similarity_element(const ModelSpec& spec, RngStream& rng) {
  SimilarityElement el;
  el.scale = spec.scale.sample(rng);
  el.rotation = spec.rotation.sample(spec.d, rng);
  return el;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> maxwell_weights(double u, const Eigen::VectorXd& y) {
  Eigen::MatrixXd proj = u * (y * y.transpose());
  Eigen::MatrixXd c2 = Eigen::MatrixXd::Identity(y.size(), y.size()) - proj;
  return {proj, c2};
}

namespace {

Eigen::MatrixXd diagonal_deterministic_matrix(int d, int n) {
  // First direction contracts like N^{-1/3}, the rest like N^{-1/2}.
  Eigen::VectorXd diag = Eigen::VectorXd::Constant(d, std::pow(double(n), -0.5));
  diag(0) = std::pow(double(n), -1.0 / 3.0);
  return diag.asDiagonal();
}

Eigen::MatrixXd sample_general_entry_matrix(const ModelSpec& spec, int branch, RngStream& rng,
                                            std::uint64_t* resamples) {
  const int d = spec.d;
  Eigen::MatrixXd mean = Eigen::MatrixXd::Constant(d, d, spec.entry_mean);
  if (spec.mean_pattern == MeanPattern::kBranchDiagonal) {
    mean.setZero();
    mean(branch % d, branch % d) = spec.entry_mean;
  }
  for (;;) {
    Eigen::MatrixXd c(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) c(i, j) = mean(i, j) + spec.entry_scale * rng.normal();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(c);
    double smin = svd.singularValues()(d - 1);
    double smax = svd.singularValues()(0);
    if (smin > 0 && smax / smin <= spec.cond_cap) return c;
    if (resamples) ++*resamples;
  }
}

}  // namespace

WeightSample sample_weights(const ModelSpec& spec, RngStream& rng, std::uint64_t* resamples) {
  WeightSample w;
  w.C.reserve(spec.N);
  switch (spec.family) {
    case Family::kMaxwell: {
      double u = spec.inelasticity.sample(rng);
      Eigen::VectorXd y = uniform_sphere(spec.d, rng);
      auto [c1, c2] = maxwell_weights(u, y);
      w.C.push_back(std::move(c1));
      w.C.push_back(std::move(c2));
      break;
    }
    case Family::kSimilarity:
      for (int i = 0; i < spec.N; ++i)
        w.C.push_back(sample_similarity_element(spec, rng).matrix());
      break;
    case Family::kDiagonalDeterministic: {
      Eigen::MatrixXd c = diagonal_deterministic_matrix(spec.d, spec.N);
      for (int i = 0; i < spec.N; ++i) w.C.push_back(c);
      break;
    }
    case Family::kGeneralMatrix:
      for (int i = 0; i < spec.N; ++i)
        w.C.push_back(sample_general_entry_matrix(spec, i, rng, resamples));
      break;
  }
  w.Q = spec.q.sample(spec.d, rng);
  return w;
}

double operator_norm(const Eigen::MatrixXd& m) {
  if (m.rows() == 1 && m.cols() == 1) return std::abs(m(0, 0));
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(0);
}

// ---------------------------------------------------------------------------
// Config parsing: flat key=value text, '#' comments, unknown keys are errors.

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("bad numeric value for " + key + ": '" + v + "'");
  }
}

int to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    int x = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("bad integer value for " + key + ": '" + v + "'");
  }
}

Eigen::VectorXd parse_vector(const std::string& key, const std::string& v) {
  std::vector<double> vals;
  std::stringstream ss(v);
  std::string tok;
  while (std::getline(ss, tok, ',')) vals.push_back(to_double(key, trim(tok)));
  Eigen::VectorXd out(vals.size());
  for (std::size_t i = 0; i < vals.size(); ++i) out(i) = vals[i];
  return out;
}

Eigen::MatrixXd parse_matrix(const std::string& key, const std::string& v) {
  std::vector<Eigen::VectorXd> rows;
  std::stringstream ss(v);
  std::string row;
  while (std::getline(ss, row, ';')) rows.push_back(parse_vector(key, trim(row)));
  if (rows.empty()) throw ConfigError("empty matrix for " + key);
  Eigen::MatrixXd out(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != out.cols()) throw ConfigError("ragged matrix for " + key);
    out.row(i) = rows[i];
  }
  return out;
}

}  // namespace

ModelSpec ModelSpec::parse(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("malformed config line: '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (kv.count(key)) throw ConfigError("duplicate config key: " + key);
    kv[key] = val;
  }

  ModelSpec spec;
  auto take = [&](const std::string& key) -> std::optional<std::string> {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    std::string v = it->second;
    kv.erase(it);
    return v;
  };

  auto fam = take("family");
  if (!fam) throw ConfigError("missing required key: family");
  spec.family = family_from_name(*fam);
  if (auto v = take("d")) spec.d = to_int("d", *v);
  if (auto v = take("N")) spec.N = to_int("N", *v);
  if (auto v = take("s-max-hint")) spec.s_max_hint = to_double("s-max-hint", *v);

  if (auto v = take("q.dist")) {
    if (*v == "zero") spec.q.dist = QDist::kZero;
    else if (*v == "gaussian") spec.q.dist = QDist::kGaussian;
    else if (*v == "fixed") spec.q.dist = QDist::kFixed;
    else throw ConfigError("q.dist must be zero|gaussian|fixed");
  }
  if (auto v = take("q.scale")) spec.q.scale = to_double("q.scale", *v);
  if (auto v = take("q.value")) spec.q.value = parse_vector("q.value", *v);

  switch (spec.family) {
    case Family::kSimilarity: {
      if (auto v = take("t.dist")) {
        if (*v == "lognormal") spec.scale.dist = ScalarDist::kLogNormal;
        else if (*v == "two-point") spec.scale.dist = ScalarDist::kTwoPoint;
        else if (*v == "fixed") spec.scale.dist = ScalarDist::kFixed;
        else throw ConfigError("t.dist must be lognormal|two-point|fixed");
      }
      if (auto v = take("t.mu")) spec.scale.mu = to_double("t.mu", *v);
      if (auto v = take("t.sigma2")) spec.scale.sigma2 = to_double("t.sigma2", *v);
      if (auto v = take("t.a")) spec.scale.a = to_double("t.a", *v);
      if (auto v = take("t.b")) spec.scale.b = to_double("t.b", *v);
      if (auto v = take("t.p")) spec.scale.p = to_double("t.p", *v);
      if (auto v = take("t.value")) spec.scale.value = to_double("t.value", *v);
      if (auto v = take("rot.dist")) {
        if (*v == "uniform") spec.rotation.dist = RotationDist::kUniform;
        else if (*v == "fixed-angle") spec.rotation.dist = RotationDist::kFixedAngle;
        else if (*v == "matrix") spec.rotation.dist = RotationDist::kFixedMatrix;
        else throw ConfigError("rot.dist must be uniform|fixed-angle|matrix");
      }
      if (auto v = take("rot.angle")) spec.rotation.angle = to_double("rot.angle", *v);
      if (auto v = take("rot.matrix")) spec.rotation.matrix = parse_matrix("rot.matrix", *v);
      break;
    }
    case Family::kMaxwell: {
      spec.inelasticity.dist = ScalarDist::kTwoPoint;
      if (auto v = take("u.dist")) {
        if (*v == "lognormal") spec.inelasticity.dist = ScalarDist::kLogNormal;
        else if (*v == "two-point") spec.inelasticity.dist = ScalarDist::kTwoPoint;
        else throw ConfigError("u.dist must be lognormal|two-point");
      }
      if (spec.inelasticity.dist == ScalarDist::kLogNormal) {
        spec.inelasticity.sigma2 = 0.25;
        if (auto v = take("u.sigma2")) spec.inelasticity.sigma2 = to_double("u.sigma2", *v);
        // E U = E U^2 (i.e. E[U(1-U)] = 0) forces mu = -3 sigma^2 / 2.
        spec.inelasticity.mu = -1.5 * spec.inelasticity.sigma2;
      } else {
        if (auto v = take("u.a")) spec.inelasticity.a = to_double("u.a", *v);
        if (auto v = take("u.b")) spec.inelasticity.b = to_double("u.b", *v);
        // Mixing weight solving E[U(1-U)] = 0 for atoms a < 1 < b.
        double ga = spec.inelasticity.a * (spec.inelasticity.a - 1.0);
        double gb = spec.inelasticity.b * (spec.inelasticity.b - 1.0);
        spec.inelasticity.p = gb / (gb - ga);
      }
      break;
    }
    case Family::kGeneralMatrix: {
      if (auto v = take("c.mean")) spec.entry_mean = to_double("c.mean", *v);
      if (auto v = take("c.scale")) spec.entry_scale = to_double("c.scale", *v);
      if (auto v = take("c.cond-cap")) spec.cond_cap = to_double("c.cond-cap", *v);
      if (auto v = take("c.mean-pattern")) {
        if (*v == "constant") spec.mean_pattern = MeanPattern::kConstant;
        else if (*v == "branch-diagonal") spec.mean_pattern = MeanPattern::kBranchDiagonal;
        else throw ConfigError("c.mean-pattern must be constant|branch-diagonal");
      }
      break;
    }
    case Family::kDiagonalDeterministic:
      break;
  }

  if (!kv.empty()) {
    std::string keys;
    for (const auto& [k, v] : kv) keys += (keys.empty() ? "" : ", ") + k;
    throw ConfigError("unrecognized config keys: " + keys);
  }
  spec.validate();
  return spec;
}

ModelSpec ModelSpec::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string ModelSpec::canonical_text() const {
  std::ostringstream o;
  o.precision(17);
  o << "family=" << family_name(family) << "\nd=" << d << "\nN=" << N << "\n";
  if (s_max_hint) o << "s-max-hint=" << *s_max_hint << "\n";
  switch (q.dist) {
    case QDist::kZero: o << "q.dist=zero\n"; break;
    case QDist::kGaussian: o << "q.dist=gaussian\nq.scale=" << q.scale << "\n"; break;
    case QDist::kFixed:
      o << "q.dist=fixed\nq.value=";
      for (int i = 0; i < q.value.size(); ++i) o << (i ? "," : "") << q.value(i);
      o << "\n";
      break;
  }
  auto put_scalar = [&](const char* prefix, const ScalarLaw& law) {
    switch (law.dist) {
      case ScalarDist::kLogNormal:
        o << prefix << ".dist=lognormal\n" << prefix << ".mu=" << law.mu << "\n"
          << prefix << ".sigma2=" << law.sigma2 << "\n";
        break;
      case ScalarDist::kTwoPoint:
        o << prefix << ".dist=two-point\n" << prefix << ".a=" << law.a << "\n"
          << prefix << ".b=" << law.b << "\n" << prefix << ".p=" << law.p << "\n";
        break;
      case ScalarDist::kFixed:
        o << prefix << ".dist=fixed\n" << prefix << ".value=" << law.value << "\n";
        break;
    }
  };
  switch (family) {
    case Family::kSimilarity:
      put_scalar("t", scale);
      switch (rotation.dist) {
        case RotationDist::kUniform: o << "rot.dist=uniform\n"; break;
        case RotationDist::kFixedAngle: o << "rot.dist=fixed-angle\nrot.angle=" << rotation.angle << "\n"; break;
        case RotationDist::kFixedMatrix:
          o << "rot.dist=matrix\nrot.matrix=";
          for (int i = 0; i < rotation.matrix.rows(); ++i) {
            if (i) o << ";";
            for (int j = 0; j < rotation.matrix.cols(); ++j)
              o << (j ? "," : "") << rotation.matrix(i, j);
          }
          o << "\n";
          break;
      }
      break;
    case Family::kMaxwell: put_scalar("u", inelasticity); break;
    case Family::kGeneralMatrix:
      o << "c.mean=" << entry_mean << "\nc.scale=" << entry_scale
        << "\nc.mean-pattern=" << (mean_pattern == MeanPattern::kConstant ? "constant" : "branch-diagonal")
        << "\nc.cond-cap=" << cond_cap << "\n";
      break;
    case Family::kDiagonalDeterministic: break;
  }
  return o.str();
}

std::uint64_t ModelSpec::hash() const { return fnv1a64(canonical_text()); }

}  // namespace mstlab
