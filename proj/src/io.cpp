#include "mstlab/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>

#include "mstlab/common.hpp"

namespace mstlab {

namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

void atomic_write(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw ConfigError("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return s;
}

std::string Manifest::hash() const {
  std::string basis = command + "\n" + config_hash + "\n" + std::to_string(seed) + "\n";
  for (const auto& [k, v] : knobs) basis += k + "=" + v + "\n";
  return hex64(fnv1a64(basis));
}

nlohmann::json Manifest::to_json() const {
  nlohmann::json j;
  j["tool"] = tool_version;
  j["command"] = command;
  j["config"] = config_path;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["threads"] = threads;
  j["knobs"] = knobs;
  j["manifest_hash"] = hash();
  return j;
}

CsvWriter::CsvWriter(const std::string& manifest_hash) {
  out_ = "# manifest=" + manifest_hash + "\n";
}

void CsvWriter::header(const std::vector<std::string>& cols) {
  for (std::size_t i = 0; i < cols.size(); ++i) out_ += (i ? "," : "") + cols[i];
  out_ += "\n";
}

void CsvWriter::row(const std::vector<double>& values) {
  for (std::size_t i = 0; i < values.size(); ++i)
    out_ += (i ? "," : "") + format_double(values[i]);
  out_ += "\n";
}

void CsvWriter::mixed_row(const std::vector<std::string>& values) {
  for (std::size_t i = 0; i < values.size(); ++i) out_ += (i ? "," : "") + values[i];
  out_ += "\n";
}

nlohmann::json solution_to_json(const SpectralSolution& sol, const std::string& config_hash,
                                std::uint64_t ensemble_seed, std::uint64_t draws,
                                std::uint64_t grid_seed) {
  nlohmann::json j;
  j["version"] = 1;
  j["s"] = sol.s;
  j["kappa"] = sol.kappa;
  j["residual"] = sol.residual;
  j["iterations"] = sol.iterations;
  j["grid"] = {{"d", sol.grid_dim}, {"G", sol.grid_size}, {"seed", grid_seed}};
  j["e"] = std::vector<double>(sol.e.data(), sol.e.data() + sol.e.size());
  j["nu"] = std::vector<double>(sol.nu.data(), sol.nu.data() + sol.nu.size());
  j["config_hash"] = config_hash;
  j["ensemble_seed"] = ensemble_seed;
  j["ensemble_draws"] = draws;
  return j;
}

SpectralSolution solution_from_json(const nlohmann::json& j,
                                    const std::string& expect_config_hash,
                                    std::uint64_t* grid_seed_out) {
  if (!j.contains("version") || j["version"].get<int>() != 1)
    throw ProvenanceError("spectral solution record has unsupported version");
  if (!expect_config_hash.empty() && j["config_hash"].get<std::string>() != expect_config_hash)
    throw ProvenanceError("spectral solution was computed for a different config");
  if (grid_seed_out && j["grid"].contains("seed"))
    *grid_seed_out = j["grid"]["seed"].get<std::uint64_t>();
  SpectralSolution sol;
  sol.s = j["s"].get<double>();
  sol.kappa = j["kappa"].get<double>();
  sol.residual = j["residual"].get<double>();
  sol.iterations = j["iterations"].get<std::uint64_t>();
  sol.grid_dim = j["grid"]["d"].get<int>();
  sol.grid_size = j["grid"]["G"].get<int>();
  auto e = j["e"].get<std::vector<double>>();
  auto nu = j["nu"].get<std::vector<double>>();
  sol.e = Eigen::Map<Eigen::VectorXd>(e.data(), static_cast<Eigen::Index>(e.size()));
  sol.nu = Eigen::Map<Eigen::VectorXd>(nu.data(), static_cast<Eigen::Index>(nu.size()));
  return sol;
}

nlohmann::json exponent_report_to_json(const ExponentReport& rep) {
  nlohmann::json j;
  j["version"] = 1;
  j["alpha"] = rep.alpha ? nlohmann::json(*rep.alpha) : nlohmann::json(nullptr);
  j["beta"] = rep.beta ? nlohmann::json(*rep.beta) : nlohmann::json(nullptr);
  j["m_prime_beta"] =
      rep.m_prime_beta ? nlohmann::json(*rep.m_prime_beta) : nlohmann::json(nullptr);
  if (rep.s_infinity_estimate)
    j["s_infinity"] = *rep.s_infinity_estimate;
  else
    j["s_infinity"] = rep.s_infinity_note;
  j["estimator"] = rep.estimator;
  auto curve = nlohmann::json::array();
  for (const auto& pt : rep.curve)
    curve.push_back({{"s", pt.s}, {"m_hat", pt.m_hat}, {"se", pt.se}});
  j["m_curve"] = curve;
  return j;
}

ExponentReport exponent_report_from_json(const nlohmann::json& j) {
  ExponentReport rep;
  if (!j["alpha"].is_null()) rep.alpha = j["alpha"].get<double>();
  if (!j["beta"].is_null()) rep.beta = j["beta"].get<double>();
  if (j.contains("m_prime_beta") && !j["m_prime_beta"].is_null())
    rep.m_prime_beta = j["m_prime_beta"].get<double>();
  if (j["s_infinity"].is_number())
    rep.s_infinity_estimate = j["s_infinity"].get<double>();
  else
    rep.s_infinity_note = j["s_infinity"].get<std::string>();
  if (j.contains("estimator")) rep.estimator = j["estimator"].get<std::string>();
  for (const auto& pt : j["m_curve"])
    rep.curve.push_back({pt["s"].get<double>(), pt["m_hat"].get<double>(), pt["se"].get<double>()});
  return rep;
}

nlohmann::json tail_report_to_json(const TailReport& rep) {
  nlohmann::json j;
  j["direction"] = rep.direction_label;
  if (!rep.direction.empty()) j["direction_vector"] = rep.direction;
  j["hill"] = {{"estimate", rep.hill.value}, {"se", rep.hill.se}, {"k", rep.hill.k}};
  j["rank_regression"] = {{"estimate", rep.rank.value}, {"se", rep.rank.se}, {"k", rep.rank.k}};
  if (rep.beta) {
    j["beta"] = *rep.beta;
    j["plateau"] = {{"value", rep.plateau.value}};
  }
  return j;
}

void write_sample_dump(const fs::path& dir, const std::string& stem,
                       const Eigen::MatrixXd& samples, SampleDumpMeta meta) {
  meta.rows = static_cast<std::uint64_t>(samples.cols());
  meta.cols = static_cast<std::uint32_t>(samples.rows());
  if (meta.format == "csv") {
    meta.file = stem + ".csv";
    std::string out = "# manifest=" + meta.manifest_hash + "\n";
    for (Eigen::Index m = 0; m < samples.cols(); ++m) {
      for (Eigen::Index i = 0; i < samples.rows(); ++i)
        out += (i ? "," : "") + format_double(samples(i, m));
      out += "\n";
    }
    atomic_write(dir / meta.file, out);
  } else if (meta.format == "binary") {
    meta.file = stem + ".bin";
    std::string out;
    out.reserve(16 + sizeof(double) * std::size_t(samples.size()));
    out += "MSTLABB1";
    std::uint64_t rows = meta.rows;
    std::uint32_t cols = meta.cols;
    out.append(reinterpret_cast<const char*>(&rows), sizeof rows);
    out.append(reinterpret_cast<const char*>(&cols), sizeof cols);
    for (Eigen::Index m = 0; m < samples.cols(); ++m)
      out.append(reinterpret_cast<const char*>(samples.col(m).data()),
                 sizeof(double) * std::size_t(samples.rows()));
    atomic_write(dir / meta.file, out);
  } else {
    throw UsageError("write_sample_dump: format must be csv or binary");
  }

  nlohmann::json j;
  j["version"] = 1;
  j["format"] = meta.format;
  j["file"] = meta.file;
  j["rows"] = meta.rows;
  j["cols"] = meta.cols;
  j["config_hash"] = meta.config_hash;
  j["manifest_hash"] = meta.manifest_hash;
  j["seed"] = meta.seed;
  j["generation"] = meta.generation;
  j["diagnostics"] = meta.diagnostics;
  atomic_write(dir / (stem + ".meta.json"), j.dump(2) + "\n");
}

Eigen::MatrixXd read_sample_dump(const fs::path& meta_path, SampleDumpMeta* meta_out) {
  nlohmann::json j = nlohmann::json::parse(read_file(meta_path));
  SampleDumpMeta meta;
  meta.format = j["format"].get<std::string>();
  meta.file = j["file"].get<std::string>();
  meta.rows = j["rows"].get<std::uint64_t>();
  meta.cols = j["cols"].get<std::uint32_t>();
  meta.config_hash = j["config_hash"].get<std::string>();
  meta.manifest_hash = j["manifest_hash"].get<std::string>();
  meta.seed = j["seed"].get<std::uint64_t>();
  meta.generation = j["generation"].get<std::uint64_t>();
  if (j.contains("diagnostics")) meta.diagnostics = j["diagnostics"];

  fs::path data = meta_path.parent_path() / meta.file;
  Eigen::MatrixXd samples(meta.cols, meta.rows);
  if (meta.format == "csv") {
    std::string text = read_file(data);
    std::size_t pos = 0;
    Eigen::Index m = 0;
    while (pos < text.size() && m < samples.cols()) {
      std::size_t eol = text.find('\n', pos);
      if (eol == std::string::npos) eol = text.size();
      if (text[pos] != '#') {
        std::size_t cur = pos;
        for (Eigen::Index i = 0; i < samples.rows(); ++i) {
          std::size_t comma = std::min(eol, text.find(',', cur));
          double v = 0;
          auto res = std::from_chars(text.data() + cur, text.data() + comma, v);
          if (res.ec != std::errc()) throw ProvenanceError("corrupt CSV dump: " + data.string());
          samples(i, m) = v;
          cur = comma + 1;
        }
        ++m;
      }
      pos = eol + 1;
    }
    if (m != samples.cols()) throw ProvenanceError("CSV dump row count mismatch: " + data.string());
  } else {
    std::string raw = read_file(data);
    const std::size_t header = 8 + sizeof(std::uint64_t) + sizeof(std::uint32_t);
    if (raw.size() < header || raw.compare(0, 8, "MSTLABB1") != 0)
      throw ProvenanceError("bad binary dump header: " + data.string());
    std::size_t need = header + sizeof(double) * std::size_t(meta.rows) * meta.cols;
    if (raw.size() != need) throw ProvenanceError("binary dump size mismatch: " + data.string());
    std::memcpy(samples.data(), raw.data() + header, need - header);
  }
  if (meta_out) *meta_out = std::move(meta);
  return samples;
}

}  // namespace mstlab
