#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "mstlab/exponents.hpp"
#include "mstlab/operator.hpp"
#include "mstlab/stats.hpp"

namespace mstlab {

// Locale-independent shortest-or-17-digit formatting (std::to_chars), so CSV
// output is byte-stable across runs and thread counts.
std::string format_double(double v);

// Write-to-temp + rename; no partial outputs on error paths.
void atomic_write(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

struct Manifest {
  std::string command;
  std::string config_path;
  std::string config_hash;
  std::uint64_t seed = 0;
  int threads = 0;
  std::map<std::string, std::string> knobs;  // ordered => stable hash
  std::string tool_version = "mstlab 1.0.0";

  // Thread count is recorded but excluded from the hash: outputs are
  // independent of it by construction.
  std::string hash() const;
  nlohmann::json to_json() const;
};

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& manifest_hash);
  void header(const std::vector<std::string>& cols);
  void row(const std::vector<double>& values);
  void mixed_row(const std::vector<std::string>& values);
  const std::string& str() const { return out_; }

 private:
  std::string out_;
};

nlohmann::json solution_to_json(const SpectralSolution& sol, const std::string& config_hash,
                                std::uint64_t ensemble_seed, std::uint64_t draws,
                                std::uint64_t grid_seed);
// Loads a versioned record; when `expect_config_hash` is nonempty a mismatch
// is a provenance error. `grid_seed_out` lets callers rebuild the grid.
SpectralSolution solution_from_json(const nlohmann::json& j,
                                    const std::string& expect_config_hash = "",
                                    std::uint64_t* grid_seed_out = nullptr);

nlohmann::json exponent_report_to_json(const ExponentReport& rep);
ExponentReport exponent_report_from_json(const nlohmann::json& j);

nlohmann::json tail_report_to_json(const TailReport& rep);

// Sample dumps: CSV (one row per sample) or raw little-endian binary, plus a
// sidecar metadata record carrying provenance hashes.
struct SampleDumpMeta {
  std::string format;  // "csv" or "binary"
  std::string file;
  std::uint64_t rows = 0;
  std::uint32_t cols = 0;
  std::string config_hash;
  std::string manifest_hash;
  std::uint64_t seed = 0;
  std::uint64_t generation = 0;
  nlohmann::json diagnostics;
};

void write_sample_dump(const std::filesystem::path& dir, const std::string& stem,
                       const Eigen::MatrixXd& samples, SampleDumpMeta meta);
Eigen::MatrixXd read_sample_dump(const std::filesystem::path& meta_path, SampleDumpMeta* meta);

}  // namespace mstlab
