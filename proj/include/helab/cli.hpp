#pragma once

// Experiment runner: flat key=value configuration, one experiment per run,
// CSV/JSON data files plus a manifest with per-check measurements.

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace helab::cli {

inline constexpr const char* kVersion = "1.0.0";

/// Invalid configuration; `field` names the offending key.
class UsageError : public std::runtime_error {
 public:
  UsageError(std::string field, const std::string& what)
      : std::runtime_error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct ExperimentConfig {
  std::string experiment;
  std::map<std::string, std::string> values;  // raw key=value pairs, experiment-specific
  std::uint64_t seed = 1;
  std::filesystem::path out_dir = "out";
};

/// Parses key=value lines ('#' or ';' comments). The keys `experiment`, `seed`
/// and `out` fill the corresponding fields.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

struct ParamSpec {
  std::string key;
  std::string kind;  // int, real, string, int_list, real_list
  std::string default_value;
  double min = 0.0;
  double max = 0.0;
  std::vector<std::string> choices;  // for string parameters
  std::string help;
};

struct ExperimentInfo {
  std::string name;
  std::string summary;
  std::vector<std::string> outputs;
  std::vector<ParamSpec> params;
};

std::vector<ExperimentInfo> list_experiments();

/// Range and consistency diagnostics; empty when the config is valid.
std::vector<std::string> validate(const ExperimentConfig& config);

struct Check {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  std::string relation;  // "<=", ">=", "in", "=="
  double upper = 0.0;    // for "in": [tolerance, upper]
  bool pass = false;
};

struct RunManifest {
  ExperimentConfig config;
  std::string version = kVersion;
  double wall_time_seconds = 0.0;
  std::vector<Check> checks;
  std::vector<std::string> outputs;

  bool all_passed() const;
};

/// Runs the experiment, writes data files into config.out_dir and returns the
/// manifest (also written as manifest.json). Throws UsageError for invalid configs.
RunManifest run(const ExperimentConfig& config);

/// Command-line entry point; returns the process exit code (0 pass, 1 check failure, 2 usage error).
int main_entry(int argc, char** argv);

}  // namespace helab::cli
