#pragma once

// Internal to the experiment runner.

#include "helab/cli.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace helab::cli::detail {

const ExperimentInfo& info_for(const std::string& name);

// Typed access to a validated config; missing keys fall back to the table default.
class Params {
 public:
  Params(const ExperimentConfig& config, const ExperimentInfo& info) : config_(config), info_(info) {}

  bool has(const std::string& key) const { return !raw(key).empty(); }
  std::string str(const std::string& key) const { return raw(key); }
  double real(const std::string& key) const;
  int integer(const std::string& key) const;
  std::vector<double> reals(const std::string& key) const;
  std::vector<int> integers(const std::string& key) const;
  std::uint64_t seed() const { return config_.seed; }

 private:
  std::string raw(const std::string& key) const;
  const ExperimentConfig& config_;
  const ExperimentInfo& info_;
};

struct Context {
  const ExperimentConfig& config;
  Params params;
  std::vector<Check> checks;
  std::vector<std::string> outputs;

  void write(const std::string& file, const std::string& content);
  void write_json(const std::string& file, const nlohmann::json& j);
  void at_most(const std::string& name, double value, double tolerance);
  void at_least(const std::string& name, double value, double tolerance);
  void within(const std::string& name, double value, double lo, double hi);
  void equals(const std::string& name, double value, double expected);
};

std::string num(double x);

void run_flow(Context& ctx);
void run_holonomy(Context& ctx);
void run_branching(Context& ctx);
void run_spectrum(Context& ctx);
void run_states(Context& ctx);
void run_egorov(Context& ctx);
void run_variance(Context& ctx);
void run_decomposition(Context& ctx);

}  // namespace helab::cli::detail
