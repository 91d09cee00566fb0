#include "helab/cli.hpp"

#include "experiments.hpp"
#include "helab/errors.hpp"

#include <CLI11.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace helab::cli {

namespace {

using json = nlohmann::json;

ParamSpec str_param(std::string key, std::string def, std::vector<std::string> choices, std::string help) {
  return {std::move(key), "string", std::move(def), 0, 0, std::move(choices), std::move(help)};
}
ParamSpec int_param(std::string key, std::string def, double lo, double hi, std::string help) {
  return {std::move(key), "int", std::move(def), lo, hi, {}, std::move(help)};
}
ParamSpec real_param(std::string key, std::string def, double lo, double hi, std::string help) {
  return {std::move(key), "real", std::move(def), lo, hi, {}, std::move(help)};
}
ParamSpec list_param(std::string key, std::string kind, std::string def, double lo, double hi, std::string help) {
  return {std::move(key), std::move(kind), std::move(def), lo, hi, {}, std::move(help)};
}

std::vector<ExperimentInfo> build_table() {
  std::vector<ExperimentInfo> t;
  t.push_back({"flow",
               "Frame flow: Birkhoff time averages against the Liouville x Haar average",
               {"birkhoff.csv", "trajectory.csv", "report.json"},
               {str_param("model", "octagon", {"torus2", "torus3", "sphere", "octagon"}, "manifold"),
                str_param("observable", "bump", {"bump", "cos_x1", "cos_x2", "z2"},
                          "bump: exp(-r^2) on the octagon; cos_x1/cos_x2: tori; z2: cos^2(theta) on the sphere"),
                str_param("direction", "random", {"random", "rational", "irrational"},
                          "starting directions; rational/irrational only on tori"),
                real_param("T", "1000", 1, 1e6, "time horizon"),
                real_param("dt", "0.01", 1e-4, 1, "sampling step"),
                int_param("trajectories", "10", 1, 1000, "number of seeded trajectories"),
                int_param("resolution", "16", 4, 64, "Liouville quadrature nodes per dimension"),
                int_param("stride", "100", 1, 1e7, "trajectory.csv keeps every stride-th sample"),
                real_param("gap_max", "", 0, 1e3, "optional upper bound on the Birkhoff gap"),
                real_param("gap_min", "", 0, 1e3, "optional lower bound on the Birkhoff gap"),
                real_param("drift_tol", "1e-10", 0, 1, "bound on the frame orthonormality defect")}});
  t.push_back({"holonomy",
               "Holonomy of geodesic triangles against curvature x area",
               {"holonomy.csv"},
               {str_param("model", "sphere", {"sphere", "octagon", "torus2"}, "surface"),
                int_param("triangles", "20", 1, 100000, "random triangles besides the fixed one"),
                real_param("tolerance", "1e-6", 0, 1, "bound on |holonomy - K area| mod 2pi")}});
  t.push_back({"branching",
               "Decomposition of the exterior power into SO(n-1)-invariant subspaces",
               {"branching.json"},
               {int_param("n", "4", 2, 5, "ambient dimension"),
                int_param("p", "2", 0, 5, "form degree, at most n")}});
  t.push_back({"spectrum",
               "Truncated spectrum and structural identities (Hodge, helicity, Dirac)",
               {"spectrum.csv", "operator.csv", "operator.json"},
               {str_param("model", "torus2", {"torus2", "torus3", "sphere"}, "manifold"),
                str_param("bundle", "forms", {"functions", "forms", "spinors"}, "bundle"),
                int_param("p", "1", 0, 3, "form degree"),
                int_param("K", "8", 0, 64, "cutoff (torus: max |k_i|, sphere: max l)"),
                real_param("V", "0", 0, 1e6, "constant potential"),
                real_param("mass", "0", 0, 1e3, "mass m"),
                real_param("tolerance", "1e-10", 0, 1, "bound on structural residuals")}});
  t.push_back({"states",
               "Cesaro and heat states along a cutoff ladder against the tracial value",
               {"states.csv", "report.json"},
               {str_param("model", "sphere", {"sphere", "torus2"}, "manifold"),
                str_param("observable", "z2", {"z2", "cos_x1", "xi1_sq"},
                          "z2: multiplication by z^2 on the sphere; cos_x1, xi1_sq: torus"),
                list_param("ladder", "int_list", "8,16,32", 1, 64, "cutoffs"),
                list_param("t_ladder", "real_list", "0.5,1,2", 1e-6, 1e3, "heat parameters"),
                int_param("resolution", "16", 4, 64, "tracial quadrature resolution"),
                real_param("gap_max", "2e-2", 0, 10, "bound on the Cesaro gap at the largest cutoff"),
                real_param("ratio_max", "0.7", 0, 10, "bound on successive gap ratios"),
                real_param("heat_tol", "2e-2", 0, 10, "bound on |heat - Cesaro| for reliable t")}});
  t.push_back({"egorov",
               "Egorov residual and negative-order decay on dyadic frequency shells of T^2",
               {"egorov.csv", "decay.csv"},
               {int_param("K", "64", 4, 128, "Fourier cutoff"),
                real_param("t", "1", -10, 10, "propagation time"),
                list_param("shells", "real_list", "8,16,32", 1, 1e3, "Egorov shells Lambda"),
                list_param("decay_shells", "real_list", "4,8,16,32", 1, 1e3, "decay shells Lambda"),
                real_param("ratio_min", "0.3", 0, 10, "lower bound on dyadic ratios"),
                real_param("ratio_max", "0.7", 0, 10, "upper bound on dyadic ratios")}});
  t.push_back({"variance",
               "Quantum variance of eigenstate matrix elements",
               {"variance.csv", "report.json"},
               {str_param("case", "helicity", {"helicity", "torus_direction"},
                          "helicity: R on co-exact 1-forms of T^3; torus_direction: Op(xi_1^2/|xi|^2) on T^2"),
                int_param("K", "4", 1, 64, "Fourier cutoff"),
                int_param("N", "200", 1, 1000000, "number of eigenstates"),
                real_param("variance_min", "0.05", 0, 10, "non-ergodic control: lower bound on the variance")}});
  t.push_back({"decomposition",
               "Decomposition of the tracial state by invariant fiber projections",
               {"decomposition.json"},
               {str_param("case", "lambda1_T3", {"lambda1_T3", "dirac_T3", "trivial"}, "fiber data on T^3"),
                int_param("resolution", "4", 4, 16, "Liouville quadrature resolution"),
                real_param("tolerance", "1e-10", 0, 1, "bound on the decomposition residuals")}});
  return t;
}

bool parse_double(const std::string& s, double& out) {
  const char* b = s.data();
  const char* e = b + s.size();
  auto [ptr, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && ptr == e && std::isfinite(out);
}

bool parse_long(const std::string& s, long long& out) {
  const char* b = s.data();
  const char* e = b + s.size();
  auto [ptr, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && ptr == e;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> items;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    items.push_back(b == std::string::npos ? std::string() : item.substr(b, e - b + 1));
  }
  return items;
}

// Diagnostic for one value, empty if acceptable.
std::string check_value(const ParamSpec& spec, const std::string& value) {
  auto range = [&](double x) -> std::string {
    if (x < spec.min || x > spec.max) {
      return "value " + value + " outside [" + detail::num(spec.min) + ", " + detail::num(spec.max) + "]";
    }
    return {};
  };
  if (spec.kind == "string") {
    for (const auto& c : spec.choices) {
      if (c == value) return {};
    }
    std::string msg = "unknown value '" + value + "', expected one of";
    for (const auto& c : spec.choices) msg += " " + c;
    return msg;
  }
  if (spec.kind == "int") {
    long long v = 0;
    if (!parse_long(value, v)) return "expected an integer, got '" + value + "'";
    return range(static_cast<double>(v));
  }
  if (spec.kind == "real") {
    double v = 0;
    if (!parse_double(value, v)) return "expected a number, got '" + value + "'";
    return range(v);
  }
  const auto items = split_list(value);
  if (items.empty()) return "empty list";
  for (const auto& item : items) {
    std::string msg;
    if (spec.kind == "int_list") {
      long long v = 0;
      msg = parse_long(item, v) ? range(static_cast<double>(v)) : "expected integers, got '" + item + "'";
    } else {
      double v = 0;
      msg = parse_double(item, v) ? range(v) : "expected numbers, got '" + item + "'";
    }
    if (!msg.empty()) return msg;
  }
  return {};
}

json check_to_json(const Check& c) {
  json j;
  j["name"] = c.name;
  j["value"] = c.value;
  j["relation"] = c.relation;
  if (c.relation == "in") {
    j["lower"] = c.tolerance;
    j["upper"] = c.upper;
  } else {
    j["tolerance"] = c.tolerance;
  }
  j["pass"] = c.pass;
  return j;
}

}  // namespace

namespace detail {

const ExperimentInfo& info_for(const std::string& name) {
  static const std::vector<ExperimentInfo> table = build_table();
  for (const auto& info : table) {
    if (info.name == name) return info;
  }
  throw UsageError("experiment", "unknown experiment '" + name + "'");
}

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string Params::raw(const std::string& key) const {
  auto it = config_.values.find(key);
  if (it != config_.values.end()) return it->second;
  for (const auto& p : info_.params) {
    if (p.key == key) return p.default_value;
  }
  throw std::logic_error("undeclared parameter " + key);
}

double Params::real(const std::string& key) const {
  double v = 0;
  if (!parse_double(raw(key), v)) throw UsageError(key, "expected a number");
  return v;
}

int Params::integer(const std::string& key) const {
  long long v = 0;
  if (!parse_long(raw(key), v)) throw UsageError(key, "expected an integer");
  return static_cast<int>(v);
}

std::vector<double> Params::reals(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : split_list(raw(key))) {
    double v = 0;
    if (!parse_double(item, v)) throw UsageError(key, "expected numbers");
    out.push_back(v);
  }
  return out;
}

std::vector<int> Params::integers(const std::string& key) const {
  std::vector<int> out;
  for (const auto& item : split_list(raw(key))) {
    long long v = 0;
    if (!parse_long(item, v)) throw UsageError(key, "expected integers");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

void Context::write(const std::string& file, const std::string& content) {
  std::filesystem::create_directories(config.out_dir);
  std::ofstream out(config.out_dir / file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + (config.out_dir / file).string());
  out << content;
  outputs.push_back(file);
}

void Context::write_json(const std::string& file, const json& j) { write(file, j.dump(2) + "\n"); }

void Context::at_most(const std::string& name, double value, double tolerance) {
  checks.push_back({name, value, tolerance, "<=", 0.0, value <= tolerance});
}

void Context::at_least(const std::string& name, double value, double tolerance) {
  checks.push_back({name, value, tolerance, ">=", 0.0, value >= tolerance});
}

void Context::within(const std::string& name, double value, double lo, double hi) {
  checks.push_back({name, value, lo, "in", hi, value >= lo && value <= hi});
}

void Context::equals(const std::string& name, double value, double expected) {
  checks.push_back({name, value, expected, "==", 0.0, value == expected});
}

}  // namespace detail

ExperimentConfig parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw UsageError("", "config line " + std::to_string(e.line()) + ": " + e.message());
  }
  ExperimentConfig cfg;
  for (const auto& [key, node] : tree) {
    if (!node.empty()) throw UsageError(key, "sections are not supported; use flat key=value lines");
    const std::string value = node.data();
    if (key == "experiment") {
      cfg.experiment = value;
    } else if (key == "seed") {
      long long s = 0;
      if (!parse_long(value, s) || s < 0) throw UsageError("seed", "expected a nonnegative integer");
      cfg.seed = static_cast<std::uint64_t>(s);
    } else if (key == "out") {
      cfg.out_dir = value;
    } else {
      cfg.values[key] = value;
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("config", "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::vector<ExperimentInfo> list_experiments() { return build_table(); }

std::vector<std::string> validate(const ExperimentConfig& config) {
  std::vector<std::string> diag;
  const ExperimentInfo* info = nullptr;
  try {
    info = &detail::info_for(config.experiment);
  } catch (const UsageError& e) {
    diag.push_back(e.what());
    return diag;
  }
  for (const auto& [key, value] : config.values) {
    const ParamSpec* spec = nullptr;
    for (const auto& p : info->params) {
      if (p.key == key) spec = &p;
    }
    if (spec == nullptr) {
      diag.push_back(key + ": unknown parameter for experiment " + info->name);
      continue;
    }
    if (value.empty()) {
      diag.push_back(key + ": empty value");
      continue;
    }
    const std::string msg = check_value(*spec, value);
    if (!msg.empty()) diag.push_back(key + ": " + msg);
  }
  if (!diag.empty()) return diag;

  // Cross-parameter consistency.
  const detail::Params p(config, *info);
  const std::string& name = info->name;
  if (name == "flow") {
    const std::string model = p.str("model");
    const std::string obs = p.str("observable");
    const bool torus = model == "torus2" || model == "torus3";
    if (obs == "bump" && model != "octagon") diag.push_back("observable: bump requires model=octagon");
    if ((obs == "cos_x1" || obs == "cos_x2") && !torus) diag.push_back("observable: " + obs + " requires a torus");
    if (obs == "z2" && model != "sphere") diag.push_back("observable: z2 requires model=sphere");
    if (p.str("direction") != "random" && !torus) diag.push_back("direction: rational/irrational require a torus");
    if (p.real("dt") > p.real("T")) diag.push_back("dt: larger than T");
  } else if (name == "branching") {
    if (p.integer("p") > p.integer("n")) diag.push_back("p: must not exceed n");
  } else if (name == "spectrum") {
    const std::string model = p.str("model");
    const int dim = model == "torus3" ? 3 : 2;
    if (p.str("bundle") == "forms" && p.integer("p") > dim) diag.push_back("p: exceeds the dimension");
    const int k = p.integer("K");
    if (model == "torus3" && k > 12) diag.push_back("K: at most 12 on torus3");
    if (model == "sphere" && k > 48) diag.push_back("K: at most 48 on the sphere");
  } else if (name == "states") {
    const std::string model = p.str("model");
    const std::string obs = p.str("observable");
    if (model == "sphere" && obs != "z2") diag.push_back("observable: sphere supports z2");
    if (model == "torus2" && obs == "z2") diag.push_back("observable: z2 requires model=sphere");
  } else if (name == "egorov") {
    const double k = p.integer("K");
    for (double s : p.reals("shells")) {
      if (2.0 * s > k) diag.push_back("shells: shell " + detail::num(s) + " needs K >= " + detail::num(2 * s));
    }
    for (double s : p.reals("decay_shells")) {
      if (2.0 * s > k) diag.push_back("decay_shells: shell " + detail::num(s) + " needs K >= " + detail::num(2 * s));
    }
  } else if (name == "variance") {
    if (p.str("case") == "helicity" && p.integer("K") > 8) diag.push_back("K: at most 8 for helicity");
  }
  return diag;
}

bool RunManifest::all_passed() const {
  for (const auto& c : checks) {
    if (!c.pass) return false;
  }
  return true;
}

RunManifest run(const ExperimentConfig& config) {
  const auto diag = validate(config);
  if (!diag.empty()) {
    const auto colon = diag.front().find(':');
    throw UsageError(colon == std::string::npos ? std::string() : diag.front().substr(0, colon),
                     colon == std::string::npos ? diag.front() : diag.front().substr(colon + 2));
  }
  const ExperimentInfo& info = detail::info_for(config.experiment);
  detail::Context ctx{config, detail::Params(config, info), {}, {}};

  const auto start = std::chrono::steady_clock::now();
  const std::string& name = info.name;
  if (name == "flow") detail::run_flow(ctx);
  else if (name == "holonomy") detail::run_holonomy(ctx);
  else if (name == "branching") detail::run_branching(ctx);
  else if (name == "spectrum") detail::run_spectrum(ctx);
  else if (name == "states") detail::run_states(ctx);
  else if (name == "egorov") detail::run_egorov(ctx);
  else if (name == "variance") detail::run_variance(ctx);
  else if (name == "decomposition") detail::run_decomposition(ctx);
  const auto stop = std::chrono::steady_clock::now();

  RunManifest manifest;
  manifest.config = config;
  manifest.wall_time_seconds = std::chrono::duration<double>(stop - start).count();
  manifest.checks = ctx.checks;
  manifest.outputs = ctx.outputs;

  json j;
  j["version"] = manifest.version;
  json cfg;
  cfg["experiment"] = config.experiment;
  cfg["seed"] = config.seed;
  cfg["out"] = config.out_dir.string();
  json values = json::object();
  for (const auto& p : info.params) values[p.key] = ctx.params.str(p.key);
  cfg["parameters"] = values;
  j["config"] = cfg;
  j["wall_time_seconds"] = manifest.wall_time_seconds;
  json checks = json::array();
  for (const auto& c : manifest.checks) checks.push_back(check_to_json(c));
  j["checks"] = checks;
  j["outputs"] = manifest.outputs;
  j["all_passed"] = manifest.all_passed();
  std::filesystem::create_directories(config.out_dir);
  std::ofstream out(config.out_dir / "manifest.json", std::ios::binary);
  out << j.dump(2) << "\n";
  return manifest;
}

int main_entry(int argc, char** argv) {
  CLI::App app{"helab: frame flows, truncated spectral models and high-energy states"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  app.add_subcommand("list", "List experiments and their parameters");

  std::string validate_path;
  auto* validate_cmd = app.add_subcommand("validate", "Check a config without running it");
  validate_cmd->add_option("--config", validate_path, "config file")->required();

  std::string config_path;
  std::string out_dir;
  long long seed = -1;
  for (const auto& info : list_experiments()) {
    auto* sub = app.add_subcommand(info.name, info.summary);
    sub->add_option("--config", config_path, "config file")->required();
    sub->add_option("--out", out_dir, "output directory (overrides the config)");
    sub->add_option("--seed", seed, "seed (overrides the config)")->check(CLI::NonNegativeNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  try {
    if (command == "list") {
      for (const auto& info : list_experiments()) {
        std::cout << info.name << ": " << info.summary << "\n  outputs:";
        for (const auto& o : info.outputs) std::cout << " " << o;
        std::cout << "\n";
        for (const auto& p : info.params) {
          std::cout << "  " << p.key << " (" << p.kind;
          if (p.kind == "string") {
            std::cout << ":";
            for (const auto& c : p.choices) std::cout << " " << c;
          } else {
            std::cout << " in [" << detail::num(p.min) << ", " << detail::num(p.max) << "]";
          }
          std::cout << ", default " << (p.default_value.empty() ? "unset" : p.default_value) << ") " << p.help
                    << "\n";
        }
      }
      return 0;
    }
    if (command == "validate") {
      const auto diag = validate(load_config(validate_path));
      for (const auto& d : diag) std::cerr << "error: " << d << "\n";
      if (diag.empty()) std::cout << "config ok\n";
      return diag.empty() ? 0 : 2;
    }

    ExperimentConfig config = load_config(config_path);
    if (!config.experiment.empty() && config.experiment != command) {
      throw UsageError("experiment", "config names '" + config.experiment + "' but the command is '" + command + "'");
    }
    config.experiment = command;
    if (!out_dir.empty()) config.out_dir = out_dir;
    if (seed >= 0) config.seed = static_cast<std::uint64_t>(seed);

    const RunManifest manifest = run(config);
    for (const auto& c : manifest.checks) {
      std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << " = " << detail::num(c.value) << " (" << c.relation
                << " " << detail::num(c.tolerance);
      if (c.relation == "in") std::cout << ", " << detail::num(c.upper);
      std::cout << ")\n";
    }
    std::cout << "outputs written to " << config.out_dir.string() << "\n";
    return manifest.all_passed() ? 0 : 1;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const CapabilityError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const ResolutionError& e) {
    // A quadrature too coarse for the requested invariant counts as a failed check.
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace helab::cli
