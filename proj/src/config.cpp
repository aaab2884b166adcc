#include "pldm/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "pldm/errors.hpp"

namespace pldm {
namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& key, const std::string& value,
                    int line) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (value.empty() || end != value.c_str() + value.size())
    throw ParseError("invalid number for key '" + key + "': " + value, line);
  return v;
}

long long parse_int(const std::string& key, const std::string& value,
                    int line) {
  char* end = nullptr;
  const long long v = std::strtoll(value.c_str(), &end, 10);
  if (value.empty() || end != value.c_str() + value.size())
    throw ParseError("invalid integer for key '" + key + "': " + value, line);
  return v;
}

std::uint64_t parse_uint(const std::string& key, const std::string& value,
                         int line) {
  char* end = nullptr;
  const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
  if (value.empty() || end != value.c_str() + value.size() ||
      value.front() == '-')
    throw ParseError("invalid unsigned integer for key '" + key + "': " + value,
                     line);
  return v;
}

bool parse_bool(const std::string& key, const std::string& value, int line) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ParseError("invalid boolean for key '" + key + "': " + value, line);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void apply_config_entry(RunConfig& config, const std::string& key,
                        const std::string& value, int line) {
  if (key == "instance") {
    config.instance = value;
  } else if (key == "seed") {
    config.seed = parse_uint(key, value, line);
  } else if (key == "init") {
    config.init = value;
  } else if (key == "certificates") {
    config.certificates = parse_bool(key, value, line);
  } else if (key == "out") {
    config.out_dir = value;
  } else if (key == "format") {
    config.format_csv = false;
    config.format_json = false;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item == "csv")
        config.format_csv = true;
      else if (item == "json")
        config.format_json = true;
      else
        throw ParseError("invalid format '" + item + "' (expected csv or json)",
                         line);
    }
    if (!config.format_csv && !config.format_json)
      throw ParseError("format must list csv and/or json", line);
  } else if (key == "baseline.multistarts") {
    config.baseline_multistarts = static_cast<int>(parse_int(key, value, line));
  } else if (key == "solver.rho0") {
    config.solver.rho0 = parse_double(key, value, line);
  } else if (key == "solver.delta") {
    config.solver.delta_penalty = parse_double(key, value, line);
  } else if (key == "solver.eta") {
    config.solver.eta = parse_double(key, value, line);
  } else if (key == "solver.eps") {
    config.solver.eps_stop = parse_double(key, value, line);
  } else if (key == "solver.max_iters") {
    config.solver.max_iters = static_cast<int>(parse_int(key, value, line));
  } else if (key == "solver.step_policy") {
    if (value == "linesearch")
      config.solver.step_policy = StepPolicy::Linesearch;
    else if (value == "theoretical")
      config.solver.step_policy = StepPolicy::Theoretical;
    else
      throw ParseError("invalid step_policy '" + value +
                           "' (expected linesearch or theoretical)",
                       line);
  } else if (key == "solver.c0") {
    config.solver.c0 = parse_double(key, value, line);
  } else if (key == "solver.divisor") {
    config.solver.backtrack_divisor = parse_double(key, value, line);
  } else if (key == "solver.alpha") {
    config.solver.alpha = parse_double(key, value, line);
  } else if (key == "solver.nu") {
    config.solver.nu = parse_double(key, value, line);
  } else if (key == "solver.beta_policy") {
    if (value == "fixed")
      config.solver.beta_policy = BetaPolicy::Fixed;
    else if (value == "from_nu")
      config.solver.beta_policy = BetaPolicy::FromNu;
    else
      throw ParseError(
          "invalid beta_policy '" + value + "' (expected fixed or from_nu)",
          line);
  } else if (key == "solver.beta") {
    config.solver.beta = parse_double(key, value, line);
  } else if (key == "hvac.zones") {
    config.hvac_zones = static_cast<int>(parse_int(key, value, line));
  } else if (key == "hvac.horizon") {
    config.hvac_horizon = static_cast<int>(parse_int(key, value, line));
  } else if (key == "random.agents") {
    config.random_agents = static_cast<int>(parse_int(key, value, line));
  } else if (key == "random.dim") {
    config.random_dim = static_cast<int>(parse_int(key, value, line));
  } else if (key == "random.density") {
    config.random_density = parse_double(key, value, line);
  } else {
    throw ParseError("unknown key '" + key + "'", line);
  }
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file: " + path);
  RunConfig config;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string s = trim(raw);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw ParseError("expected key=value, got '" + s + "'", line);
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (key.empty()) throw ParseError("empty key", line);
    apply_config_entry(config, key, value, line);
  }
  config.validate();
  return config;
}

void RunConfig::validate() const {
  if (instance != "toy" && instance != "hvac" && instance != "random")
    throw ValidationError("instance must be toy, hvac or random, got '" +
                          instance + "'");
  if (init != "midpoint" && init != "random")
    throw ValidationError("init must be midpoint or random, got '" + init +
                          "'");
  if (baseline_multistarts < 0)
    throw ValidationError("baseline.multistarts must be >= 0");
  if (hvac_zones < 1) throw ValidationError("hvac.zones must be >= 1");
  if (hvac_horizon < 1) throw ValidationError("hvac.horizon must be >= 1");
  if (random_agents < 1) throw ValidationError("random.agents must be >= 1");
  if (random_dim < 1) throw ValidationError("random.dim must be >= 1");
  if (random_density < 0.0 || random_density > 1.0)
    throw ValidationError("random.density must lie in [0,1]");
  if (!format_csv && !format_json)
    throw ValidationError("format must enable csv and/or json");

  if (!(solver.rho0 > 0)) throw ValidationError("solver.rho0 must be positive");
  if (solver.delta_penalty < 0)
    throw ValidationError("solver.delta must be >= 0");
  if (!(solver.eta > 0)) throw ValidationError("solver.eta must be positive");
  if (!(solver.eps_stop > 0))
    throw ValidationError("solver.eps must be positive");
  if (solver.max_iters < 0)
    throw ValidationError("solver.max_iters must be >= 0");
  if (!(solver.c0 > 0)) throw ValidationError("solver.c0 must be positive");
  if (!(solver.backtrack_divisor > 0) || !(solver.backtrack_divisor < 1))
    throw ValidationError("solver.divisor must lie in (0,1)");
  if (!(solver.alpha > 0)) throw ValidationError("solver.alpha must be positive");
  if (!(solver.beta > 0)) throw ValidationError("solver.beta must be positive");
  if (solver.nu < 0) throw ValidationError("solver.nu must be >= 0");
  if ((solver.step_policy == StepPolicy::Theoretical ||
       solver.beta_policy == BetaPolicy::FromNu) &&
      !(solver.nu > 0))
    throw ValidationError(
        "solver.nu must be positive for the theoretical step or from_nu beta");
}

std::string serialize_config(const RunConfig& config) {
  std::ostringstream out;
  out << "baseline.multistarts=" << config.baseline_multistarts << "\n";
  out << "certificates=" << (config.certificates ? "true" : "false") << "\n";
  out << "format="
      << (config.format_csv && config.format_json
              ? "csv,json"
              : (config.format_csv ? "csv" : "json"))
      << "\n";
  out << "hvac.horizon=" << config.hvac_horizon << "\n";
  out << "hvac.zones=" << config.hvac_zones << "\n";
  out << "init=" << config.init << "\n";
  out << "instance=" << config.instance << "\n";
  out << "out=" << config.out_dir << "\n";
  out << "random.agents=" << config.random_agents << "\n";
  out << "random.density=" << fmt(config.random_density) << "\n";
  out << "random.dim=" << config.random_dim << "\n";
  out << "seed=" << config.seed << "\n";
  out << "solver.alpha=" << fmt(config.solver.alpha) << "\n";
  out << "solver.beta=" << fmt(config.solver.beta) << "\n";
  out << "solver.beta_policy="
      << (config.solver.beta_policy == BetaPolicy::Fixed ? "fixed" : "from_nu")
      << "\n";
  out << "solver.c0=" << fmt(config.solver.c0) << "\n";
  out << "solver.delta=" << fmt(config.solver.delta_penalty) << "\n";
  out << "solver.divisor=" << fmt(config.solver.backtrack_divisor) << "\n";
  out << "solver.eps=" << fmt(config.solver.eps_stop) << "\n";
  out << "solver.eta=" << fmt(config.solver.eta) << "\n";
  out << "solver.max_iters=" << config.solver.max_iters << "\n";
  out << "solver.nu=" << fmt(config.solver.nu) << "\n";
  out << "solver.rho0=" << fmt(config.solver.rho0) << "\n";
  out << "solver.step_policy="
      << (config.solver.step_policy == StepPolicy::Linesearch ? "linesearch"
                                                              : "theoretical")
      << "\n";
  return out.str();
}

}  // namespace pldm
