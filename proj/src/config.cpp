#include "cpexc/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#ifndef CPEXC_VERSION
#define CPEXC_VERSION "0.1.0"
#endif

namespace cpexc {

namespace {

const std::set<std::string> kKeys = {
    "drift",       "jump.family", "jump.mass",  "jump.xmin",   "jump.gamma", "jump.atoms",
    "seed",        "n_samples",   "depth_cap",  "jump_cap",    "workers",    "completion",
    "dump",        "grid.t",      "grid.h",     "grid.a",      "grid.q",     "cond.t",
    "exit.x",      "exit.h",      "exit.n",     "lemma.h",     "scale.x_max", "scale.delta",
    "limits.rho",  "limits.theta", "limits.a",  "out"};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_number(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw ConfigError(key + ": not a number: '" + text + "'");
  }
  if (used != text.size() || !std::isfinite(v)) throw ConfigError(key + ": not a number: '" + text + "'");
  return v;
}

std::uint64_t to_count(const std::string& key, const std::string& text) {
  const double v = to_number(key, text);
  if (v < 0.0 || v != std::floor(v) || v > 9007199254740992.0) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + text + "'");
  }
  return static_cast<std::uint64_t>(v);
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

std::vector<double> to_grid(const std::string& key, const std::string& text) {
  std::vector<double> g;
  for (const auto& item : split(text, ',')) g.push_back(to_number(key, item));
  if (g.empty()) throw ConfigError(key + ": empty grid");
  if (!std::is_sorted(g.begin(), g.end())) throw ConfigError(key + ": grid must be sorted ascending");
  return g;
}

bool to_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + text + "'");
}

ProcessSpec build_spec(const std::map<std::string, std::string>& e) {
  auto get = [&](const std::string& k) -> const std::string& {
    const auto it = e.find(k);
    if (it == e.end()) throw ConfigError("missing key " + k);
    return it->second;
  };
  const std::string& family = get("jump.family");
  std::optional<JumpMeasure> nu;
  try {
    if (family == "pareto_tail") {
      if (e.count("jump.atoms")) throw ConfigError("jump.atoms given for pareto_tail");
      nu = JumpMeasure::pareto_tail(to_number("jump.mass", get("jump.mass")),
                                    to_number("jump.xmin", get("jump.xmin")),
                                    to_number("jump.gamma", get("jump.gamma")));
    } else if (family == "bounded_discrete") {
      for (const char* k : {"jump.mass", "jump.xmin", "jump.gamma"}) {
        if (e.count(k)) throw ConfigError(std::string(k) + " given for bounded_discrete");
      }
      std::vector<Atom> atoms;
      for (const auto& item : split(get("jump.atoms"), ',')) {
        const auto parts = split(item, ':');
        if (parts.size() != 2) throw ConfigError("jump.atoms: expected x:w, got '" + item + "'");
        atoms.push_back({to_number("jump.atoms", parts[0]), to_number("jump.atoms", parts[1])});
      }
      nu = JumpMeasure::bounded_discrete(std::move(atoms));
    } else {
      throw ConfigError("jump.family: expected pareto_tail or bounded_discrete, got '" + family + "'");
    }
    const std::string& drift = get("drift");
    if (drift == "recurrent") return ProcessSpec::recurrent(*nu);
    return ProcessSpec(to_number("drift", drift), *nu);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& ex) {
    throw ConfigError(std::string("invalid process: ") + ex.what());
  }
}

}  // namespace

const ProcessSpec& ExperimentConfig::process() const {
  if (!spec) throw ConfigError("config has no process (drift, jump.*)");
  return *spec;
}

LimitParams ExperimentConfig::limit_params() const {
  double rho = 2.0 / 3.0, theta = 2.0;
  if (spec && spec->jumps().family() == JumpFamily::pareto_tail) {
    if (spec->regime() == Regime::recurrent) rho = spec->rho();
    else theta = spec->theta();
  }
  if (limits_rho) rho = *limits_rho;
  if (limits_theta) theta = *limits_theta;
  auto p = LimitParams::from_rho(rho, theta);
  p.validate();
  return p;
}

void ExperimentConfig::require_simulation() const {
  process();
  if (!seed_set) throw ConfigError("seed is mandatory (set `seed` or pass --seed)");
  if (sim.n_samples == 0) throw ConfigError("n_samples must be positive");
}

SimConfig ExperimentConfig::sim_config() const {
  SimConfig c = sim;
  if (process().regime() == Regime::transient && !depth_cap_set) c.depth_cap = default_depth_cap(process());
  c.validate();
  return c;
}

void ExperimentConfig::set_seed(std::uint64_t seed) {
  sim.seed = seed;
  seed_set = true;
  entries["seed"] = std::to_string(seed);
}

std::vector<std::string> ExperimentConfig::echo() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : entries) out.push_back(k + " = " + v);
  return out;
}

ExperimentConfig parse_config(std::istream& is) {
  ExperimentConfig c;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!kKeys.count(key)) throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (c.entries.count(key)) throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    if (value.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty value for " + key);
    c.entries[key] = value;
  }

  const auto& e = c.entries;
  for (const auto& [key, value] : e) {
    if (key == "seed") c.set_seed(to_count(key, value));
    else if (key == "n_samples") c.sim.n_samples = to_count(key, value);
    else if (key == "depth_cap") {
      c.sim.depth_cap = to_number(key, value);
      c.depth_cap_set = true;
    }
    else if (key == "jump_cap") c.sim.jump_cap = to_count(key, value);
    else if (key == "workers") c.sim.worker_count = static_cast<unsigned>(to_count(key, value));
    else if (key == "completion") {
      if (value == "ladder") c.sim.completion = Completion::ladder;
      else if (value == "none") c.sim.completion = Completion::none;
      else throw ConfigError("completion: expected ladder or none, got '" + value + "'");
    }
    else if (key == "dump") c.dump = to_bool(key, value);
    else if (key == "grid.t") c.grid_t = to_grid(key, value);
    else if (key == "grid.h") c.grid_h = to_grid(key, value);
    else if (key == "grid.a") c.grid_a = to_grid(key, value);
    else if (key == "grid.q") c.grid_q = to_grid(key, value);
    else if (key == "cond.t") c.cond_t = to_grid(key, value);
    else if (key == "exit.x") c.exit_x = to_grid(key, value);
    else if (key == "exit.h") c.exit_h = to_grid(key, value);
    else if (key == "exit.n") c.exit_n = to_count(key, value);
    else if (key == "lemma.h") c.lemma_h = to_grid(key, value);
    else if (key == "scale.x_max") c.scale_x_max = to_number(key, value);
    else if (key == "scale.delta") c.scale_delta = to_number(key, value);
    else if (key == "limits.rho") c.limits_rho = to_number(key, value);
    else if (key == "limits.theta") c.limits_theta = to_number(key, value);
    else if (key == "limits.a") c.limits_a = to_grid(key, value);
    else if (key == "out") c.out = value;
  }
  if (c.sim.worker_count == 0) throw ConfigError("workers must be positive");
  if (c.sim.jump_cap == 0) throw ConfigError("jump_cap must be positive");
  if (!(c.scale_delta > 0.0)) throw ConfigError("scale.delta must be positive");
  const bool any_process = std::any_of(e.begin(), e.end(), [](const auto& kv) {
    return kv.first == "drift" || kv.first.rfind("jump.", 0) == 0;
  });
  if (any_process) c.spec = build_spec(e);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  return parse_config(in);
}

const char* version() { return CPEXC_VERSION; }

}  // namespace cpexc
