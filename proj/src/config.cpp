#include "dirw/config.hpp"

#include <fstream>
#include <sstream>

namespace dirw {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

ConfigMap parse_config_text(const std::string& text) {
  ConfigMap map;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config line " + std::to_string(lineno) +
                          ": unterminated section");
      section = trim(line.substr(1, line.size() - 2));
      map[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected key = value");
    map[section][trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return map;
}

ConfigMap parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config file " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str());
}

void RunConfig::validate() const {
  if (approach != "bspline-mo" && approach != "mesh-mo" &&
      approach != "bspline-baseline")
    throw ConfigError("unknown approach '" + approach + "'");
  if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
  if (generations < 0) throw ConfigError("generations must be >= 0");
  if (phantom_kind.empty() && (source_path.empty() || target_path.empty()))
    throw ConfigError("need either a phantom kind or a source/target pair");
  if (!phantom_kind.empty() && phantom_kind != "isolated-blob" &&
      phantom_kind != "multi-organ")
    throw ConfigError("unknown phantom kind '" + phantom_kind + "'");
  inner.validate();
}

int RunConfig::effective_population() const {
  if (population > 0) return population;
  if (approach == "mesh-mo") return 700;
  if (approach == "bspline-baseline") return 100;
  return 200;
}

namespace {

template <typename T>
void read_value(const std::map<std::string, std::string>& section,
                const std::string& key, T& out) {
  const auto it = section.find(key);
  if (it == section.end()) return;
  std::istringstream ss(it->second);
  if constexpr (std::is_same_v<T, std::string>) {
    out = it->second;
  } else if constexpr (std::is_same_v<T, std::array<int, 3>>) {
    std::array<int, 3> v{1, 1, 1};
    int n = 0;
    while (n < 3 && (ss >> v[n])) ++n;
    if (n < 2) throw ConfigError("bad value for '" + key + "'");
    out = v;
  } else {
    if (!(ss >> out)) throw ConfigError("bad value for '" + key + "'");
  }
}

}  // namespace

RunConfig RunConfig::from_config(const ConfigMap& map) {
  RunConfig cfg;
  for (const auto& [section, keys] : map) {
    if (section != "problem" && section != "run" && section != "model" &&
        section != "baseline" && section != "output")
      throw ConfigError("unknown config section [" + section + "]");
    for (const auto& [key, value] : keys) {
      (void)value;
      static const std::map<std::string, std::string> known = {
          {"problem.source", ""},        {"problem.target", ""},
          {"problem.kind", ""},          {"problem.phantom_seed", ""},
          {"run.approach", ""},          {"run.population", ""},
          {"run.generations", ""},       {"run.repetitions", ""},
          {"run.base_seed", ""},         {"run.sample_count", ""},
          {"run.archive_capacity", ""},  {"run.clusters", ""},
          {"model.grid_points", ""},     {"model.mesh_points", ""},
          {"baseline.inner_samples", ""},{"baseline.inner_iterations", ""},
          {"baseline.step_a", ""},       {"baseline.step_A", ""},
          {"baseline.step_alpha", ""},   {"output.dir", ""}};
      if (!known.count(section + "." + key))
        throw ConfigError("unknown config key '" + key + "' in [" + section + "]");
    }
  }
  if (map.count("problem")) {
    const auto& s = map.at("problem");
    read_value(s, "source", cfg.source_path);
    read_value(s, "target", cfg.target_path);
    read_value(s, "kind", cfg.phantom_kind);
    read_value(s, "phantom_seed", cfg.phantom_seed);
  }
  if (map.count("run")) {
    const auto& s = map.at("run");
    read_value(s, "approach", cfg.approach);
    read_value(s, "population", cfg.population);
    read_value(s, "generations", cfg.generations);
    read_value(s, "repetitions", cfg.repetitions);
    read_value(s, "base_seed", cfg.base_seed);
    read_value(s, "sample_count", cfg.sample_count);
    read_value(s, "archive_capacity", cfg.archive_capacity);
    read_value(s, "clusters", cfg.clusters);
  }
  if (map.count("model")) {
    const auto& s = map.at("model");
    read_value(s, "grid_points", cfg.grid_points);
    read_value(s, "mesh_points", cfg.mesh_points);
  }
  if (map.count("baseline")) {
    const auto& s = map.at("baseline");
    read_value(s, "inner_samples", cfg.inner.sample_count);
    read_value(s, "inner_iterations", cfg.inner.max_iterations);
    read_value(s, "step_a", cfg.inner.step_a);
    read_value(s, "step_A", cfg.inner.step_A);
    read_value(s, "step_alpha", cfg.inner.step_alpha);
  }
  if (map.count("output")) read_value(map.at("output"), "dir", cfg.out_dir);
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::desk_preset(const std::string& approach,
                                 const std::string& phantom_kind) {
  RunConfig cfg;
  cfg.approach = approach;
  cfg.phantom_kind = phantom_kind.empty() ? "isolated-blob" : phantom_kind;
  cfg.generations = 100;
  cfg.repetitions = 3;
  cfg.grid_points = {7, 7, 7};
  cfg.mesh_points = 40;
  cfg.archive_capacity = 150;
  cfg.sample_count = 2048;
  if (approach == "bspline-mo") cfg.population = 50;
  else if (approach == "mesh-mo") cfg.population = 100;
  else cfg.population = 24;
  cfg.inner.sample_count = 1000;
  cfg.inner.max_iterations = 100;
  cfg.inner.step_a = 10000.0;
  cfg.validate();
  return cfg;
}

}  // namespace dirw
