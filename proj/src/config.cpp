#include "mlci/config.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "mlci/errors.hpp"

namespace mlci {

using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;

Box box_from_json(const SystemSpec& system, const json& j) {
  if (!j.is_object()) throw ConfigError("box must be an object of label: [lower, upper]");
  std::vector<std::pair<std::string, std::pair<double, double>>> bounds;
  for (const auto& [label, range] : j.items()) {
    if (!range.is_array() || range.size() != 2) throw ConfigError("box bound '" + label + "' must be [lower, upper]");
    bounds.push_back({label, {parse_scalar(range[0]), parse_scalar(range[1])}});
  }
  try {
    return make_box(system, bounds);
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what());
  }
}

// Sampling box: configured dims override the system bounds.
Box sampling_box(const SystemSpec& system, const json& j) {
  Box box = system_bounds_box(system);
  const Box over = box_from_json(system, j);
  for (std::size_t d = 0; d < box.bounds.size(); ++d)
    if (!over.bounds[d].wildcard()) box.bounds[d] = over.bounds[d];
  return box;
}

std::vector<std::vector<std::size_t>> grid_list(const json& j) {
  std::vector<std::vector<std::size_t>> out;
  for (const auto& g : j) out.push_back(g.get<std::vector<std::size_t>>());
  return out;
}

template <typename T>
void read(const json& j, const char* key, T& target) {
  if (j.contains(key)) target = j.at(key).get<T>();
}

void apply_system(ExperimentConfig& cfg, const json& s) {
  if (s.contains("params"))
    for (const auto& [k, v] : s.at("params").items()) cfg.system.params[k] = parse_scalar(v);
  if (s.contains("state_bounds"))
    for (const auto& [label, range] : s.at("state_bounds").items()) {
      auto& dim = cfg.system.state_dims[cfg.system.state_index(label)];
      dim.lower = parse_scalar(range.at(0));
      dim.upper = parse_scalar(range.at(1));
    }
  if (s.contains("control_bounds"))
    for (const auto& [label, range] : s.at("control_bounds").items()) {
      bool found = false;
      for (auto& dim : cfg.system.control_dims)
        if (dim.label == label) {
          dim.lower = parse_scalar(range.at(0));
          dim.upper = parse_scalar(range.at(1));
          found = true;
        }
      if (!found) throw ConfigError("unknown control dimension '" + label + "'");
    }
}

void validate(const ExperimentConfig& cfg) {
  try {
    cfg.system.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what());
  }
  if (cfg.grid_cells.size() != cfg.system.state_size()) throw ConfigError("grid.cells needs one count per state dim");
  if (cfg.action_levels.size() != cfg.system.control_size())
    throw ConfigError("actions.levels needs one count per control dim");
  if (cfg.hypothesis_dims.size() != cfg.hypothesis_counts.size())
    throw ConfigError("hypotheses.dims and hypotheses.counts differ in length");
  if (!(cfg.dt > 0) || !(cfg.horizon > 0)) throw ConfigError("dt and horizon must be positive");
  if (cfg.substeps < 1) throw ConfigError("substeps must be at least 1");
  for (const auto& name : cfg.true_constraints)
    if (!cfg.constraints.count(name)) throw ConfigError("true constraint '" + name + "' is not defined");
  if (cfg.demo_source != "generate" && cfg.demo_source != "ingest")
    throw ConfigError("demos.source must be 'generate' or 'ingest'");
  if (cfg.demo_source == "ingest" && cfg.demo_path.empty()) throw ConfigError("demos.path is required for ingest");
  if (!(cfg.prior > 0 && cfg.prior < 1)) throw ConfigError("inference.prior must lie in (0, 1)");
  for (const auto* grids : {&cfg.accuracy.grids, &cfg.ranking.grids, &cfg.distance.grids})
    for (const auto& g : *grids)
      if (g.size() != cfg.system.state_size()) throw ConfigError("experiment grid needs one count per state dim");
  (void)cfg.hypothesis_dim_indices();
}

}  // namespace

double parse_scalar(const json& value) {
  if (value.is_number()) return value.get<double>();
  if (!value.is_string()) throw ConfigError("expected a number or a multiple of pi");
  std::string s = value.get<std::string>();
  std::string compact;
  for (char c : s)
    if (c != ' ' && c != '*') compact += c;
  const auto pos = compact.find("pi");
  if (pos == std::string::npos || pos + 2 != compact.size()) throw ConfigError("cannot parse scalar '" + s + "'");
  const std::string factor = compact.substr(0, pos);
  double k = 1.0;
  if (factor == "-")
    k = -1.0;
  else if (!factor.empty() && factor != "+") {
    try {
      std::size_t used = 0;
      k = std::stod(factor, &used);
      if (used != factor.size()) throw std::invalid_argument(factor);
    } catch (const std::exception&) {
      throw ConfigError("cannot parse scalar '" + s + "'");
    }
  }
  return k * kPi;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::size_t ExperimentConfig::horizon_steps(double step) const {
  const double ratio = horizon / step;
  const auto steps = static_cast<std::size_t>(std::llround(ratio));
  if (steps < 1) throw ConfigError("horizon shorter than one transition");
  return steps;
}

const Box& ExperimentConfig::constraint(const std::string& name) const {
  auto it = constraints.find(name);
  if (it == constraints.end()) throw ConfigError("unknown constraint '" + name + "'");
  return it->second;
}

std::vector<std::size_t> ExperimentConfig::hypothesis_dim_indices() const {
  std::vector<std::size_t> out;
  try {
    for (const auto& label : hypothesis_dims) out.push_back(system.state_index(label));
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what());
  }
  return out;
}

std::string ExperimentConfig::hash_hex() const {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << fnv1a(source.dump());
  return out.str();
}

ExperimentConfig default_config(const std::string& system_name) {
  ExperimentConfig cfg;
  cfg.system = system_by_name(system_name);
  const SystemSpec& sys = cfg.system;
  cfg.demogen.horizon = 5.0;
  cfg.demogen.dt_sim = 0.01;
  cfg.demogen.goal_tolerance = 0.05;
  cfg.demogen.restarts = 3;
  cfg.demogen.init_std = 0.5;
  if (system_name == "pendulum") {
    cfg.grid_cells = {20, 20};
    cfg.action_levels = {9};
    cfg.dt = 0.1;
    cfg.hypothesis_dims = {"theta", "theta_dot"};
    cfg.hypothesis_counts = {10, 10};
    cfg.constraints["C1"] = make_box(sys, {{"theta", {kPi, 1.2 * kPi}}, {"theta_dot", {0.0, 1.2}}});
    cfg.constraints["C2"] = make_box(sys, {{"theta", {1.6 * kPi, 1.8 * kPi}}, {"theta_dot", {0.0, 1.2}}});
    cfg.true_constraints = {"C1", "C2"};
    cfg.demo_count = 100;
    cfg.demogen.start_bounds = make_box(sys, {{"theta", {0.0, 2 * kPi}}, {"theta_dot", {-2.0, 2.0}}});
    cfg.demogen.goal_bounds = cfg.demogen.start_bounds;
    cfg.accuracy.grids = {{10, 10}, {20, 20}, {30, 30}, {40, 40}};
    cfg.accuracy.dts = {0.05, 0.1, 0.2};
    cfg.ranking.grids = {{20, 20}};
    cfg.ranking.dts = {0.1};
    cfg.distance.grids = {{10, 10}, {20, 20}};
    cfg.distance.dts = {0.1};
  } else {
    cfg.grid_cells = {10, 5, 10, 5};
    cfg.action_levels = {5, 3};
    cfg.dt = 0.25;
    cfg.hypothesis_dims = {"theta", "l"};
    cfg.hypothesis_counts = {10, 10};
    cfg.constraints["K"] = make_box(sys, {{"theta", {-0.1, 0.2}}, {"l", {0.85, 1.15}}});
    cfg.true_constraints = {"K"};
    cfg.demo_count = 12;
    cfg.demogen.start_bounds =
        make_box(sys, {{"theta", {-0.3, 0.3}}, {"theta_dot", {-0.2, 0.2}}, {"l", {0.55, 0.7}}, {"l_dot", {-0.05, 0.05}}});
    cfg.demogen.goal_bounds =
        make_box(sys, {{"theta", {-0.3, 0.3}}, {"theta_dot", {-0.2, 0.2}}, {"l", {1.3, 1.45}}, {"l_dot", {-0.05, 0.05}}});
    cfg.demogen.goal_free = {false, true, false, true};
    cfg.demogen.ilqr.max_iters = 50;
    cfg.accuracy.grids = {cfg.grid_cells};
    cfg.accuracy.dts = {cfg.dt};
    cfg.ranking.grids = {cfg.grid_cells};
    cfg.ranking.dts = {cfg.dt};
    cfg.ranking.max_demos = 5;
    cfg.distance.grids = {cfg.grid_cells};
    cfg.distance.dts = {cfg.dt};
    cfg.confidence_max_demos = 5;
  }
  cfg.source = json{{"system", {{"name", system_name}}}};
  return cfg;
}

ExperimentConfig config_from_json(const json& doc) {
  try {
    const std::string name = doc.contains("system") ? doc.at("system").value("name", "pendulum") : "pendulum";
    ExperimentConfig cfg = default_config(name);
    cfg.source = doc;
    if (doc.contains("system")) apply_system(cfg, doc.at("system"));
    const auto& sys = cfg.system;

    if (doc.contains("grid")) read(doc.at("grid"), "cells", cfg.grid_cells);
    if (doc.contains("actions")) read(doc.at("actions"), "levels", cfg.action_levels);
    if (doc.contains("dt")) cfg.dt = parse_scalar(doc.at("dt"));
    if (doc.contains("horizon")) cfg.horizon = parse_scalar(doc.at("horizon"));
    read(doc, "substeps", cfg.substeps);
    if (doc.contains("hypotheses")) {
      read(doc.at("hypotheses"), "dims", cfg.hypothesis_dims);
      read(doc.at("hypotheses"), "counts", cfg.hypothesis_counts);
    }
    if (doc.contains("constraints")) {
      cfg.constraints.clear();
      for (const auto& [name2, box] : doc.at("constraints").items()) cfg.constraints[name2] = box_from_json(sys, box);
    }
    read(doc, "true_constraints", cfg.true_constraints);

    if (doc.contains("demos")) {
      const auto& d = doc.at("demos");
      read(d, "source", cfg.demo_source);
      read(d, "path", cfg.demo_path);
      read(d, "count", cfg.demo_count);
      read(d, "tolerance", cfg.demogen.goal_tolerance);
      read(d, "restarts", cfg.demogen.restarts);
      read(d, "init_std", cfg.demogen.init_std);
      read(d, "dt_sim", cfg.demogen.dt_sim);
      if (d.contains("start_bounds")) cfg.demogen.start_bounds = sampling_box(sys, d.at("start_bounds"));
      if (d.contains("goal_bounds")) cfg.demogen.goal_bounds = sampling_box(sys, d.at("goal_bounds"));
      if (d.contains("goal_free")) {
        cfg.demogen.goal_free.assign(sys.state_size(), false);
        for (const auto& label : d.at("goal_free").get<std::vector<std::string>>())
          cfg.demogen.goal_free[sys.state_index(label)] = true;
      }
    }
    cfg.demogen.horizon = cfg.horizon;
    if (doc.contains("ilqr")) {
      const auto& j = doc.at("ilqr");
      read(j, "max_iters", cfg.demogen.ilqr.max_iters);
      read(j, "terminal_weight", cfg.demogen.ilqr.terminal_weight);
      read(j, "penalty_weight", cfg.demogen.ilqr.penalty_weight);
      read(j, "penalty_margin", cfg.demogen.ilqr.penalty_margin);
      read(j, "penalty_sharpness", cfg.demogen.ilqr.penalty_sharpness);
    }
    read(doc, "seed", cfg.seed);
    read(doc, "output_dir", cfg.output_dir);
    read(doc, "cache_dir", cfg.cache_dir);
    read(doc, "threads", cfg.threads);
    if (doc.contains("inference")) {
      read(doc.at("inference"), "prior", cfg.prior);
      read(doc.at("inference"), "top_k", cfg.top_k);
    }
    if (doc.contains("accuracy")) {
      const auto& j = doc.at("accuracy");
      if (j.contains("grids")) cfg.accuracy.grids = grid_list(j.at("grids"));
      read(j, "dts", cfg.accuracy.dts);
      read(j, "pairs", cfg.accuracy.pairs);
      read(j, "samples_per_pair", cfg.accuracy.samples_per_pair);
    }
    if (doc.contains("ranking")) {
      const auto& j = doc.at("ranking");
      if (j.contains("grids")) cfg.ranking.grids = grid_list(j.at("grids"));
      read(j, "dts", cfg.ranking.dts);
      read(j, "max_demos", cfg.ranking.max_demos);
      read(j, "shuffles", cfg.ranking.shuffles);
    }
    if (doc.contains("distance")) {
      const auto& j = doc.at("distance");
      if (j.contains("grids")) cfg.distance.grids = grid_list(j.at("grids"));
      read(j, "dts", cfg.distance.dts);
      read(j, "trials", cfg.distance.trials);
    }
    if (doc.contains("confidence")) read(doc.at("confidence"), "max_demos", cfg.confidence_max_demos);
    if (doc.contains("tip")) read(doc.at("tip"), "demos", cfg.tip_demos);
    if (doc.contains("compare")) read(doc.at("compare"), "demo", cfg.compare_demo);
    validate(cfg);
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in, nullptr, true, true);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(doc);
}

}  // namespace mlci
