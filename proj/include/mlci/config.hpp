#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "mlci/demogen.hpp"
#include "mlci/gridmdp.hpp"

namespace mlci {

struct AccuracySettings {
  std::vector<std::vector<std::size_t>> grids;
  std::vector<double> dts;
  std::size_t pairs = 30;
  std::size_t samples_per_pair = 1;
};

struct RankingSettings {
  std::vector<std::vector<std::size_t>> grids;
  std::vector<double> dts;
  std::size_t max_demos = 9;
  std::size_t shuffles = 5;
};

struct DistanceSettings {
  std::vector<std::vector<std::size_t>> grids;
  std::vector<double> dts;
  std::size_t trials = 65;
};

/// Everything one experiment run depends on. Loaded from a JSON file laid
/// over the built-in defaults of the named system.
struct ExperimentConfig {
  SystemSpec system;
  std::vector<std::size_t> grid_cells;
  std::vector<std::size_t> action_levels;
  double dt = 0.1;
  double horizon = 5.0;
  std::size_t substeps = 20;

  std::vector<std::string> hypothesis_dims;
  std::vector<std::size_t> hypothesis_counts;

  std::map<std::string, Box> constraints;
  std::vector<std::string> true_constraints;

  std::string demo_source = "generate";  // generate | ingest
  std::string demo_path;
  std::size_t demo_count = 100;  // pairs attempted when generating
  DemoGenOptions demogen;        // n_pairs, seed and threads are filled in at use

  std::uint64_t seed = 1;
  std::string output_dir = "out";
  std::string cache_dir;
  std::size_t threads = 1;

  double prior = 0.5;
  std::size_t top_k = 5;

  AccuracySettings accuracy;
  RankingSettings ranking;
  DistanceSettings distance;
  std::size_t confidence_max_demos = 9;
  std::size_t tip_demos = 5;
  std::size_t compare_demo = 0;

  nlohmann::json source;  // the file contents the config was built from

  std::size_t horizon_steps(double step) const;
  const Box& constraint(const std::string& name) const;
  std::vector<std::size_t> hypothesis_dim_indices() const;
  std::string hash_hex() const;  // fnv-1a of the source document
};

ExperimentConfig default_config(const std::string& system_name);
ExperimentConfig config_from_json(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

// Accepts a number or a string such as "pi", "1.2pi", "-0.5*pi".
double parse_scalar(const nlohmann::json& value);

std::uint64_t fnv1a(std::string_view bytes);

}  // namespace mlci
