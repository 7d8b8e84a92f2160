#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "mlci/gridmdp.hpp"

namespace mlci {

// Binary transition-table cache.
//
// Layout (little-endian, packed):
//   char[8]  magic "MLCIMDP\0"
//   u32      format version (currently 1)
//   u64      content key (fnv-1a over system, grid, actions, dt, hypotheses, substeps)
//   u64      state count, u64 action count, u64 hypothesis count, u64 words per set
//   u64      diverged transition count
//   f64      dt
//   u64      grid dimension, then per dim: u64 cells, f64 lower, f64 upper, u8 periodic
//   u64      control dimension, then action_count * control_dim f64 values
//   i32[S*A] successor table (-1 = invalid)
//   u64[S*A*W] violation words
//   u64[S*W]   center membership words

inline constexpr std::uint32_t kMdpCacheVersion = 1;

std::uint64_t mdp_cache_key(const SystemSpec& system, const GridSpec& grid, const ActionSet& actions,
                            double dt, const HypothesisSet& hypotheses, std::size_t substeps);

void save_mdp(const std::filesystem::path& path, const TabularMdp& mdp, std::uint64_t key);

// Returns nullopt when the file is missing, malformed, of another version, or keyed differently.
std::optional<TabularMdp> load_mdp(const std::filesystem::path& path, std::uint64_t key);

// Looks in cache_dir for a table matching the inputs, building and storing it
// on a miss. An empty cache_dir disables caching.
TabularMdp build_mdp_cached(const std::filesystem::path& cache_dir, const SystemSpec& system,
                            const GridSpec& grid, const ActionSet& actions, double dt,
                            const HypothesisSet& hypotheses, std::size_t substeps, std::size_t threads);

}  // namespace mlci
