#include "mlci/mdp_cache.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace mlci {

namespace {

constexpr std::array<char, 8> kMagic = {'M', 'L', 'C', 'I', 'M', 'D', 'P', '\0'};

class Fnv1a {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      hash_ ^= p[i];
      hash_ *= 0x100000001b3ULL;
    }
  }
  void u64(std::uint64_t v) { bytes(&v, sizeof v); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }
  std::uint64_t value() const { return hash_; }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
bool get(std::istream& in, T& v) {
  return static_cast<bool>(in.read(reinterpret_cast<char*>(&v), sizeof v));
}

template <typename T>
bool get_vector(std::istream& in, std::vector<T>& v, std::size_t n) {
  v.resize(n);
  return static_cast<bool>(in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T))));
}

}  // namespace

std::uint64_t mdp_cache_key(const SystemSpec& system, const GridSpec& grid, const ActionSet& actions,
                            double dt, const HypothesisSet& hypotheses, std::size_t substeps) {
  Fnv1a h;
  h.str(system.name);
  h.u64(static_cast<std::uint64_t>(system.field));
  for (const auto& [k, v] : system.params) {
    h.str(k);
    h.f64(v);
  }
  for (const auto& d : system.state_dims) {
    h.f64(d.lower);
    h.f64(d.upper);
    h.u64(d.periodic);
  }
  for (const auto& d : grid.dims()) {
    h.u64(d.cells);
    h.f64(d.lower);
    h.f64(d.upper);
    h.u64(d.periodic);
  }
  h.u64(actions.size());
  for (const auto& u : actions.actions)
    for (Eigen::Index k = 0; k < u.size(); ++k) h.f64(u[k]);
  h.f64(dt);
  h.u64(hypotheses.size());
  for (const auto& box : hypotheses.regions())
    for (const auto& iv : box.bounds) {
      h.f64(iv.lower);
      h.f64(iv.upper);
      h.u64(iv.closed_top);
    }
  h.u64(substeps);
  return h.value();
}

void save_mdp(const std::filesystem::path& path, const TabularMdp& mdp, std::uint64_t key) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write MDP cache " + path.string());
  out.write(kMagic.data(), kMagic.size());
  put(out, kMdpCacheVersion);
  put(out, key);
  put<std::uint64_t>(out, mdp.state_count());
  put<std::uint64_t>(out, mdp.action_count());
  put<std::uint64_t>(out, mdp.hypothesis_count());
  put<std::uint64_t>(out, mdp.words_per_set());
  put<std::uint64_t>(out, mdp.diverged_count());
  put(out, mdp.dt());
  put<std::uint64_t>(out, mdp.grid().dimension());
  for (const auto& d : mdp.grid().dims()) {
    put<std::uint64_t>(out, d.cells);
    put(out, d.lower);
    put(out, d.upper);
    put<std::uint8_t>(out, d.periodic);
  }
  const std::uint64_t control_dim = static_cast<std::uint64_t>(mdp.action(0).size());
  put(out, control_dim);
  for (const auto& u : mdp.actions().actions)
    for (Eigen::Index k = 0; k < u.size(); ++k) put(out, u[k]);
  const auto& succ = mdp.successor_table();
  out.write(reinterpret_cast<const char*>(succ.data()), static_cast<std::streamsize>(succ.size() * sizeof(std::int32_t)));
  const auto& viol = mdp.violation_table();
  out.write(reinterpret_cast<const char*>(viol.data()), static_cast<std::streamsize>(viol.size() * sizeof(Word)));
  const auto& cent = mdp.center_table();
  out.write(reinterpret_cast<const char*>(cent.data()), static_cast<std::streamsize>(cent.size() * sizeof(Word)));
  if (!out) throw std::runtime_error("failed writing MDP cache " + path.string());
}

std::optional<TabularMdp> load_mdp(const std::filesystem::path& path, std::uint64_t key) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) return std::nullopt;
  std::uint32_t version = 0;
  std::uint64_t stored_key = 0, states = 0, n_actions = 0, hyps = 0, words = 0, diverged = 0, dims = 0;
  double dt = 0;
  if (!get(in, version) || version != kMdpCacheVersion) return std::nullopt;
  if (!get(in, stored_key) || stored_key != key) return std::nullopt;
  if (!get(in, states) || !get(in, n_actions) || !get(in, hyps) || !get(in, words) || !get(in, diverged) ||
      !get(in, dt) || !get(in, dims))
    return std::nullopt;
  if (words != words_for(hyps) || dims == 0 || dims > 16) return std::nullopt;
  std::vector<GridDim> grid_dims(dims);
  for (auto& d : grid_dims) {
    std::uint64_t cells = 0;
    std::uint8_t periodic = 0;
    if (!get(in, cells) || !get(in, d.lower) || !get(in, d.upper) || !get(in, periodic)) return std::nullopt;
    d.cells = cells;
    d.periodic = periodic != 0;
  }
  std::uint64_t control_dim = 0;
  if (!get(in, control_dim) || control_dim == 0 || control_dim > 16) return std::nullopt;
  ActionSet actions;
  for (std::uint64_t a = 0; a < n_actions; ++a) {
    ControlVector u(static_cast<Eigen::Index>(control_dim));
    for (Eigen::Index k = 0; k < u.size(); ++k)
      if (!get(in, u[k])) return std::nullopt;
    actions.actions.push_back(std::move(u));
  }
  std::vector<std::int32_t> succ;
  std::vector<Word> viol, cent;
  if (!get_vector(in, succ, states * n_actions) || !get_vector(in, viol, states * n_actions * words) ||
      !get_vector(in, cent, states * words))
    return std::nullopt;
  try {
    GridSpec grid(std::move(grid_dims));
    if (grid.state_count() != states) return std::nullopt;
    return TabularMdp(std::move(grid), std::move(actions), dt, hyps, std::move(succ), std::move(viol),
                      std::move(cent), diverged);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

TabularMdp build_mdp_cached(const std::filesystem::path& cache_dir, const SystemSpec& system,
                            const GridSpec& grid, const ActionSet& actions, double dt,
                            const HypothesisSet& hypotheses, std::size_t substeps, std::size_t threads) {
  if (cache_dir.empty()) return build_mdp(system, grid, actions, dt, hypotheses, substeps, threads);
  const auto key = mdp_cache_key(system, grid, actions, dt, hypotheses, substeps);
  std::ostringstream name;
  name << "mdp_" << std::hex << std::setw(16) << std::setfill('0') << key << ".bin";
  const auto path = cache_dir / name.str();
  if (auto cached = load_mdp(path, key)) return std::move(*cached);
  auto mdp = build_mdp(system, grid, actions, dt, hypotheses, substeps, threads);
  std::filesystem::create_directories(cache_dir);
  save_mdp(path, mdp, key);
  return mdp;
}

}  // namespace mlci
