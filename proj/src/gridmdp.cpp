#include "mlci/gridmdp.hpp"

#include <algorithm>
#include <cmath>

#include "mlci/errors.hpp"
#include "mlci/parallel.hpp"

namespace mlci {

GridSpec::GridSpec(std::vector<GridDim> dims) : dims_(std::move(dims)) {
  require(!dims_.empty(), "GridSpec: no dimensions");
  state_count_ = 1;
  for (const auto& d : dims_) {
    require(d.cells >= 1, "GridSpec: cell count must be positive");
    require(d.lower < d.upper, "GridSpec: lower must be below upper");
    state_count_ *= d.cells;
  }
}

std::optional<CellIndex> GridSpec::cell_of(const StateVector& x) const {
  require(static_cast<std::size_t>(x.size()) == dims_.size(), "cell_of: dimension mismatch");
  CellIndex index = 0;
  for (std::size_t d = 0; d < dims_.size(); ++d) {
    const auto& dim = dims_[d];
    double v = x[d];
    if (!std::isfinite(v)) return std::nullopt;
    if (dim.periodic) {
      const double period = dim.upper - dim.lower;
      v = dim.lower + std::fmod(v - dim.lower, period);
      if (v < dim.lower) v += period;
      if (v >= dim.upper) v = dim.lower;
    } else if (v < dim.lower || v > dim.upper) {
      return std::nullopt;
    }
    auto c = static_cast<std::size_t>(std::floor((v - dim.lower) / dim.width()));
    c = std::min(c, dim.cells - 1);
    index = index * dim.cells + c;
  }
  return index;
}

StateVector GridSpec::center_of(CellIndex cell) const {
  require(cell < state_count_, "center_of: cell index out of range");
  const auto coords = unravel(cell);
  StateVector x(static_cast<Eigen::Index>(dims_.size()));
  for (std::size_t d = 0; d < dims_.size(); ++d)
    x[d] = dims_[d].lower + (static_cast<double>(coords[d]) + 0.5) * dims_[d].width();
  return x;
}

std::vector<std::size_t> GridSpec::unravel(CellIndex cell) const {
  std::vector<std::size_t> coords(dims_.size());
  for (std::size_t d = dims_.size(); d-- > 0;) {
    coords[d] = cell % dims_[d].cells;
    cell /= dims_[d].cells;
  }
  return coords;
}

CellIndex GridSpec::ravel(std::span<const std::size_t> coords) const {
  require(coords.size() == dims_.size(), "ravel: dimension mismatch");
  CellIndex index = 0;
  for (std::size_t d = 0; d < dims_.size(); ++d) {
    require(coords[d] < dims_[d].cells, "ravel: coordinate out of range");
    index = index * dims_[d].cells + coords[d];
  }
  return index;
}

GridSpec make_grid(const SystemSpec& system, std::span<const std::size_t> cells_per_dim) {
  require(cells_per_dim.size() == system.state_size(), "make_grid: need one cell count per state dim");
  std::vector<GridDim> dims;
  for (std::size_t d = 0; d < system.state_size(); ++d) {
    const auto& sd = system.state_dims[d];
    dims.push_back({cells_per_dim[d], sd.lower, sd.upper, sd.periodic});
  }
  return GridSpec(std::move(dims));
}

std::vector<CellIndex> goal_cells(const GridSpec& grid, const Goal& goal) {
  StateVector probe = goal.target;
  for (std::size_t d = 0; d < grid.dimension(); ++d)
    if (goal.is_free(d)) probe[d] = 0.5 * (grid.dims()[d].lower + grid.dims()[d].upper);
  const auto cell = grid.cell_of(probe);
  if (!cell) throw ContractViolation("goal_cells: goal lies outside the grid");
  const auto anchor = grid.unravel(*cell);
  std::vector<CellIndex> out;
  for (CellIndex s = 0; s < grid.state_count(); ++s) {
    const auto coords = grid.unravel(s);
    bool match = true;
    for (std::size_t d = 0; d < grid.dimension() && match; ++d)
      if (!goal.is_free(d) && coords[d] != anchor[d]) match = false;
    if (match) out.push_back(s);
  }
  return out;
}

ActionSet make_actions(const SystemSpec& system, std::span<const std::size_t> levels) {
  require(levels.size() == system.control_size(), "make_actions: need one level count per control dim");
  std::vector<std::vector<double>> per_dim;
  std::size_t total = 1;
  for (std::size_t d = 0; d < levels.size(); ++d) {
    require(levels[d] >= 1, "make_actions: level count must be positive");
    const auto& cd = system.control_dims[d];
    std::vector<double> values;
    if (levels[d] == 1) {
      values.push_back(0.5 * (cd.lower + cd.upper));
    } else {
      const double step = (cd.upper - cd.lower) / static_cast<double>(levels[d] - 1);
      for (std::size_t k = 0; k < levels[d]; ++k) values.push_back(cd.lower + static_cast<double>(k) * step);
      values.back() = cd.upper;
    }
    per_dim.push_back(std::move(values));
    total *= levels[d];
  }
  ActionSet set;
  for (std::size_t flat = 0; flat < total; ++flat) {
    ControlVector u(static_cast<Eigen::Index>(levels.size()));
    std::size_t rest = flat;
    for (std::size_t d = levels.size(); d-- > 0;) {
      u[d] = per_dim[d][rest % levels[d]];
      rest /= levels[d];
    }
    set.actions.push_back(std::move(u));
  }
  return set;
}

bool Box::contains(const StateVector& x) const {
  for (std::size_t d = 0; d < bounds.size(); ++d)
    if (!bounds[d].contains(x[d])) return false;
  return true;
}

bool Box::intersects(const Box& other) const {
  for (std::size_t d = 0; d < bounds.size(); ++d) {
    const auto& a = bounds[d];
    const auto& b = other.bounds[d];
    if (!(a.lower < b.upper && b.lower < a.upper)) return false;
  }
  return true;
}

bool Box::inside(const Box& outer, double tol) const {
  for (std::size_t d = 0; d < bounds.size(); ++d) {
    const auto& a = bounds[d];
    const auto& b = outer.bounds[d];
    if (a.lower < b.lower - tol || a.upper > b.upper + tol) return false;
  }
  return true;
}

Box make_box(const SystemSpec& system,
             const std::vector<std::pair<std::string, std::pair<double, double>>>& bounds) {
  Box box;
  box.bounds.resize(system.state_size());
  for (const auto& [label, range] : bounds) {
    require(range.first < range.second, "make_box: interval for '" + label + "' is empty");
    box.bounds[system.state_index(label)] = {range.first, range.second, true};
  }
  return box;
}

HypothesisBits HypothesisSet::membership(const StateVector& x) const {
  HypothesisBits bits(regions_.size());
  accumulate(x, bits.words());
  return bits;
}

void HypothesisSet::accumulate(const StateVector& x, std::span<Word> words) const {
  for (std::size_t i = 0; i < regions_.size(); ++i)
    if (regions_[i].contains(x)) words[i / 64] |= Word{1} << (i % 64);
}

HypothesisBits HypothesisSet::covered_by(const Box& box) const {
  HypothesisBits bits(regions_.size());
  for (std::size_t i = 0; i < regions_.size(); ++i)
    if (regions_[i].inside(box)) bits.set(i);
  return bits;
}

HypothesisSet build_hypotheses(const SystemSpec& system, std::span<const std::size_t> dims,
                               std::span<const std::size_t> counts) {
  require(dims.size() == counts.size(), "build_hypotheses: dims and counts differ in length");
  for (std::size_t k = 0; k < dims.size(); ++k) {
    require(dims[k] < system.state_size(), "build_hypotheses: dimension out of range");
    require(counts[k] >= 1, "build_hypotheses: counts must be positive");
    for (std::size_t j = 0; j < k; ++j) require(dims[j] != dims[k], "build_hypotheses: repeated dimension");
  }
  std::size_t total = 1;
  for (auto c : counts) total *= c;
  std::vector<Box> regions;
  regions.reserve(total);
  for (std::size_t flat = 0; flat < total; ++flat) {
    Box box;
    box.bounds.resize(system.state_size());
    std::size_t rest = flat;
    for (std::size_t k = dims.size(); k-- > 0;) {
      const std::size_t c = rest % counts[k];
      rest /= counts[k];
      const auto& sd = system.state_dims[dims[k]];
      const double width = sd.span() / static_cast<double>(counts[k]);
      Interval iv;
      iv.lower = sd.lower + static_cast<double>(c) * width;
      iv.upper = c + 1 == counts[k] ? sd.upper : sd.lower + static_cast<double>(c + 1) * width;
      iv.closed_top = c + 1 == counts[k];
      box.bounds[dims[k]] = iv;
    }
    regions.push_back(std::move(box));
  }
  return HypothesisSet(std::move(regions));
}

TabularMdp::TabularMdp(GridSpec grid, ActionSet actions, double dt, std::size_t hypothesis_count,
                       std::vector<std::int32_t> successors, std::vector<Word> violation_words,
                       std::vector<Word> center_words, std::size_t diverged)
    : grid_(std::move(grid)),
      actions_(std::move(actions)),
      dt_(dt),
      hypothesis_count_(hypothesis_count),
      words_(words_for(hypothesis_count)),
      successors_(std::move(successors)),
      violation_words_(std::move(violation_words)),
      center_words_(std::move(center_words)),
      diverged_(diverged) {
  require(dt_ > 0, "TabularMdp: dt must be positive");
  require(!actions_.actions.empty(), "TabularMdp: empty action set");
  const std::size_t pairs = grid_.state_count() * actions_.size();
  require(successors_.size() == pairs, "TabularMdp: successor table has wrong size");
  require(violation_words_.size() == pairs * words_, "TabularMdp: violation table has wrong size");
  require(center_words_.size() == grid_.state_count() * words_, "TabularMdp: center table has wrong size");
  for (auto s : successors_)
    require(s == kInvalid || (s >= 0 && static_cast<std::size_t>(s) < grid_.state_count()),
            "TabularMdp: successor out of range");
  centers_.reserve(grid_.state_count());
  for (CellIndex s = 0; s < grid_.state_count(); ++s) centers_.push_back(grid_.center_of(s));
}

bool TabularMdp::operator==(const TabularMdp& other) const {
  if (grid_.state_count() != other.grid_.state_count() || actions_.size() != other.actions_.size()) return false;
  for (std::size_t a = 0; a < actions_.size(); ++a)
    if (actions_.actions[a] != other.actions_.actions[a]) return false;
  return dt_ == other.dt_ && hypothesis_count_ == other.hypothesis_count_ &&
         successors_ == other.successors_ && violation_words_ == other.violation_words_ &&
         center_words_ == other.center_words_ && diverged_ == other.diverged_;
}

TabularMdp build_mdp(const SystemSpec& system, const GridSpec& grid, const ActionSet& actions,
                     double dt, const HypothesisSet& hypotheses, std::size_t substeps,
                     std::size_t threads) {
  require(dt > 0, "build_mdp: dt must be positive");
  require(substeps >= 1, "build_mdp: need at least one substep");
  require(grid.dimension() == system.state_size(), "build_mdp: grid does not match system");
  require(actions.size() >= 1, "build_mdp: empty action set");
  const std::size_t states = grid.state_count();
  const std::size_t n_actions = actions.size();
  const std::size_t words = words_for(hypotheses.size());

  std::vector<std::int32_t> successors(states * n_actions, TabularMdp::kInvalid);
  std::vector<Word> violation(states * n_actions * words, 0);
  std::vector<Word> centers(states * words, 0);
  std::vector<std::uint8_t> diverged(states * n_actions, 0);

  parallel_for(states, threads, [&](std::size_t s) {
    const StateVector x_s = grid.center_of(s);
    hypotheses.accumulate(x_s, {centers.data() + s * words, words});
    for (std::size_t a = 0; a < n_actions; ++a) {
      const std::size_t pair = s * n_actions + a;
      std::span<Word> bits{violation.data() + pair * words, words};
      std::vector<StateVector> samples;
      try {
        samples = integrate_segment(system, x_s, actions.actions[a], dt, substeps);
      } catch (const IntegrationDiverged&) {
        diverged[pair] = 1;
        continue;
      }
      for (const auto& x : samples) hypotheses.accumulate(x, bits);
      if (auto next = grid.cell_of(samples.back())) successors[pair] = static_cast<std::int32_t>(*next);
    }
  });

  std::size_t diverged_count = 0;
  for (auto d : diverged) diverged_count += d;
  return TabularMdp(grid, actions, dt, hypotheses.size(), std::move(successors), std::move(violation),
                    std::move(centers), diverged_count);
}

}  // namespace mlci
