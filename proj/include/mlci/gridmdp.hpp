#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mlci/bitset.hpp"
#include "mlci/dynamics.hpp"

namespace mlci {

using CellIndex = std::size_t;

struct GridDim {
  std::size_t cells = 1;
  double lower = 0.0;
  double upper = 1.0;
  bool periodic = false;

  double width() const { return (upper - lower) / static_cast<double>(cells); }
};

/// Regular grid over the state space with half-open cells [lo, hi); the top
/// edge of the last cell is closed. Flat indices are row-major with dim 0
/// most significant.
class GridSpec {
 public:
  GridSpec() = default;
  explicit GridSpec(std::vector<GridDim> dims);

  std::size_t dimension() const { return dims_.size(); }
  std::size_t state_count() const { return state_count_; }
  const std::vector<GridDim>& dims() const { return dims_; }

  std::optional<CellIndex> cell_of(const StateVector& x) const;
  StateVector center_of(CellIndex cell) const;

  std::vector<std::size_t> unravel(CellIndex cell) const;
  CellIndex ravel(std::span<const std::size_t> coords) const;

 private:
  std::vector<GridDim> dims_;
  std::size_t state_count_ = 0;
};

GridSpec make_grid(const SystemSpec& system, std::span<const std::size_t> cells_per_dim);

// Cells whose non-free coordinates match the cell containing goal.target.
std::vector<CellIndex> goal_cells(const GridSpec& grid, const Goal& goal);

struct ActionSet {
  std::vector<ControlVector> actions;

  std::size_t size() const { return actions.size(); }
};

// Cartesian product of evenly spaced levels per control dim (first dim
// varies slowest). A single level sits at the midpoint of the bounds.
ActionSet make_actions(const SystemSpec& system, std::span<const std::size_t> levels);

struct Interval {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  bool closed_top = false;

  bool contains(double v) const { return v >= lower && (v < upper || (closed_top && v == upper)); }
  bool wildcard() const { return std::isinf(lower) && std::isinf(upper); }
};

/// Axis-aligned box over the full state vector; wildcard dims are unbounded.
struct Box {
  std::vector<Interval> bounds;

  bool contains(const StateVector& x) const;
  bool intersects(const Box& other) const;
  // True when every point of this box lies in `outer` (up to tol).
  bool inside(const Box& outer, double tol = 1e-9) const;
};

// Closed box from per-dimension bounds given by label; unspecified dims are wildcards.
Box make_box(const SystemSpec& system,
             const std::vector<std::pair<std::string, std::pair<double, double>>>& bounds);

class HypothesisSet {
 public:
  HypothesisSet() = default;
  explicit HypothesisSet(std::vector<Box> regions) : regions_(std::move(regions)) {}

  std::size_t size() const { return regions_.size(); }
  const Box& region(std::size_t i) const { return regions_.at(i); }
  const std::vector<Box>& regions() const { return regions_; }

  HypothesisBits membership(const StateVector& x) const;
  void accumulate(const StateVector& x, std::span<Word> words) const;

  // Hypotheses lying entirely inside the given box.
  HypothesisBits covered_by(const Box& box) const;

 private:
  std::vector<Box> regions_;
};

// Evenly spaced grid of boxes over the selected state dims (wildcard
// elsewhere), row-major over the selection order.
HypothesisSet build_hypotheses(const SystemSpec& system, std::span<const std::size_t> dims,
                               std::span<const std::size_t> counts);

/// Deterministic tabular MDP with per-transition violation bitsets.
class TabularMdp {
 public:
  static constexpr std::int32_t kInvalid = -1;

  TabularMdp() = default;
  TabularMdp(GridSpec grid, ActionSet actions, double dt, std::size_t hypothesis_count,
             std::vector<std::int32_t> successors, std::vector<Word> violation_words,
             std::vector<Word> center_words, std::size_t diverged = 0);

  const GridSpec& grid() const { return grid_; }
  const ActionSet& actions() const { return actions_; }
  double dt() const { return dt_; }
  std::size_t state_count() const { return grid_.state_count(); }
  std::size_t action_count() const { return actions_.size(); }
  std::size_t hypothesis_count() const { return hypothesis_count_; }
  std::size_t words_per_set() const { return words_; }
  std::size_t diverged_count() const { return diverged_; }

  bool valid(CellIndex s, std::size_t a) const { return successors_[s * action_count() + a] != kInvalid; }
  CellIndex successor(CellIndex s, std::size_t a) const {
    return static_cast<CellIndex>(successors_[s * action_count() + a]);
  }
  std::span<const Word> violations(CellIndex s, std::size_t a) const {
    return {violation_words_.data() + (s * action_count() + a) * words_, words_};
  }
  // Hypotheses containing the center of cell s.
  std::span<const Word> center_violations(CellIndex s) const {
    return {center_words_.data() + s * words_, words_};
  }
  const StateVector& center(CellIndex s) const { return centers_[s]; }
  const ControlVector& action(std::size_t a) const { return actions_.actions[a]; }

  const std::vector<std::int32_t>& successor_table() const { return successors_; }
  const std::vector<Word>& violation_table() const { return violation_words_; }
  const std::vector<Word>& center_table() const { return center_words_; }

  bool operator==(const TabularMdp& other) const;

 private:
  GridSpec grid_;
  ActionSet actions_;
  double dt_ = 0.0;
  std::size_t hypothesis_count_ = 0;
  std::size_t words_ = 0;
  std::vector<std::int32_t> successors_;
  std::vector<Word> violation_words_;
  std::vector<Word> center_words_;
  std::vector<StateVector> centers_;
  std::size_t diverged_ = 0;
};

TabularMdp build_mdp(const SystemSpec& system, const GridSpec& grid, const ActionSet& actions,
                     double dt, const HypothesisSet& hypotheses, std::size_t substeps = 20,
                     std::size_t threads = 1);

}  // namespace mlci
