#include "mlci/demogen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "mlci/errors.hpp"
#include "mlci/parallel.hpp"

namespace mlci {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t sub) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    static_cast<std::uint32_t>(sub)};
  return std::mt19937_64(seq);
}

double wrap_pi(double v) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(v + std::numbers::pi, two_pi);
  if (r < 0) r += two_pi;
  return r - std::numbers::pi;
}

// Depth and its gradient with respect to x.
double depth_and_gradient(const SystemSpec& system, const Box& box, const StateVector& x, VectorXd* grad) {
  const auto n = static_cast<Eigen::Index>(system.state_size());
  VectorXd e = VectorXd::Zero(n), de = VectorXd::Zero(n);
  std::vector<Eigen::Index> active;
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& iv = box.bounds[static_cast<std::size_t>(k)];
    if (iv.wildcard()) continue;
    const auto& dim = system.state_dims[static_cast<std::size_t>(k)];
    const double span = dim.span();
    const double lo = std::isinf(iv.lower) ? dim.lower - span : iv.lower;
    const double hi = std::isinf(iv.upper) ? dim.upper + span : iv.upper;
    active.push_back(k);
    if (dim.periodic) {
      const double center = 0.5 * (lo + hi);
      const double delta = wrap_pi(x[k] - center);
      e[k] = (0.5 * (hi - lo) - std::abs(delta)) / span;
      de[k] = (delta >= 0 ? -1.0 : 1.0) / span;
    } else if (x[k] - lo < hi - x[k]) {
      e[k] = (x[k] - lo) / span;
      de[k] = 1.0 / span;
    } else {
      e[k] = (hi - x[k]) / span;
      de[k] = -1.0 / span;
    }
  }
  if (grad) *grad = VectorXd::Zero(n);
  if (active.empty()) return kInf;
  double outside_sq = 0.0;
  for (auto k : active)
    if (e[k] < 0) outside_sq += e[k] * e[k];
  if (outside_sq == 0.0) {
    auto best = active.front();
    for (auto k : active)
      if (e[k] < e[best]) best = k;
    if (grad) (*grad)[best] = de[best];
    return e[best];
  }
  const double norm = std::sqrt(outside_sq);
  if (grad)
    for (auto k : active)
      if (e[k] < 0) (*grad)[k] = -(e[k] / norm) * de[k];
  return -norm;
}

struct Penalty {
  double value = 0.0;
  double d1 = 0.0;  // derivative with respect to depth
  double d2 = 0.0;
};

// (softplus(kappa (depth + margin)) / kappa)^2
Penalty softplus_squared(double depth, const IlqrOptions& opt) {
  if (!std::isfinite(depth)) return {};
  const double kappa = opt.penalty_sharpness;
  const double z = kappa * (depth + opt.penalty_margin);
  const double sp = z > 30.0 ? z : std::log1p(std::exp(z));
  const double s = sp / kappa;
  const double sigma = 1.0 / (1.0 + std::exp(-z));
  return {s * s, 2.0 * s * sigma, 2.0 * sigma * sigma + 2.0 * s * kappa * sigma * (1.0 - sigma)};
}

class IlqrCost {
 public:
  explicit IlqrCost(const DemoProblem& p) : p_(p) {
    const auto n = static_cast<Eigen::Index>(p.system.state_size());
    terminal_scale_ = VectorXd::Zero(n);
    for (Eigen::Index d = 0; d < n; ++d) {
      if (p.goal.is_free(static_cast<std::size_t>(d))) continue;
      const double span = p.system.state_dims[static_cast<std::size_t>(d)].span();
      terminal_scale_[d] = p.options.terminal_weight / (span * span);
    }
  }

  double keep_out(const StateVector& x, VectorXd* lx, MatrixXd* lxx) const {
    if (!p_.keep_out) return 0.0;
    VectorXd grad;
    const double depth = depth_and_gradient(p_.system, *p_.keep_out, x, lx ? &grad : nullptr);
    const auto pen = softplus_squared(depth, p_.options);
    const double w = p_.options.penalty_weight * p_.dt_sim;
    if (lx) *lx += w * pen.d1 * grad;
    if (lxx) *lxx += w * pen.d2 * grad * grad.transpose();
    return w * pen.value;
  }

  // Same penalty on leaving the state bounds of non-periodic dims.
  double bounds(const StateVector& x, VectorXd* lx, MatrixXd* lxx) const {
    double total = 0.0;
    const double w = p_.options.penalty_weight * p_.dt_sim;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      const auto& dim = p_.system.state_dims[static_cast<std::size_t>(k)];
      if (dim.periodic) continue;
      const double span = dim.span();
      for (const double sign : {-1.0, 1.0}) {
        const double depth = sign < 0 ? (dim.lower - x[k]) / span : (x[k] - dim.upper) / span;
        const auto pen = softplus_squared(depth, p_.options);
        total += w * pen.value;
        if (lx) (*lx)[k] += w * pen.d1 * sign / span;
        if (lxx) (*lxx)(k, k) += w * pen.d2 / (span * span);
      }
    }
    return total;
  }

  double running(const StateVector& x, const ControlVector& u) const {
    return u.squaredNorm() * p_.dt_sim + keep_out(x, nullptr, nullptr) + bounds(x, nullptr, nullptr);
  }

  double terminal(const StateVector& x) const {
    const VectorXd diff = state_difference(p_.system, x, p_.goal.target);
    return diff.cwiseProduct(diff).dot(terminal_scale_) + keep_out(x, nullptr, nullptr) + bounds(x, nullptr, nullptr);
  }

  void terminal_derivatives(const StateVector& x, VectorXd& vx, MatrixXd& vxx) const {
    const VectorXd diff = state_difference(p_.system, x, p_.goal.target);
    vx = 2.0 * terminal_scale_.cwiseProduct(diff);
    vxx = (2.0 * terminal_scale_).asDiagonal();
    keep_out(x, &vx, &vxx);
    bounds(x, &vx, &vxx);
  }

  void running_derivatives(const StateVector& x, const ControlVector& u, VectorXd& lx, MatrixXd& lxx, VectorXd& lu,
                           MatrixXd& luu) const {
    const auto n = x.size();
    const auto m = u.size();
    lx = VectorXd::Zero(n);
    lxx = MatrixXd::Zero(n, n);
    keep_out(x, &lx, &lxx);
    bounds(x, &lx, &lxx);
    lu = 2.0 * p_.dt_sim * u;
    luu = 2.0 * p_.dt_sim * MatrixXd::Identity(m, m);
  }

 private:
  const DemoProblem& p_;
  VectorXd terminal_scale_;
};

struct Rollout {
  std::vector<StateVector> states;
  std::vector<ControlVector> controls;
  double cost = kInf;
};

Rollout simulate(const DemoProblem& p, const IlqrCost& cost, const std::vector<ControlVector>& controls) {
  Rollout r;
  r.controls = controls;
  r.states.reserve(controls.size() + 1);
  r.states.push_back(p.start);
  double total = 0.0;
  try {
    for (const auto& u : controls) {
      total += cost.running(r.states.back(), u);
      r.states.push_back(rk4_step(p.system, r.states.back(), u, p.dt_sim));
    }
    total += cost.terminal(r.states.back());
  } catch (const IntegrationDiverged&) {
    return r;
  }
  r.cost = std::isfinite(total) ? total : kInf;
  return r;
}

Rollout simulate_feedback(const DemoProblem& p, const IlqrCost& cost, const Rollout& nominal,
                          const std::vector<VectorXd>& ff, const std::vector<MatrixXd>& fb, double alpha) {
  Rollout r;
  const std::size_t N = nominal.controls.size();
  r.states.reserve(N + 1);
  r.controls.reserve(N);
  r.states.push_back(p.start);
  double total = 0.0;
  try {
    for (std::size_t k = 0; k < N; ++k) {
      const StateVector& x = r.states.back();
      ControlVector u = nominal.controls[k] + alpha * ff[k] + fb[k] * (x - nominal.states[k]);
      total += cost.running(x, u);
      r.states.push_back(rk4_step(p.system, x, u, p.dt_sim));
      r.controls.push_back(std::move(u));
    }
    total += cost.terminal(r.states.back());
  } catch (const IntegrationDiverged&) {
    return r;
  }
  r.cost = std::isfinite(total) ? total : kInf;
  return r;
}

void linearize(const DemoProblem& p, const StateVector& x, const ControlVector& u, MatrixXd& A, MatrixXd& B) {
  const auto n = x.size();
  const auto m = u.size();
  A.resize(n, n);
  B.resize(n, m);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double eps = 1e-6 * std::max(1.0, std::abs(x[j]));
    StateVector xp = x, xm = x;
    xp[j] += eps;
    xm[j] -= eps;
    A.col(j) = (rk4_step(p.system, xp, u, p.dt_sim) - rk4_step(p.system, xm, u, p.dt_sim)) / (2.0 * eps);
  }
  for (Eigen::Index j = 0; j < m; ++j) {
    const double eps = 1e-6 * std::max(1.0, std::abs(u[j]));
    ControlVector up = u, um = u;
    up[j] += eps;
    um[j] -= eps;
    B.col(j) = (rk4_step(p.system, x, up, p.dt_sim) - rk4_step(p.system, x, um, p.dt_sim)) / (2.0 * eps);
  }
}

bool outside_bounds(const SystemSpec& system, const ContinuousTrajectory& traj) {
  for (const auto& x : traj.states)
    for (std::size_t d = 0; d < system.state_size(); ++d) {
      const auto& dim = system.state_dims[d];
      if (!dim.periodic && (x[static_cast<Eigen::Index>(d)] < dim.lower || x[static_cast<Eigen::Index>(d)] > dim.upper))
        return true;
    }
  return false;
}

}  // namespace

std::size_t DemoProblem::steps() const {
  require(dt_sim > 0 && horizon > 0, "DemoProblem: horizon and dt_sim must be positive");
  const double ratio = horizon / dt_sim;
  const auto n = static_cast<std::size_t>(std::llround(ratio));
  require(n >= 1 && std::abs(ratio - static_cast<double>(n)) < 1e-6, "DemoProblem: horizon must be a multiple of dt_sim");
  return n;
}

double keep_out_depth(const SystemSpec& system, const Box& box, const StateVector& x) {
  return depth_and_gradient(system, box, x, nullptr);
}

bool trajectory_hits(const SystemSpec& system, const Box& box, const ContinuousTrajectory& trajectory) {
  for (const auto& x : trajectory.states)
    if (box.contains(canonicalize(system, x))) return true;
  return false;
}

IlqrResult ilqr_solve(const DemoProblem& problem, std::vector<ControlVector> init_controls,
                      std::optional<std::size_t> max_iters) {
  const std::size_t N = problem.steps();
  require(init_controls.size() == N, "ilqr_solve: need one initial control per simulation step");
  require(static_cast<std::size_t>(problem.start.size()) == problem.system.state_size(),
          "ilqr_solve: start has wrong dimension");
  const std::size_t iters = max_iters.value_or(problem.options.max_iters);
  const IlqrCost cost(problem);

  Rollout best = simulate(problem, cost, init_controls);
  if (!std::isfinite(best.cost)) throw OptimizationDiverged("ilqr_solve: initial rollout has non-finite cost");

  IlqrResult result;
  result.cost_history.push_back(best.cost);
  const auto n = static_cast<Eigen::Index>(problem.system.state_size());
  const auto m = static_cast<Eigen::Index>(problem.system.control_size());
  std::vector<VectorXd> ff(N);
  std::vector<MatrixXd> fb(N);
  std::vector<MatrixXd> As(N), Bs(N);
  double mu = 1e-6;
  bool need_linearization = true;

  for (std::size_t iter = 0; iter < iters; ++iter) {
    ++result.iterations;
    try {
      if (need_linearization)
        for (std::size_t k = 0; k < N; ++k) linearize(problem, best.states[k], best.controls[k], As[k], Bs[k]);
    } catch (const IntegrationDiverged&) {
      break;
    }
    need_linearization = false;

    // Backward Riccati recursion with Levenberg-Marquardt damping on Quu.
    bool backward_ok = false;
    double expected = 0.0;
    while (!backward_ok && mu < 1e10) {
      VectorXd vx;
      MatrixXd vxx;
      cost.terminal_derivatives(best.states[N], vx, vxx);
      backward_ok = true;
      expected = 0.0;
      VectorXd lx, lu;
      MatrixXd lxx, luu;
      for (std::size_t k = N; k-- > 0;) {
        cost.running_derivatives(best.states[k], best.controls[k], lx, lxx, lu, luu);
        const MatrixXd& A = As[k];
        const MatrixXd& B = Bs[k];
        const VectorXd qx = lx + A.transpose() * vx;
        const VectorXd qu = lu + B.transpose() * vx;
        const MatrixXd qxx = lxx + A.transpose() * vxx * A;
        const MatrixXd qux = B.transpose() * vxx * A;
        MatrixXd quu = luu + B.transpose() * vxx * B;
        quu += mu * MatrixXd::Identity(m, m);
        Eigen::LLT<MatrixXd> llt(quu);
        if (llt.info() != Eigen::Success) {
          backward_ok = false;
          mu *= 10.0;
          break;
        }
        ff[k] = -llt.solve(qu);
        fb[k] = -llt.solve(qux);
        expected += ff[k].dot(qu);
        vx = qx + fb[k].transpose() * quu * ff[k] + fb[k].transpose() * qu + qux.transpose() * ff[k];
        vxx = qxx + fb[k].transpose() * quu * fb[k] + fb[k].transpose() * qux + qux.transpose() * fb[k];
        vxx = 0.5 * (vxx + vxx.transpose()).eval();
      }
    }
    if (!backward_ok) break;

    bool accepted = false;
    for (double alpha = 1.0; alpha > 1e-3; alpha *= 0.5) {
      Rollout trial = simulate_feedback(problem, cost, best, ff, fb, alpha);
      if (trial.cost < best.cost) {
        const double improvement = best.cost - trial.cost;
        best = std::move(trial);
        result.cost_history.push_back(best.cost);
        accepted = true;
        need_linearization = true;
        if (improvement < 1e-6 * std::max(1.0, best.cost)) result.converged = true;
        break;
      }
    }
    if (accepted) {
      mu = std::max(1e-8, mu * 0.1);
      if (result.converged) break;
    } else {
      if (std::abs(expected) < 1e-9 * std::max(1.0, best.cost)) {
        result.converged = true;
        break;
      }
      mu *= 10.0;
      if (mu > 1e10) break;
    }
  }
  (void)n;

  result.cost = best.cost;
  result.trajectory.dt_sim = problem.dt_sim;
  result.trajectory.controls = best.controls;
  for (const auto& x : best.states) result.trajectory.states.push_back(canonicalize(problem.system, x));
  result.goal_error = normalized_goal_error(problem.system, result.trajectory.states.back(), problem.goal);
  result.violated_keep_out = problem.keep_out && trajectory_hits(problem.system, *problem.keep_out, result.trajectory);
  result.left_bounds = outside_bounds(problem.system, result.trajectory);
  return result;
}

Box system_bounds_box(const SystemSpec& system) {
  Box box;
  for (const auto& d : system.state_dims) box.bounds.push_back({d.lower, d.upper, !d.periodic});
  return box;
}

StateVector sample_in_box(const Box& box, std::uint64_t seed, std::uint64_t stream) {
  auto rng = make_rng(seed, stream, 0x5a17);
  StateVector x(static_cast<Eigen::Index>(box.bounds.size()));
  for (std::size_t d = 0; d < box.bounds.size(); ++d) {
    const auto& iv = box.bounds[d];
    require(std::isfinite(iv.lower) && std::isfinite(iv.upper), "sample_in_box: sampling box must be bounded");
    std::uniform_real_distribution<double> dist(iv.lower, iv.upper);
    x[static_cast<Eigen::Index>(d)] = dist(rng);
  }
  return x;
}

std::vector<std::pair<StateVector, Goal>> sample_pairs(const SystemSpec& system, const std::optional<Box>& keep_out,
                                                       const DemoGenOptions& options) {
  std::vector<std::pair<StateVector, Goal>> pairs;
  auto outside = [&](const StateVector& x) { return !keep_out || !keep_out->contains(canonicalize(system, x)); };
  for (std::size_t p = 0; p < options.n_pairs; ++p) {
    StateVector start, goal;
    std::uint64_t attempt = 0;
    do {
      start = sample_in_box(options.start_bounds, options.seed, (p << 20) + 2 * attempt);
      ++attempt;
      require(attempt < 100000, "sample_pairs: start region lies inside the keep-out box");
    } while (!outside(start));
    attempt = 0;
    do {
      goal = sample_in_box(options.goal_bounds, options.seed, (p << 20) + 2 * attempt + 1);
      ++attempt;
      require(attempt < 100000, "sample_pairs: goal region lies inside the keep-out box");
    } while (!outside(goal));
    Goal g = Goal::point(goal);
    if (!options.goal_free.empty()) g.free = options.goal_free;
    pairs.emplace_back(std::move(start), std::move(g));
  }
  return pairs;
}

DemoSet generate_demos(const SystemSpec& system, const std::optional<Box>& keep_out, const DemoGenOptions& options) {
  require(options.n_pairs >= 1, "generate_demos: need at least one pair");
  require(options.restarts >= 1, "generate_demos: need at least one restart");
  const auto pairs = sample_pairs(system, keep_out, options);

  struct Outcome {
    std::optional<IlqrResult> best;
    std::string failure;
  };
  std::vector<Outcome> outcomes(pairs.size());

  parallel_for(pairs.size(), options.threads, [&](std::size_t p) {
    DemoProblem problem;
    problem.system = system;
    problem.start = pairs[p].first;
    problem.goal = pairs[p].second;
    problem.horizon = options.horizon;
    problem.dt_sim = options.dt_sim;
    problem.keep_out = keep_out;
    problem.options = options.ilqr;
    const std::size_t N = problem.steps();
    for (std::size_t r = 0; r < options.restarts; ++r) {
      auto rng = make_rng(options.seed, p, 1000 + r);
      std::normal_distribution<double> noise(0.0, options.init_std);
      std::vector<ControlVector> init(N, ControlVector(static_cast<Eigen::Index>(system.control_size())));
      for (auto& u : init)
        for (Eigen::Index k = 0; k < u.size(); ++k) u[k] = noise(rng);
      try {
        auto res = ilqr_solve(problem, std::move(init));
        if (!outcomes[p].best || res.cost < outcomes[p].best->cost) outcomes[p].best = std::move(res);
      } catch (const OptimizationDiverged& e) {
        outcomes[p].failure = e.what();
      }
    }
  });

  DemoSet set;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto& out = outcomes[p];
    if (!out.best) {
      set.rejections.push_back({p, "diverged: " + out.failure, kInf});
      continue;
    }
    const auto& res = *out.best;
    if (res.violated_keep_out) {
      set.rejections.push_back({p, "violates keep-out region", res.goal_error});
    } else if (res.left_bounds) {
      set.rejections.push_back({p, "leaves state bounds", res.goal_error});
    } else if (res.goal_error > options.goal_tolerance) {
      set.rejections.push_back({p, "goal not reached", res.goal_error});
    } else {
      Demonstration demo;
      demo.id = p;
      demo.trajectory = res.trajectory;
      demo.start = canonicalize(system, pairs[p].first);
      demo.goal = pairs[p].second;
      demo.goal.target = canonicalize(system, demo.goal.target);
      set.demos.push_back(std::move(demo));
    }
  }
  if (set.demos.empty())
    throw EmptyDataset("generate_demos: none of " + std::to_string(pairs.size()) + " pairs produced an acceptable demonstration");
  return set;
}

}  // namespace mlci
