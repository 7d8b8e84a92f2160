#include "mlci/demo_io.hpp"

#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "mlci/errors.hpp"

namespace mlci {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) parts.push_back(cur);
  if (!s.empty() && s.back() == sep) parts.emplace_back();
  return parts;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

double to_double(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ContractViolation("demo csv line " + std::to_string(line) + ": bad number '" + s + "'");
  }
}

}  // namespace

std::string units_fragment(const SystemSpec& system) {
  std::string out = "t=s";
  for (const auto& d : system.state_dims) out += " " + d.label + "=" + d.unit;
  for (const auto& d : system.control_dims) out += " " + d.label + "=" + d.unit;
  return out;
}

void write_demos_csv(std::ostream& out, const SystemSpec& system, const std::vector<Demonstration>& demos,
                     const std::string& header_comment) {
  out << std::setprecision(17);
  if (!header_comment.empty()) out << header_comment << '\n';
  for (const auto& demo : demos) {
    out << "# goal demo=" << demo.id << " target=";
    for (Eigen::Index k = 0; k < demo.goal.target.size(); ++k) out << (k ? ";" : "") << demo.goal.target[k];
    out << " free=";
    for (std::size_t k = 0; k < system.state_size(); ++k) out << (k ? ";" : "") << (demo.goal.is_free(k) ? 1 : 0);
    out << '\n';
  }
  out << "demo_id,t";
  for (const auto& d : system.state_dims) out << ',' << d.label;
  for (const auto& d : system.control_dims) out << ',' << d.label;
  out << '\n';
  for (const auto& demo : demos) {
    const auto& traj = demo.trajectory;
    for (std::size_t k = 0; k < traj.states.size(); ++k) {
      out << demo.id << ',' << static_cast<double>(k) * traj.dt_sim;
      for (Eigen::Index d = 0; d < traj.states[k].size(); ++d) out << ',' << traj.states[k][d];
      for (std::size_t c = 0; c < system.control_size(); ++c) {
        out << ',';
        if (k < traj.controls.size()) out << traj.controls[k][static_cast<Eigen::Index>(c)];
      }
      out << '\n';
    }
  }
}

std::vector<Demonstration> read_demos_csv(std::istream& in, const SystemSpec& system) {
  const std::size_t n = system.state_size();
  const std::size_t m = system.control_size();
  std::map<std::size_t, Goal> goals;
  struct Rows {
    std::vector<double> times;
    std::vector<StateVector> states;
    std::vector<std::vector<std::string>> controls;
  };
  std::map<std::size_t, Rows> rows;
  std::vector<std::size_t> order;
  bool have_header = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream fields(line.substr(1));
      std::string tag;
      fields >> tag;
      if (tag != "goal") continue;
      std::size_t id = 0;
      Goal goal;
      std::string token;
      while (fields >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) continue;
        const auto key = token.substr(0, eq);
        const auto value = token.substr(eq + 1);
        if (key == "demo") {
          id = static_cast<std::size_t>(to_double(value, line_no));
        } else if (key == "target") {
          const auto parts = split(value, ';');
          require(parts.size() == n, "demo csv line " + std::to_string(line_no) + ": goal target has wrong dimension");
          goal.target.resize(static_cast<Eigen::Index>(n));
          for (std::size_t k = 0; k < n; ++k) goal.target[static_cast<Eigen::Index>(k)] = to_double(parts[k], line_no);
        } else if (key == "free") {
          for (const auto& p : split(value, ';')) goal.free.push_back(p == "1");
        }
      }
      if (goal.free.size() != n) goal.free.assign(n, false);
      goals[id] = std::move(goal);
      continue;
    }
    const auto cells = split(line, ',');
    if (!have_header) {
      require(cells.size() == 2 + n + m, "demo csv: header must have demo_id, t, state and control columns");
      require(trim(cells[0]) == "demo_id" && trim(cells[1]) == "t", "demo csv: header must start with demo_id,t");
      for (std::size_t k = 0; k < n; ++k)
        require(trim(cells[2 + k]) == system.state_dims[k].label,
                "demo csv: expected state column '" + system.state_dims[k].label + "'");
      for (std::size_t k = 0; k < m; ++k)
        require(trim(cells[2 + n + k]) == system.control_dims[k].label,
                "demo csv: expected control column '" + system.control_dims[k].label + "'");
      have_header = true;
      continue;
    }
    require(cells.size() == 2 + n + m, "demo csv line " + std::to_string(line_no) + ": wrong column count");
    const auto id = static_cast<std::size_t>(to_double(trim(cells[0]), line_no));
    if (!rows.count(id)) order.push_back(id);
    auto& r = rows[id];
    r.times.push_back(to_double(trim(cells[1]), line_no));
    StateVector x(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) x[static_cast<Eigen::Index>(k)] = to_double(trim(cells[2 + k]), line_no);
    r.states.push_back(std::move(x));
    std::vector<std::string> u;
    for (std::size_t k = 0; k < m; ++k) u.push_back(trim(cells[2 + n + k]));
    r.controls.push_back(std::move(u));
  }
  require(have_header, "demo csv: missing header row");

  std::vector<Demonstration> demos;
  for (auto id : order) {
    auto& r = rows[id];
    require(r.states.size() >= 2, "demo csv: demo " + std::to_string(id) + " needs at least two samples");
    Demonstration demo;
    demo.id = id;
    demo.trajectory.dt_sim = r.times[1] - r.times[0];
    for (std::size_t k = 0; k < r.states.size(); ++k) {
      demo.trajectory.states.push_back(canonicalize(system, r.states[k]));
      if (k + 1 == r.states.size()) break;
      ControlVector u(static_cast<Eigen::Index>(m));
      for (std::size_t c = 0; c < m; ++c)
        u[static_cast<Eigen::Index>(c)] = r.controls[k][c].empty() ? 0.0 : to_double(r.controls[k][c], 0);
      demo.trajectory.controls.push_back(std::move(u));
    }
    demo.trajectory.validate();
    demo.start = demo.trajectory.states.front();
    auto g = goals.find(id);
    demo.goal = g != goals.end() ? g->second : Goal::point(demo.trajectory.states.back());
    demos.push_back(std::move(demo));
  }
  return demos;
}

}  // namespace mlci
