#include "aorl/env.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "aorl/data.hpp"

namespace aorl::env {

bool MazeSpec::is_wall_at(double x, double y) const {
  return is_wall(static_cast<int>(std::floor(y)), static_cast<int>(std::floor(x)));
}

std::vector<std::pair<int, int>> MazeSpec::free_cells() const {
  std::vector<std::pair<int, int>> cells;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      if (!is_wall(r, c)) cells.emplace_back(r, c);
  return cells;
}

void MazeSpec::validate() const {
  if (rows <= 0 || cols <= 0 || walls.size() != static_cast<std::size_t>(rows) * cols)
    throw std::invalid_argument("MazeSpec: wall grid shape mismatch");
  if (free_cells().empty()) throw std::invalid_argument("MazeSpec: no free cells");
  if (is_wall_at(goal.x(), goal.y()))
    throw std::invalid_argument("MazeSpec: goal lies in a wall cell");
  if (!(goal_radius > 0.0)) throw std::invalid_argument("MazeSpec: goal_radius must be positive");
  if (!(dt > 0.0)) throw std::invalid_argument("MazeSpec: dt must be positive");
  if (!(max_force > 0.0) || !(max_speed > 0.0))
    throw std::invalid_argument("MazeSpec: force/speed limits must be positive");
  if (max_episode_steps < 1) throw std::invalid_argument("MazeSpec: max_episode_steps must be >= 1");
}

Eigen::Vector4d EnvState::observation() const {
  return {position.x(), position.y(), velocity.x(), velocity.y()};
}

EnvState EnvState::from_observation(const Eigen::Vector4d& obs, int step_index) {
  EnvState s;
  s.position = {obs[0], obs[1]};
  s.velocity = {obs[2], obs[3]};
  s.step_index = step_index;
  return s;
}

bool state_valid(const MazeSpec& spec, const EnvState& state) {
  if (!state.position.allFinite() || !state.velocity.allFinite()) return false;
  if (spec.is_wall_at(state.position.x(), state.position.y())) return false;
  if (state.velocity.cwiseAbs().maxCoeff() > spec.max_speed + 1e-12) return false;
  return state.step_index >= 0;
}

void require_valid_state(const MazeSpec& spec, const EnvState& state) {
  if (!state_valid(spec, state)) {
    std::ostringstream msg;
    msg << "invalid env state: position (" << state.position.x() << ", " << state.position.y()
        << "), velocity (" << state.velocity.x() << ", " << state.velocity.y() << ")";
    throw std::invalid_argument(msg.str());
  }
}

namespace {

// Advance one coordinate from `cur` toward `tgt`, stopping at the first wall
// face. `blocked(cell)` reports whether the crossed cell along this axis is a
// wall. Sets `hit` when the move was clipped.
double move_axis(double cur, double tgt, const std::function<bool(int)>& blocked, bool& hit) {
  hit = false;
  const int c0 = static_cast<int>(std::floor(cur));
  const int c1 = static_cast<int>(std::floor(tgt));
  if (c1 > c0) {
    for (int nc = c0 + 1; nc <= c1; ++nc) {
      if (blocked(nc)) {
        hit = true;
        // face coordinate belongs to the wall cell; rest just inside the free one
        return std::nextafter(static_cast<double>(nc), -1.0);
      }
    }
  } else if (c1 < c0) {
    for (int nc = c0 - 1; nc >= c1; --nc) {
      if (blocked(nc)) {
        hit = true;
        return static_cast<double>(nc + 1);  // face owned by the free cell above
      }
    }
  }
  return tgt;
}

}  // namespace

StepResult step(const MazeSpec& spec, const EnvState& state, Eigen::Vector2d action) {
  require_valid_state(spec, state);
  action = action.cwiseMax(-spec.max_force).cwiseMin(spec.max_force);

  Eigen::Vector2d vel = state.velocity + action * spec.dt;
  vel = vel.cwiseMax(-spec.max_speed).cwiseMin(spec.max_speed);

  const int row_before = static_cast<int>(std::floor(state.position.y()));
  bool hit_x = false;
  const double new_x =
      move_axis(state.position.x(), state.position.x() + vel.x() * spec.dt,
                [&](int col) { return spec.is_wall(row_before, col); }, hit_x);
  if (hit_x) vel.x() = 0.0;

  const int col_after = static_cast<int>(std::floor(new_x));
  bool hit_y = false;
  const double new_y =
      move_axis(state.position.y(), state.position.y() + vel.y() * spec.dt,
                [&](int row) { return spec.is_wall(row, col_after); }, hit_y);
  if (hit_y) vel.y() = 0.0;

  StepResult result;
  result.next.position = {new_x, new_y};
  result.next.velocity = vel;
  result.next.step_index = state.step_index + 1;
  result.reward = ((result.next.position - spec.goal).norm() <= spec.goal_radius) ? 1.0 : 0.0;
  result.done = result.next.step_index >= spec.max_episode_steps;
  return result;
}

EnvState reset(const MazeSpec& spec, Rng& rng) {
  EnvState s;
  do {
    s.position.x() = rng.uniform(0.0, static_cast<double>(spec.cols));
    s.position.y() = rng.uniform(0.0, static_cast<double>(spec.rows));
  } while (spec.is_wall_at(s.position.x(), s.position.y()));
  s.velocity.setZero();
  s.step_index = 0;
  return s;
}

EnvState reset_to(const MazeSpec& spec, const EnvState& state) {
  EnvState s = state;
  s.step_index = 0;
  require_valid_state(spec, s);
  return s;
}

CandidateSet sample_candidates(const data::Dataset& dataset, int n, Rng& rng) {
  if (dataset.transitions.empty())
    throw std::invalid_argument("sample_candidates: dataset is empty");
  if (n < 1) throw std::invalid_argument("sample_candidates: n must be >= 1");
  const std::size_t size = dataset.transitions.size();
  CandidateSet set;
  set.source = CandidateSource::dataset_states;
  set.states.reserve(static_cast<std::size_t>(n));
  auto push = [&](std::size_t idx) {
    const Eigen::VectorXd& obs = dataset.transitions[idx].obs;
    set.states.push_back(EnvState::from_observation(obs.head<4>()));
  };
  if (static_cast<std::size_t>(n) <= size) {
    for (std::size_t idx : rng.sample_without_replacement(size, static_cast<std::size_t>(n)))
      push(idx);
  } else {
    for (int i = 0; i < n; ++i) push(rng.uniform_int(size));
  }
  return set;
}

namespace {

constexpr const char* kOpenLayout = R"(#######
#.....#
#..G..#
#.....#
#######)";

constexpr const char* kUmazeLayout = R"(#####
#G..#
###.#
#...#
#####)";

constexpr const char* kMediumLayout = R"(########
#..##..#
#..#...#
##...###
#..#..G#
#.#..#.#
#...#..#
########)";

constexpr const char* kLargeLayout = R"(############
#....#.....#
#.##.#.#.#.#
#......#...#
#.####.###.#
#..#.#.....#
##.#.#.#.###
#..#...#.G.#
############)";

}  // namespace

MazeSpec parse_layout(const std::string& text, const std::string& name) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  if (lines.empty()) throw std::invalid_argument("layout '" + name + "': empty grid");

  MazeSpec spec;
  spec.rows = static_cast<int>(lines.size());
  spec.cols = static_cast<int>(lines.front().size());
  spec.walls.assign(static_cast<std::size_t>(spec.rows) * spec.cols, 0);
  spec.layout_name = name;
  bool have_goal = false;
  for (int r = 0; r < spec.rows; ++r) {
    if (static_cast<int>(lines[r].size()) != spec.cols)
      throw std::invalid_argument("layout '" + name + "': ragged row " + std::to_string(r));
    for (int c = 0; c < spec.cols; ++c) {
      const char ch = lines[r][static_cast<std::size_t>(c)];
      switch (ch) {
        case '#':
          spec.walls[static_cast<std::size_t>(r) * spec.cols + c] = 1;
          break;
        case '.':
          break;
        case 'G':
          if (have_goal)
            throw std::invalid_argument("layout '" + name + "': multiple goal cells");
          have_goal = true;
          spec.goal = {c + 0.5, r + 0.5};
          break;
        default:
          throw std::invalid_argument("layout '" + name + "': unexpected character '" +
                                      std::string(1, ch) + "' at row " + std::to_string(r));
      }
    }
  }
  if (!have_goal) throw std::invalid_argument("layout '" + name + "': no goal cell");
  spec.validate();
  return spec;
}

MazeSpec load_layout_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open layout file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_layout(buf.str(), path);
}

MazeSpec builtin_layout(const std::string& name) {
  if (name == "open") return parse_layout(kOpenLayout, name);
  if (name == "umaze") return parse_layout(kUmazeLayout, name);
  if (name == "medium") return parse_layout(kMediumLayout, name);
  if (name == "large") return parse_layout(kLargeLayout, name);
  throw std::invalid_argument("unknown built-in layout: " + name);
}

std::vector<std::string> builtin_layout_names() { return {"open", "umaze", "medium", "large"}; }

MazeSpec resolve_layout(const std::string& name_or_path) {
  for (const auto& n : builtin_layout_names())
    if (n == name_or_path) return builtin_layout(n);
  return load_layout_file(name_or_path);
}

}  // namespace aorl::env
