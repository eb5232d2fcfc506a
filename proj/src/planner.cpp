#include "aorl/planner.hpp"

#include <cmath>
#include <deque>
#include <stdexcept>

namespace aorl::planner {

WaypointPlanner::WaypointPlanner(const env::MazeSpec& spec, const Eigen::Vector2d& target)
    : spec_(spec), target_(target) {
  if (spec_.is_wall_at(target.x(), target.y()))
    throw std::invalid_argument("WaypointPlanner: target lies in a wall cell");
  const int goal_row = static_cast<int>(std::floor(target.y()));
  const int goal_col = static_cast<int>(std::floor(target.x()));
  distance_.assign(static_cast<std::size_t>(spec_.rows) * spec_.cols, -1);
  std::deque<std::pair<int, int>> queue;
  distance_[static_cast<std::size_t>(goal_row) * spec_.cols + goal_col] = 0;
  queue.emplace_back(goal_row, goal_col);
  while (!queue.empty()) {
    const auto [r, c] = queue.front();
    queue.pop_front();
    const int d = distance_[static_cast<std::size_t>(r) * spec_.cols + c];
    const int dr[4] = {1, -1, 0, 0};
    const int dc[4] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      const int nr = r + dr[k];
      const int nc = c + dc[k];
      if (spec_.is_wall(nr, nc)) continue;
      auto& slot = distance_[static_cast<std::size_t>(nr) * spec_.cols + nc];
      if (slot >= 0) continue;
      slot = d + 1;
      queue.emplace_back(nr, nc);
    }
  }
}

int WaypointPlanner::cell_distance(int row, int col) const {
  if (row < 0 || row >= spec_.rows || col < 0 || col >= spec_.cols) return -1;
  return distance_[static_cast<std::size_t>(row) * spec_.cols + col];
}

bool WaypointPlanner::fully_reachable() const {
  for (int r = 0; r < spec_.rows; ++r)
    for (int c = 0; c < spec_.cols; ++c)
      if (!spec_.is_wall(r, c) && cell_distance(r, c) < 0) return false;
  return true;
}

Eigen::Vector2d WaypointPlanner::act(const env::EnvState& state) const {
  const int row = static_cast<int>(std::floor(state.position.y()));
  const int col = static_cast<int>(std::floor(state.position.x()));
  const int here = cell_distance(row, col);

  // waypoint: the target itself once its cell is reached (or unreachable),
  // otherwise the center of the best neighboring cell
  Eigen::Vector2d waypoint = target_;
  if (here > 0) {
    int best_r = row, best_c = col, best_d = here;
    const int dr[4] = {1, -1, 0, 0};
    const int dc[4] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      const int d = cell_distance(row + dr[k], col + dc[k]);
      if (d >= 0 && d < best_d) {
        best_d = d;
        best_r = row + dr[k];
        best_c = col + dc[k];
      }
    }
    waypoint = {best_c + 0.5, best_r + 0.5};
  }

  const Eigen::Vector2d to_waypoint = waypoint - state.position;
  const double dist = to_waypoint.norm();
  Eigen::Vector2d desired_velocity = Eigen::Vector2d::Zero();
  if (dist > 1e-9) {
    const double speed = std::min(spec_.max_speed, 2.0 * dist);
    desired_velocity = to_waypoint / dist * speed;
  }
  // deadbeat velocity tracking within the force budget
  Eigen::Vector2d action = (desired_velocity - state.velocity) / spec_.dt;
  return action.cwiseMax(-spec_.max_force).cwiseMin(spec_.max_force);
}

Eigen::Vector2d WanderPolicy::operator()(const env::MazeSpec& spec, const env::EnvState& state,
                                         Rng& rng) {
  const bool fresh_episode = state.step_index == 0;
  const bool arrived =
      has_target_ && (state.position - target_).norm() <= 0.5;
  if (!has_target_ || fresh_episode || arrived || layout_ != spec.layout_name) {
    do {
      target_.x() = rng.uniform(0.0, static_cast<double>(spec.cols));
      target_.y() = rng.uniform(0.0, static_cast<double>(spec.rows));
    } while (spec.is_wall_at(target_.x(), target_.y()));
    planner_ = std::make_unique<WaypointPlanner>(spec, target_);
    layout_ = spec.layout_name;
    has_target_ = true;
  }
  Eigen::Vector2d action = planner_->act(state);
  if (noise_sigma_ > 0.0) action += noise_sigma_ * spec.max_force * rng.normal_vector(2);
  return action;
}

}  // namespace aorl::planner
