#pragma once

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "aorl/env.hpp"
#include "aorl/rng.hpp"

namespace aorl::planner {

// Non-learned waypoint follower: breadth-first distances over free cells plus
// a proportional velocity controller. Serves as the dataset behavior policy,
// the expert reference for score normalization, and the behavioral oracle for
// the goal-conditioned policy.
class WaypointPlanner {
 public:
  WaypointPlanner(const env::MazeSpec& spec, const Eigen::Vector2d& target);

  // Force command toward the next waypoint, clipped to the action bounds.
  Eigen::Vector2d act(const env::EnvState& state) const;

  const Eigen::Vector2d& target() const { return target_; }

  // True when every free cell can reach the target cell.
  bool fully_reachable() const;

 private:
  env::MazeSpec spec_;
  Eigen::Vector2d target_;
  std::vector<int> distance_;  // BFS hops to the target cell, -1 if unreachable

  int cell_distance(int row, int col) const;
};

// Behavior policy for dataset generation: follows the waypoint planner toward
// a uniformly drawn free-space target, redrawing it on arrival or when a new
// episode starts, with Gaussian action noise on top. Covers the maze the way
// an aimless logging controller would.
class WanderPolicy {
 public:
  explicit WanderPolicy(double noise_sigma = 0.2) : noise_sigma_(noise_sigma) {}

  Eigen::Vector2d operator()(const env::MazeSpec& spec, const env::EnvState& state, Rng& rng);

 private:
  double noise_sigma_;
  bool has_target_ = false;
  Eigen::Vector2d target_ = {0.0, 0.0};
  std::unique_ptr<WaypointPlanner> planner_;
  std::string layout_;
};

}  // namespace aorl::planner
