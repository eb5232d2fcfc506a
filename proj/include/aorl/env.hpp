#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "aorl/rng.hpp"

namespace aorl::data {
struct Dataset;
}

namespace aorl::env {

// Continuous point-mass maze. Cell (row r, col c) of the wall grid covers
// x in [c, c+1), y in [r, r+1); anything outside the grid counts as wall.
struct MazeSpec {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> walls;  // row-major, 1 = wall
  Eigen::Vector2d goal = {0.0, 0.0};
  double goal_radius = 0.5;
  double dt = 0.1;
  double max_force = 10.0;  // action bound; D4RL's point mass applies a similar gain
  double max_speed = 1.0;
  int max_episode_steps = 300;
  std::string layout_name;

  bool is_wall(int row, int col) const {
    if (row < 0 || row >= rows || col < 0 || col >= cols) return true;
    return walls[static_cast<std::size_t>(row) * cols + col] != 0;
  }
  bool is_wall_at(double x, double y) const;
  std::vector<std::pair<int, int>> free_cells() const;
  void validate() const;
};

struct EnvState {
  Eigen::Vector2d position = {0.0, 0.0};
  Eigen::Vector2d velocity = {0.0, 0.0};
  int step_index = 0;

  Eigen::Vector4d observation() const;
  static EnvState from_observation(const Eigen::Vector4d& obs, int step_index = 0);
};

bool state_valid(const MazeSpec& spec, const EnvState& state);
void require_valid_state(const MazeSpec& spec, const EnvState& state);

struct StepResult {
  EnvState next;
  double reward = 0.0;
  bool done = false;
};

// Semi-implicit Euler with per-axis wall sliding: a blocked axis clamps the
// position to the wall face and zeroes that velocity component. Reward is the
// goal-radius indicator; done fires at the step limit.
StepResult step(const MazeSpec& spec, const EnvState& state, Eigen::Vector2d action);

// Position uniform over free space (rejection sampling), velocity zero.
EnvState reset(const MazeSpec& spec, Rng& rng);

// Environment set exactly to `state` with step_index 0; rejects invalid states.
EnvState reset_to(const MazeSpec& spec, const EnvState& state);

enum class CandidateSource { dataset_states, custom };

struct CandidateSet {
  std::vector<EnvState> states;
  CandidateSource source = CandidateSource::dataset_states;
};

// n states drawn uniformly from the dataset's observations; without
// replacement unless n exceeds the dataset size.
CandidateSet sample_candidates(const data::Dataset& dataset, int n, Rng& rng);

// Layout text: '#' wall, '.' free, 'G' goal (free cell holding the goal
// at its center). Built-in names: open, umaze, medium, large.
MazeSpec parse_layout(const std::string& text, const std::string& name);
MazeSpec load_layout_file(const std::string& path);
MazeSpec builtin_layout(const std::string& name);
std::vector<std::string> builtin_layout_names();

// Resolves a built-in name first, then falls back to a file path.
MazeSpec resolve_layout(const std::string& name_or_path);

}  // namespace aorl::env
