#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "aorl/env.hpp"
#include "aorl/rng.hpp"

namespace aorl::data {

struct Transition {
  Eigen::VectorXd obs;
  Eigen::VectorXd act;
  Eigen::VectorXd next_obs;
  double rew = 0.0;
  bool done = false;
  std::int64_t episode_id = 0;
};

struct Dataset {
  std::vector<Transition> transitions;
  std::string layout_name;
  std::string provenance;

  std::size_t size() const { return transitions.size(); }
  bool empty() const { return transitions.empty(); }
};

// Episode ids must partition the transitions into contiguous runs with
// next_obs chaining and done only on a run's final transition. Throws with a
// description of the first violation.
void validate(const Dataset& d);

// Index ranges [begin, end) of each trajectory, in file order.
std::vector<std::pair<std::size_t, std::size_t>> trajectory_ranges(const Dataset& d);

using BehaviorPolicy =
    std::function<Eigen::Vector2d(const env::MazeSpec&, const env::EnvState&, Rng&)>;

// Rolls the behavior policy out from the initial-state distribution until
// n_transitions accumulate. Episodes end at the step limit or when the goal
// radius is entered; the final episode may be truncated by the budget.
Dataset collect_behavior_dataset(const env::MazeSpec& spec, const BehaviorPolicy& policy,
                                 int n_transitions, Rng& rng);

// Drops every transition whose obs or next_obs position falls within `radius`
// of `center`; surviving segments get fresh episode ids. Errors if nothing
// survives.
Dataset prune_near_goal(const Dataset& d, const Eigen::Vector2d& center, double radius);

// Keeps ceil(fraction * n_traj) whole trajectories, chosen uniformly without
// replacement, original order preserved.
Dataset subsample_trajectories(const Dataset& d, double fraction, Rng& rng);

// Newline-delimited text, one transition per line:
//   obs|act|next_obs|rew|done|episode_id
// with space-separated components printed to 17 significant digits, so the
// round trip is bit-exact. Lines starting with '#' carry metadata.
void save(const Dataset& d, const std::string& path);
Dataset load(const std::string& path);

// Uniform-with-replacement minibatch; columns are samples. Negative states
// are drawn independently of the anchors.
struct Batch {
  Eigen::MatrixXd obs;
  Eigen::MatrixXd act;
  Eigen::MatrixXd next_obs;
  Eigen::VectorXd rew;
  Eigen::VectorXd done;
  Eigen::MatrixXd neg_obs;
};

Batch sample_batch(const Dataset& d, int batch_size, Rng& rng);

// Column matrix of all observations (obs_dim x n); used for normalization
// statistics and uncertainty sweeps.
Eigen::MatrixXd observation_matrix(const Dataset& d);

}  // namespace aorl::data
