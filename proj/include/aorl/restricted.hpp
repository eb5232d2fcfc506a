#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "aorl/active.hpp"
#include "aorl/data.hpp"
#include "aorl/offline.hpp"
#include "aorl/rng.hpp"

namespace aorl::restricted {

// Distance-weighted graph over a subsample of dataset states: edge weight
// exp(-||s_i - s_j||), edges below the sparsify threshold dropped.
struct StateGraph {
  std::vector<Eigen::VectorXd> states;                       // node observations
  std::vector<std::vector<std::pair<int, double>>> adjacency;  // undirected, both directions
  double sparsify_threshold = 1e-2;

  int size() const { return static_cast<int>(states.size()); }
  Eigen::Vector2d position(int node) const { return states[static_cast<std::size_t>(node)].head<2>(); }
};

StateGraph build_state_graph(const data::Dataset& d, int max_nodes, double threshold, Rng& rng);

struct Clustering {
  std::vector<int> assignment;  // node -> dense cluster id
  double modularity = 0.0;

  int cluster_count() const;
};

// Two-phase Louvain: greedy local moves maximizing modularity gain, then
// community aggregation, repeated to a fixed point. Node visitation order is
// seed-derived, so the result is deterministic.
Clustering louvain(const StateGraph& g, Rng& rng);

// Newman modularity of an assignment on the graph (the quantity Louvain
// maximizes); exposed so results can be checked independently.
double modularity(const StateGraph& g, const std::vector<int>& assignment);

void save_clustering_csv(const StateGraph& g, const Clustering& c, const std::string& path);

// Hindsight relabeling: non-overlapping windows of `window` transitions; the
// window's final state becomes the goal appended to every observation, with
// unit reward and termination at the window end.
data::Dataset relabel_subtrajectories(const data::Dataset& d, int window);

struct GoalPolicy {
  offline::DeterministicPolicy policy;  // actor over (obs || goal)
  bool trained = false;

  Eigen::Vector2d act(const Eigen::Vector4d& obs, const Eigen::Vector2d& goal) const;
};

// TD3+BC on the relabeled dataset at discount 0.99.
GoalPolicy train_goal_policy(const data::Dataset& relabeled, const offline::OfflineConfig& cfg,
                             std::uint64_t seed);

void save_goal_policy(const GoalPolicy& gp, const std::string& path);
GoalPolicy load_goal_policy(const std::string& path);

struct TwoStageConfig {
  double switch_radius = 1.0;
  int stage1_step_cap = 150;
};

// Collection for the fixed-initial-state setting: reset from the environment
// distribution, travel with the goal policy toward a sampled member of the
// cluster nearest the most-uncertain candidate, then explore with threshold
// termination. Stage-1 steps consume budget and are recorded with stage = 1.
std::vector<data::Transition> two_stage_collect(
    const env::MazeSpec& spec, const data::Dataset& candidate_source,
    const active::ActiveAgent& agent, const GoalPolicy& goal_policy, const StateGraph& graph,
    const Clustering& clustering, const TwoStageConfig& two_stage_cfg, std::int64_t capacity,
    active::Budget& budget, Rng& reset_rng, Rng& candidate_rng, Rng& explore_rng,
    active::CollectionLog& log, std::int64_t episode_id_start);

}  // namespace aorl::restricted
