#include "aorl/restricted.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>

namespace aorl::restricted {

StateGraph build_state_graph(const data::Dataset& d, int max_nodes, double threshold, Rng& rng) {
  if (d.transitions.empty()) throw std::invalid_argument("build_state_graph: dataset is empty");
  if (!(threshold > 0.0) || threshold >= 1.0)
    throw std::invalid_argument("build_state_graph: threshold must lie in (0, 1)");
  if (max_nodes < 1) throw std::invalid_argument("build_state_graph: max_nodes must be >= 1");

  const std::size_t n_states = d.transitions.size();
  std::vector<std::size_t> chosen;
  if (n_states <= static_cast<std::size_t>(max_nodes)) {
    chosen.resize(n_states);
    for (std::size_t i = 0; i < n_states; ++i) chosen[i] = i;
  } else {
    chosen = rng.sample_without_replacement(n_states, static_cast<std::size_t>(max_nodes));
    std::sort(chosen.begin(), chosen.end());
  }

  StateGraph g;
  g.sparsify_threshold = threshold;
  g.states.reserve(chosen.size());
  for (std::size_t idx : chosen) g.states.push_back(d.transitions[idx].obs);
  g.adjacency.assign(g.states.size(), {});

  const double max_distance = -std::log(threshold);
  for (int i = 0; i < g.size(); ++i)
    for (int j = i + 1; j < g.size(); ++j) {
      const double dist = (g.states[static_cast<std::size_t>(i)] -
                           g.states[static_cast<std::size_t>(j)])
                              .norm();
      if (dist > max_distance) continue;
      const double w = std::exp(-dist);
      if (w < threshold) continue;
      g.adjacency[static_cast<std::size_t>(i)].emplace_back(j, w);
      g.adjacency[static_cast<std::size_t>(j)].emplace_back(i, w);
    }
  return g;
}

int Clustering::cluster_count() const {
  int count = 0;
  for (int c : assignment) count = std::max(count, c + 1);
  return count;
}

double modularity(const StateGraph& g, const std::vector<int>& assignment) {
  if (assignment.size() != static_cast<std::size_t>(g.size()))
    throw std::invalid_argument("modularity: assignment size mismatch");
  std::vector<double> degree(assignment.size(), 0.0);
  double two_m = 0.0;
  for (std::size_t i = 0; i < g.adjacency.size(); ++i)
    for (const auto& [j, w] : g.adjacency[i]) {
      degree[i] += w;
      two_m += w;
    }
  if (two_m <= 0.0) return 0.0;

  double internal = 0.0;  // sum of A_ij over ordered pairs in the same community
  for (std::size_t i = 0; i < g.adjacency.size(); ++i)
    for (const auto& [j, w] : g.adjacency[i])
      if (assignment[i] == assignment[static_cast<std::size_t>(j)]) internal += w;

  std::map<int, double> community_degree;
  for (std::size_t i = 0; i < assignment.size(); ++i) community_degree[assignment[i]] += degree[i];
  double expected = 0.0;
  for (const auto& [c, k] : community_degree) expected += (k / two_m) * (k / two_m);
  return internal / two_m - expected;
}

namespace {

struct WorkGraph {
  std::vector<std::vector<std::pair<int, double>>> adj;  // proper edges, both directions
  std::vector<double> self_loop;                         // diagonal A_ii

  int size() const { return static_cast<int>(self_loop.size()); }
};

double work_modularity(const WorkGraph& g, const std::vector<int>& community) {
  std::vector<double> degree(g.self_loop.begin(), g.self_loop.end());
  double two_m = 0.0;
  for (int i = 0; i < g.size(); ++i) {
    for (const auto& [j, w] : g.adj[static_cast<std::size_t>(i)]) degree[static_cast<std::size_t>(i)] += w;
    two_m += degree[static_cast<std::size_t>(i)];
  }
  if (two_m <= 0.0) return 0.0;
  double internal = 0.0;
  for (int i = 0; i < g.size(); ++i) {
    internal += g.self_loop[static_cast<std::size_t>(i)];
    for (const auto& [j, w] : g.adj[static_cast<std::size_t>(i)])
      if (community[static_cast<std::size_t>(i)] == community[static_cast<std::size_t>(j)])
        internal += w;
  }
  std::map<int, double> community_degree;
  for (std::size_t i = 0; i < community.size(); ++i)
    community_degree[community[i]] += degree[i];
  double expected = 0.0;
  for (const auto& [c, k] : community_degree) expected += (k / two_m) * (k / two_m);
  return internal / two_m - expected;
}

// one round of greedy local moves; returns whether anything moved
bool local_phase(const WorkGraph& g, std::vector<int>& community, Rng& rng) {
  const int n = g.size();
  std::vector<double> k(n, 0.0);
  double two_m = 0.0;
  for (int i = 0; i < n; ++i) {
    k[static_cast<std::size_t>(i)] = g.self_loop[static_cast<std::size_t>(i)];
    for (const auto& [j, w] : g.adj[static_cast<std::size_t>(i)])
      k[static_cast<std::size_t>(i)] += w;
    two_m += k[static_cast<std::size_t>(i)];
  }
  if (two_m <= 0.0) return false;

  std::vector<double> community_total(n, 0.0);
  for (int i = 0; i < n; ++i) community_total[static_cast<std::size_t>(community[static_cast<std::size_t>(i)])] += k[static_cast<std::size_t>(i)];

  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  rng.shuffle(order);

  bool any_move = false;
  bool moved = true;
  while (moved) {
    moved = false;
    for (int i : order) {
      const int c_old = community[static_cast<std::size_t>(i)];
      std::map<int, double> links;
      links[c_old];  // candidate even with no internal neighbors
      for (const auto& [j, w] : g.adj[static_cast<std::size_t>(i)])
        links[community[static_cast<std::size_t>(j)]] += w;

      community_total[static_cast<std::size_t>(c_old)] -= k[static_cast<std::size_t>(i)];
      int best_c = c_old;
      double best_gain = links[c_old] -
                         k[static_cast<std::size_t>(i)] * community_total[static_cast<std::size_t>(c_old)] / two_m;
      for (const auto& [c, w_to_c] : links) {
        if (c == c_old) continue;
        const double gain =
            w_to_c - k[static_cast<std::size_t>(i)] * community_total[static_cast<std::size_t>(c)] / two_m;
        if (gain > best_gain + 1e-12) {
          best_gain = gain;
          best_c = c;
        }
      }
      community_total[static_cast<std::size_t>(best_c)] += k[static_cast<std::size_t>(i)];
      if (best_c != c_old) {
        community[static_cast<std::size_t>(i)] = best_c;
        moved = true;
        any_move = true;
      }
    }
  }
  return any_move;
}

// dense relabel by first appearance in node-index order
std::vector<int> densify(const std::vector<int>& community, int& count) {
  std::map<int, int> remap;
  std::vector<int> out(community.size());
  count = 0;
  for (std::size_t i = 0; i < community.size(); ++i) {
    auto it = remap.find(community[i]);
    if (it == remap.end()) it = remap.emplace(community[i], count++).first;
    out[i] = it->second;
  }
  return out;
}

WorkGraph aggregate(const WorkGraph& g, const std::vector<int>& dense_community, int count) {
  WorkGraph out;
  out.self_loop.assign(static_cast<std::size_t>(count), 0.0);
  std::vector<std::map<int, double>> edges(static_cast<std::size_t>(count));
  for (int i = 0; i < g.size(); ++i) {
    const int ci = dense_community[static_cast<std::size_t>(i)];
    out.self_loop[static_cast<std::size_t>(ci)] += g.self_loop[static_cast<std::size_t>(i)];
    for (const auto& [j, w] : g.adj[static_cast<std::size_t>(i)]) {
      const int cj = dense_community[static_cast<std::size_t>(j)];
      if (ci == cj) {
        out.self_loop[static_cast<std::size_t>(ci)] += w;  // ordered pairs both counted
      } else if (ci < cj) {
        edges[static_cast<std::size_t>(ci)][cj] += w;
      }
    }
  }
  out.adj.assign(static_cast<std::size_t>(count), {});
  for (int ci = 0; ci < count; ++ci)
    for (const auto& [cj, w] : edges[static_cast<std::size_t>(ci)]) {
      out.adj[static_cast<std::size_t>(ci)].emplace_back(cj, w);
      out.adj[static_cast<std::size_t>(cj)].emplace_back(ci, w);
    }
  return out;
}

}  // namespace

Clustering louvain(const StateGraph& g, Rng& rng) {
  if (g.size() < 1) throw std::invalid_argument("louvain: empty graph");

  WorkGraph work;
  work.adj = g.adjacency;
  work.self_loop.assign(static_cast<std::size_t>(g.size()), 0.0);

  std::vector<int> node_to_final(static_cast<std::size_t>(g.size()));
  for (int i = 0; i < g.size(); ++i) node_to_final[static_cast<std::size_t>(i)] = i;

  double best_q = work_modularity(work, node_to_final);
  while (true) {
    std::vector<int> community(static_cast<std::size_t>(work.size()));
    for (int i = 0; i < work.size(); ++i) community[static_cast<std::size_t>(i)] = i;
    const bool any_move = local_phase(work, community, rng);
    if (!any_move) break;

    int count = 0;
    const std::vector<int> dense = densify(community, count);
    for (auto& c : node_to_final) c = dense[static_cast<std::size_t>(c)];
    const WorkGraph next = aggregate(work, dense, count);

    std::vector<int> identity(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) identity[static_cast<std::size_t>(i)] = i;
    const double q = work_modularity(next, identity);
    if (q <= best_q + 1e-12) {
      // keep the improved flat assignment even when aggregation adds nothing
      best_q = std::max(best_q, q);
      work = next;
      break;
    }
    best_q = q;
    work = next;
  }

  Clustering result;
  int count = 0;
  result.assignment = densify(node_to_final, count);
  result.modularity = modularity(g, result.assignment);
  return result;
}

void save_clustering_csv(const StateGraph& g, const Clustering& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "node_index,x,y,cluster_id\n";
  char buf[160];
  for (int i = 0; i < g.size(); ++i) {
    const Eigen::Vector2d pos = g.position(i);
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%d\n", i, pos.x(), pos.y(),
                  c.assignment[static_cast<std::size_t>(i)]);
    out << buf;
  }
}

data::Dataset relabel_subtrajectories(const data::Dataset& d, int window) {
  if (window < 2) throw std::invalid_argument("relabel_subtrajectories: window must be >= 2");
  data::Dataset out;
  out.layout_name = d.layout_name;
  out.provenance = d.provenance + "; goal-relabeled w=" + std::to_string(window);
  std::int64_t episode_id = 0;
  for (const auto& [begin, end] : data::trajectory_ranges(d)) {
    const std::size_t length = end - begin;
    const std::size_t n_windows = length / static_cast<std::size_t>(window);
    for (std::size_t w = 0; w < n_windows; ++w) {
      const std::size_t w_begin = begin + w * static_cast<std::size_t>(window);
      const std::size_t w_end = w_begin + static_cast<std::size_t>(window);
      const Eigen::Vector2d goal = d.transitions[w_end - 1].next_obs.head<2>();
      for (std::size_t i = w_begin; i < w_end; ++i) {
        const data::Transition& src = d.transitions[i];
        data::Transition t;
        t.obs.resize(src.obs.size() + 2);
        t.obs << src.obs, goal;
        t.act = src.act;
        t.next_obs.resize(src.next_obs.size() + 2);
        t.next_obs << src.next_obs, goal;
        const bool last = (i + 1 == w_end);
        t.rew = last ? 1.0 : 0.0;
        t.done = last;
        t.episode_id = episode_id;
        out.transitions.push_back(std::move(t));
      }
      ++episode_id;
    }
  }
  return out;
}

Eigen::Vector2d GoalPolicy::act(const Eigen::Vector4d& obs, const Eigen::Vector2d& goal) const {
  Eigen::VectorXd in(6);
  in << obs, goal;
  return policy.act(in);
}

GoalPolicy train_goal_policy(const data::Dataset& relabeled, const offline::OfflineConfig& cfg,
                             std::uint64_t seed) {
  if (relabeled.transitions.empty())
    throw std::invalid_argument("train_goal_policy: relabeled dataset is empty");
  offline::OfflineConfig goal_cfg = cfg;
  goal_cfg.gamma = 0.99;
  offline::Learner learner = offline::td3bc_train(relabeled, goal_cfg, seed);
  GoalPolicy gp;
  gp.policy = std::move(learner.policy);
  gp.trained = true;
  return gp;
}

void save_goal_policy(const GoalPolicy& gp, const std::string& path) {
  offline::save_policy(gp.policy, path);
}

GoalPolicy load_goal_policy(const std::string& path) {
  GoalPolicy gp;
  gp.policy = offline::load_policy(path);
  gp.trained = true;
  return gp;
}

std::vector<data::Transition> two_stage_collect(
    const env::MazeSpec& spec, const data::Dataset& candidate_source,
    const active::ActiveAgent& agent, const GoalPolicy& goal_policy, const StateGraph& graph,
    const Clustering& clustering, const TwoStageConfig& two_stage_cfg, std::int64_t capacity,
    active::Budget& budget, Rng& reset_rng, Rng& candidate_rng, Rng& explore_rng,
    active::CollectionLog& log, std::int64_t episode_id_start) {
  if (!goal_policy.trained) throw std::invalid_argument("two_stage_collect: goal policy untrained");
  if (graph.size() < 1 || clustering.assignment.size() != static_cast<std::size_t>(graph.size()))
    throw std::invalid_argument("two_stage_collect: clustering does not match graph");

  std::vector<data::Transition> buffer;
  std::int64_t episode_id = episode_id_start;

  while (static_cast<std::int64_t>(buffer.size()) < capacity && budget.remaining > 0) {
    env::EnvState state = env::reset(spec, reset_rng);
    const env::CandidateSet candidates =
        env::sample_candidates(candidate_source, agent.explore_cfg.candidate_count, candidate_rng);
    const active::InitialStateSelection sel =
        active::select_initial_state(candidates, *agent.scorer);

    // nearest cluster: the one owning the graph node closest to the candidate
    const Eigen::VectorXd target_obs = sel.state.observation();
    int nearest_node = 0;
    double nearest_dist = (graph.states[0] - target_obs).norm();
    for (int i = 1; i < graph.size(); ++i) {
      const double dist = (graph.states[static_cast<std::size_t>(i)] - target_obs).norm();
      if (dist < nearest_dist) {
        nearest_dist = dist;
        nearest_node = i;
      }
    }
    const int cluster = clustering.assignment[static_cast<std::size_t>(nearest_node)];
    std::vector<int> members;
    for (int i = 0; i < graph.size(); ++i)
      if (clustering.assignment[static_cast<std::size_t>(i)] == cluster) members.push_back(i);
    const int waypoint_node =
        members[candidate_rng.uniform_int(members.size())];
    const Eigen::Vector2d waypoint = graph.position(waypoint_node);

    const std::int64_t traj_index = static_cast<std::int64_t>(log.trajectories.size());
    active::TrajectoryRecord traj;
    traj.initial_obs = state.observation();
    std::int64_t traj_len = 0;
    bool trajectory_over = false;
    auto reason = active::TerminationReason::episode_done;

    const auto record_step = [&](const Eigen::Vector2d& action, double uncertainty, bool explored,
                                 int stage) {
      active::StepRecord rec;
      rec.traj_index = traj_index;
      rec.obs = state.observation();
      rec.action = action;
      rec.uncertainty = uncertainty;
      rec.explored = explored;
      rec.stage = stage;
      log.steps.push_back(rec);
    };
    const auto out_of_room = [&]() {
      return budget.remaining <= 0 || static_cast<std::int64_t>(buffer.size()) >= capacity;
    };

    // stage 1: travel toward the waypoint with the goal-conditioned policy
    int stage1_steps = 0;
    while ((state.position - waypoint).norm() > two_stage_cfg.switch_radius &&
           stage1_steps < two_stage_cfg.stage1_step_cap) {
      if (out_of_room()) {
        reason = active::TerminationReason::budget_exhausted;
        trajectory_over = true;
        break;
      }
      const double state_uncertainty =
          repr::uncertainty_state(*agent.scorer, state.observation(), repr::Aggregator::max).value;
      const Eigen::Vector2d action = goal_policy.act(state.observation(), waypoint);
      const env::StepResult step = env::step(spec, state, action);
      data::Transition t;
      t.obs = state.observation();
      t.act = action.cwiseMax(-spec.max_force).cwiseMin(spec.max_force);
      t.next_obs = step.next.observation();
      t.rew = step.reward;
      t.done = step.done;
      t.episode_id = episode_id;
      buffer.push_back(std::move(t));
      record_step(action, state_uncertainty, false, 1);
      budget.remaining -= 1;
      ++traj_len;
      ++stage1_steps;
      state = step.next;
      if (step.done) {
        reason = active::TerminationReason::episode_done;
        trajectory_over = true;
        break;
      }
    }

    // stage 2: uncertainty-seeking exploration with threshold termination
    while (!trajectory_over) {
      if (out_of_room()) {
        reason = active::TerminationReason::budget_exhausted;
        break;
      }
      const double state_uncertainty =
          repr::uncertainty_state(*agent.scorer, state.observation(), repr::Aggregator::max).value;
      if (state_uncertainty < agent.explore_cfg.uncertainty_threshold) {
        reason = active::TerminationReason::threshold;
        break;
      }
      const active::ExploreResult explore =
          active::explore_action(state, agent, spec, explore_rng);
      const env::StepResult step = env::step(spec, state, explore.action);
      data::Transition t;
      t.obs = state.observation();
      t.act = explore.action;
      t.next_obs = step.next.observation();
      t.rew = step.reward;
      t.done = step.done;
      t.episode_id = episode_id;
      buffer.push_back(std::move(t));
      record_step(explore.action, state_uncertainty, explore.explored, 2);
      budget.remaining -= 1;
      ++traj_len;
      state = step.next;
      if (step.done) {
        reason = active::TerminationReason::episode_done;
        break;
      }
    }

    traj.length = traj_len;
    traj.reason = reason;
    log.trajectories.push_back(traj);
    ++episode_id;
  }
  return buffer;
}

}  // namespace aorl::restricted
