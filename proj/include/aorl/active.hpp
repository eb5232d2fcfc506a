#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "aorl/data.hpp"
#include "aorl/env.hpp"
#include "aorl/offline.hpp"
#include "aorl/repr.hpp"
#include "aorl/rng.hpp"

namespace aorl::active {

struct ExplorationConfig {
  double epsilon = 0.5;          // probability of taking the uncertainty-seeking action
  int n_action_samples = 16;     // M
  double noise_scale = 0.3;      // stddev of the action perturbation
  double uncertainty_threshold = 0.0;
  double threshold_quantile = 0.5;  // threshold = this quantile of dataset state uncertainty
  repr::Aggregator aggregator = repr::Aggregator::max;
  int candidate_count = 256;     // |C| drawn per trajectory start
};

struct Budget {
  std::int64_t total = 0;
  std::int64_t remaining = 0;

  static Budget of(std::int64_t total) { return {total, total}; }
  std::int64_t used() const { return total - remaining; }
};

struct ActiveAgent {
  const repr::RepresentationEnsemble* scorer = nullptr;
  const offline::DeterministicPolicy* policy = nullptr;
  ExplorationConfig explore_cfg;
};

enum class TerminationReason { threshold, episode_done, budget_exhausted };

std::string to_string(TerminationReason r);

struct StepRecord {
  std::int64_t traj_index = 0;
  Eigen::Vector4d obs;
  Eigen::Vector2d action;
  double uncertainty = 0.0;  // max-aggregate state uncertainty checked before the step
  bool explored = false;
  int stage = 2;  // 1 = travel stage of the restricted variant, 2 = exploration
};

struct TrajectoryRecord {
  Eigen::Vector4d initial_obs;
  std::int64_t length = 0;
  TerminationReason reason = TerminationReason::episode_done;
};

struct CollectionLog {
  std::vector<StepRecord> steps;
  std::vector<TrajectoryRecord> trajectories;

  void save_steps_csv(const std::string& path) const;
  void save_trajectories_csv(const std::string& path) const;
};

// argmax of max-aggregate state uncertainty over the candidates, ties broken
// by lowest index; all scores returned for logging.
struct InitialStateSelection {
  env::EnvState state;
  std::size_t index = 0;
  Eigen::VectorXd scores;
};

InitialStateSelection select_initial_state(const env::CandidateSet& candidates,
                                           const repr::RepresentationEnsemble& ensemble);

struct ExploreResult {
  Eigen::Vector2d action;
  bool explored = false;
  double uncertainty = 0.0;
};

// With probability 1-epsilon the policy action is returned untouched;
// otherwise M noise-perturbed actions are scored by state-action disagreement
// and the argmax (lowest index on ties) is executed.
ExploreResult explore_action(const env::EnvState& state, const ActiveAgent& agent,
                             const env::MazeSpec& spec, Rng& rng);

// Runs from `start` until the state's max-aggregate uncertainty drops below
// the threshold, the episode ends, or the budget is spent. Every step
// decrements the budget by one. step_cap additionally limits this call (used
// to close out a collection buffer) and counts as a budget-type stop.
struct TrajectoryResult {
  std::vector<data::Transition> transitions;
  TerminationReason reason = TerminationReason::episode_done;
};

TrajectoryResult collect_trajectory(const env::MazeSpec& spec, const env::EnvState& start,
                                    const ActiveAgent& agent, Budget& budget, Rng& rng,
                                    CollectionLog& log,
                                    std::int64_t step_cap = -1, std::int64_t episode_id = 0);

// Fills a buffer of exactly `capacity` transitions (or until the budget runs
// out) by repeating candidate sampling, initial-state selection, and
// trajectory collection. Episode ids count up from episode_id_start. Shared
// by the active loop and the A+U ablation arm so the two stay identical.
std::vector<data::Transition> collect_buffer(const env::MazeSpec& spec,
                                             const data::Dataset& candidate_source,
                                             const ActiveAgent& agent, std::int64_t capacity,
                                             Budget& budget, Rng& candidate_rng, Rng& explore_rng,
                                             CollectionLog& log, std::int64_t episode_id_start);

struct CurvePoint {
  int epoch = 0;
  std::int64_t env_steps_used = 0;
  double mean_return = 0.0;
  double normalized_score = 0.0;
};

struct ActiveLoopConfig {
  std::int64_t budget = 40000;
  int epoch_transitions = 2500;  // X
  int epoch_updates = 8000;      // Y
  int repr_steps_per_epoch = 800;
  int repr_batch_size = 256;
  int eval_episodes = 20;
  int threshold_sample_cap = 4096;  // states used for the quantile estimate
};

struct ActiveLoopResult {
  data::Dataset augmented;
  CollectionLog log;
  std::vector<CurvePoint> curve;
};

// Alternative per-epoch collection strategy (restricted two-stage variant,
// ablation arms). Receives the exploration config with the threshold already
// resolved for this epoch and must respect both capacity and budget.
using EpochCollector = std::function<std::vector<data::Transition>(
    const data::Dataset& current, const ExplorationConfig& explore_cfg, std::int64_t capacity,
    Budget& budget, CollectionLog& log, std::int64_t episode_id_start)>;

// The full collect-retrain loop: per epoch, fill a buffer of
// min(X, remaining) transitions from uncertainty-selected starts, append it,
// fine-tune the learner for Y updates at the decayed alpha, continue ensemble
// training, and evaluate. Exactly `budget` transitions are appended in total.
// An empty `collector` means the built-in uncertainty collection; a null
// ensemble (baseline collectors only) skips threshold updates and ensemble
// training.
ActiveLoopResult active_loop(const data::Dataset& d0, const env::MazeSpec& spec,
                             offline::Learner& learner, repr::RepresentationEnsemble* ensemble,
                             const ActiveLoopConfig& loop_cfg,
                             const offline::OfflineConfig& offline_cfg,
                             const ExplorationConfig& explore_cfg, std::uint64_t seed,
                             const std::function<double(double)>& normalize_score,
                             const EpochCollector& collector = {});

// q-th quantile (nearest rank on the sorted values) of max-aggregate state
// uncertainty over the dataset, subsampled by stride above the cap.
double threshold_from_dataset(const repr::RepresentationEnsemble& ensemble,
                              const data::Dataset& d, double quantile, int sample_cap = 4096);

void save_curve_csv(const std::vector<CurvePoint>& curve, const std::string& path);

}  // namespace aorl::active
