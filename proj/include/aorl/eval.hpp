#pragma once

#include <optional>
#include <string>
#include <vector>

#include "aorl/env.hpp"
#include "aorl/offline.hpp"
#include "aorl/rng.hpp"

namespace aorl::eval {

struct EvalReport {
  double mean_return = 0.0;
  double std_return = 0.0;
  double normalized_score = 0.0;
  int n_episodes = 0;
};

// Normalization anchors: mean returns of a uniform-random policy and of the
// waypoint-planner oracle on the same layout.
struct ReferenceScores {
  double random_return = 0.0;
  double expert_return = 0.0;
  std::string layout_name;
};

struct LearningCurve {
  std::vector<std::pair<std::int64_t, double>> points;  // (env_steps_used, normalized_score)
  int seed = 0;
  std::string method_label;
};

// Undiscounted episodic return of the deterministic policy from the
// environment's initial distribution.
EvalReport evaluate(const env::MazeSpec& spec, const offline::DeterministicPolicy& policy,
                    int n_episodes, Rng& rng);

// 100 * (raw - random) / (expert - random)
double normalize(double raw, const ReferenceScores& ref);

// Percentage of environment steps saved by the active curve in reaching the
// baseline's best score; empty when the active curve never reaches it.
std::optional<double> interaction_reduction(const LearningCurve& active_curve,
                                            const LearningCurve& baseline_curve);

// Anchor returns: uniform-random policy vs the waypoint planner, each over
// n_episodes runs from the initial distribution.
ReferenceScores compute_reference_scores(const env::MazeSpec& spec, Rng& rng,
                                         int n_episodes = 100);

void save_reference_scores(const ReferenceScores& ref, const std::string& path);
ReferenceScores load_reference_scores(const std::string& path);

// Cached per-layout anchors: loads `path` when present, computes and stores
// them otherwise.
ReferenceScores reference_scores_cached(const env::MazeSpec& spec, const std::string& path,
                                        std::uint64_t seed);

// Mean +- std band per method across seeds, aligned on the union step grid by
// previous-value interpolation and truncated at the shortest curve. Writes a
// self-contained SVG and the underlying CSV.
void emit_plots(const std::vector<LearningCurve>& curves, const std::string& svg_path,
                const std::string& csv_path, const std::string& title = "");

void save_curves_csv(const std::vector<LearningCurve>& curves, const std::string& path);
std::vector<LearningCurve> load_curves_csv(const std::string& path);

}  // namespace aorl::eval
