#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aorl/active.hpp"
#include "aorl/data.hpp"
#include "aorl/offline.hpp"
#include "aorl/repr.hpp"
#include "aorl/rng.hpp"

namespace aorl::baselines {

enum class InitMode { environment, active };       // I / A
enum class ExploreMode { random, policy, uncertainty };  // R / P / U

struct AblationArm {
  InitMode init_mode = InitMode::environment;
  ExploreMode explore_mode = ExploreMode::policy;

  std::string label() const;
  static AblationArm parse(const std::string& label);  // "I+R", "A+U", ...
};

// Naive fine-tuning collection: full episodes from the environment's initial
// distribution, following the offline policy with Gaussian action noise.
// capacity < 0 means run until the budget is spent.
std::vector<data::Transition> ft_collect(const env::MazeSpec& spec,
                                         const offline::DeterministicPolicy& policy,
                                         active::Budget& budget, Rng& reset_rng, Rng& action_rng,
                                         active::CollectionLog& log, double noise_sigma = 0.1,
                                         std::int64_t capacity = -1,
                                         std::int64_t episode_id_start = 0);

// Everything an ablation arm may need; unused members can stay null for arms
// that do not touch them.
struct ArmComponents {
  const env::MazeSpec* spec = nullptr;
  const data::Dataset* candidate_source = nullptr;
  const repr::RepresentationEnsemble* ensemble = nullptr;
  const offline::DeterministicPolicy* policy = nullptr;
  active::ExplorationConfig explore_cfg;
  double policy_noise_sigma = 0.1;  // for the P arms
};

// Composes initial-state mode with exploration mode. U arms terminate on the
// uncertainty threshold; R and P arms run full episodes. The A+U arm routes
// through the same code path as the active module.
std::vector<data::Transition> ablation_arm_collect(const AblationArm& arm,
                                                   const ArmComponents& components,
                                                   std::int64_t capacity, active::Budget& budget,
                                                   Rng& reset_rng, Rng& candidate_rng,
                                                   Rng& explore_rng, active::CollectionLog& log,
                                                   std::int64_t episode_id_start);

// Small imitators of the offline policy; their output disagreement stands in
// for state novelty.
struct DistilledEnsemble {
  std::vector<nn::Mlp> nets;  // obs -> act, sharing the policy's normalization
  Eigen::VectorXd obs_mean;
  Eigen::VectorXd obs_std;
  double action_bound = 1.0;

  int count() const { return static_cast<int>(nets.size()); }
  // max pairwise squared distance between member outputs at s
  double disagreement(const Eigen::VectorXd& obs) const;
  Eigen::MatrixXd outputs(const Eigen::VectorXd& obs) const;  // act_dim x count
};

DistilledEnsemble distill_policy(const offline::DeterministicPolicy& policy,
                                 const data::Dataset& d, int count, int hidden, int steps,
                                 int batch_size, std::uint64_t seed);

struct RndConfig {
  double epsilon = 0.5;
  int n_action_samples = 16;
  double noise_scale = 0.3;
};

// Epsilon-greedy exploration from the environment's initial distribution;
// candidate actions are scored by their distance to the nearest distilled-net
// prediction, so the least-imitated action wins.
std::vector<data::Transition> rnd_collect(const env::MazeSpec& spec,
                                          const offline::DeterministicPolicy& policy,
                                          const DistilledEnsemble& distilled, const RndConfig& cfg,
                                          active::Budget& budget, Rng& reset_rng, Rng& action_rng,
                                          active::CollectionLog& log, std::int64_t capacity = -1,
                                          std::int64_t episode_id_start = 0);

}  // namespace aorl::baselines
