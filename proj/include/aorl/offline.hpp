#pragma once

#include <string>

#include <Eigen/Core>

#include "aorl/data.hpp"
#include "aorl/nn.hpp"
#include "aorl/rng.hpp"

namespace aorl::offline {

// Deterministic actor with a tanh head scaled to the action bounds; inputs
// are normalized by frozen dataset statistics.
struct DeterministicPolicy {
  nn::Mlp actor;
  Eigen::VectorXd obs_mean;
  Eigen::VectorXd obs_std;  // floored away from zero
  double action_bound = 1.0;

  Eigen::VectorXd act(const Eigen::VectorXd& obs) const;
  Eigen::MatrixXd act_batch(const Eigen::MatrixXd& obs) const;
  Eigen::MatrixXd normalize(const Eigen::MatrixXd& obs) const;
};

struct CriticPair {
  nn::Mlp q1;
  nn::Mlp q2;
  nn::Mlp q1_target;
  nn::Mlp q2_target;
  double tau = 0.005;
};

struct OfflineConfig {
  double alpha = 2.5;
  double gamma = 0.99;
  int policy_delay = 2;
  double policy_noise = 0.2;
  double noise_clip = 0.5;
  double tau = 0.005;
  int batch_size = 128;
  int steps = 15000;
  double alpha_decay_factor = 5.0;
  int n_epochs = 8;  // used by the fine-tuning alpha schedule
  double lr = 3e-4;
  int hidden_dim = 64;
  // original TD3+BC scales the Q term by alpha / mean|Q|; the plain
  // objective Q - alpha*(pi(s)-a)^2 is the default
  bool normalize_q_scale = false;
};

// Largest action magnitude in the dataset, used as the actor's tanh scale.
double action_bound_from(const data::Dataset& d);

// target <- (1-tau)*target + tau*online
void soft_update(nn::Mlp& target, const nn::Mlp& online, double tau);

// Geometric interpolation from alpha0 at epoch 0 down to alpha0/decay_factor
// at the final epoch.
double alpha_schedule(double alpha0, double decay_factor, int epoch_index, int n_epochs);

// Mean squared action regression loss and its actor parameter gradient.
struct LossResult {
  double loss = 0.0;
  Eigen::VectorXd grad;
};

LossResult bc_loss(const DeterministicPolicy& policy, const Eigen::MatrixXd& obs,
                   const Eigen::MatrixXd& act);

// Clipped double-Q regression against a fixed target value vector.
// Returns gradients for q1 and q2 stacked in that order.
struct CriticLossResult {
  double loss = 0.0;
  Eigen::VectorXd q1_grad;
  Eigen::VectorXd q2_grad;
};

CriticLossResult td3_critic_loss(const CriticPair& critics,
                                 const DeterministicPolicy& policy,
                                 const Eigen::MatrixXd& obs, const Eigen::MatrixXd& act,
                                 const Eigen::VectorXd& target);

// TD3 target value r + gamma*(1-d)*min(Q1',Q2')(s', pi_target(s')+noise).
Eigen::VectorXd td3_target(const CriticPair& critics, const DeterministicPolicy& policy,
                           const nn::Mlp& actor_target, const data::Batch& batch,
                           const OfflineConfig& cfg, Rng& rng);

// Actor objective: maximize Q1(s, pi(s)) - alpha*(pi(s)-a)^2, i.e. minimize
// its negation; gradient w.r.t. actor parameters flows through the critic.
LossResult td3bc_actor_loss(const DeterministicPolicy& policy, const CriticPair& critics,
                            const Eigen::MatrixXd& obs, const Eigen::MatrixXd& act, double alpha,
                            bool normalize_q_scale = false);

struct Learner {
  DeterministicPolicy policy;
  nn::Mlp actor_target;
  CriticPair critics;
  nn::AdamState actor_opt;
  nn::AdamState q1_opt;
  nn::AdamState q2_opt;
  std::int64_t update_count = 0;

  static Learner init(int obs_dim, int act_dim, const OfflineConfig& cfg, double action_bound,
                      const Eigen::VectorXd& obs_mean, const Eigen::VectorXd& obs_std,
                      std::uint64_t seed);

  // one TD3+BC gradient update (critics every call, actor every policy_delay)
  void update(const data::Dataset& d, const OfflineConfig& cfg, double alpha, Rng& rng);
};

// Normalization statistics over dataset observations, std floored at 1e-3.
void observation_stats(const data::Dataset& d, Eigen::VectorXd& mean, Eigen::VectorXd& std);

DeterministicPolicy bc_train(const data::Dataset& d, const OfflineConfig& cfg, std::uint64_t seed);

Learner td3bc_train(const data::Dataset& d, const OfflineConfig& cfg, std::uint64_t seed);

// Y gradient updates on the augmented dataset at the scheduled alpha.
void finetune_epoch(Learner& learner, const data::Dataset& d_augmented, const OfflineConfig& cfg,
                    int epoch_index, int updates, std::uint64_t seed);

// Policy checkpoint: actor net plus normalization statistics and bound.
void save_policy(const DeterministicPolicy& policy, const std::string& path);
DeterministicPolicy load_policy(const std::string& path);

// Critic checkpoint: q1, q2 and their targets plus tau.
void save_critics(const CriticPair& critics, const std::string& path);
CriticPair load_critics(const std::string& path);

}  // namespace aorl::offline
