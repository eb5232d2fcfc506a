#include "aorl/baselines.hpp"

#include <cmath>
#include <stdexcept>

namespace aorl::baselines {

std::string AblationArm::label() const {
  std::string s;
  s += (init_mode == InitMode::active) ? 'A' : 'I';
  s += '+';
  switch (explore_mode) {
    case ExploreMode::random: s += 'R'; break;
    case ExploreMode::policy: s += 'P'; break;
    case ExploreMode::uncertainty: s += 'U'; break;
  }
  return s;
}

AblationArm AblationArm::parse(const std::string& label) {
  if (label.size() != 3 || label[1] != '+')
    throw std::invalid_argument("bad ablation arm '" + label + "', expected e.g. A+U");
  AblationArm arm;
  if (label[0] == 'A')
    arm.init_mode = InitMode::active;
  else if (label[0] == 'I')
    arm.init_mode = InitMode::environment;
  else
    throw std::invalid_argument("bad init mode in arm '" + label + "'");
  switch (label[2]) {
    case 'R': arm.explore_mode = ExploreMode::random; break;
    case 'P': arm.explore_mode = ExploreMode::policy; break;
    case 'U': arm.explore_mode = ExploreMode::uncertainty; break;
    default: throw std::invalid_argument("bad explore mode in arm '" + label + "'");
  }
  return arm;
}

namespace {

void push_transition(std::vector<data::Transition>& buffer, const env::EnvState& state,
                     const Eigen::Vector2d& action, const env::StepResult& step,
                     std::int64_t episode_id, double bound) {
  data::Transition t;
  t.obs = state.observation();
  t.act = action.cwiseMax(-bound).cwiseMin(bound);
  t.next_obs = step.next.observation();
  t.rew = step.reward;
  t.done = step.done;
  t.episode_id = episode_id;
  buffer.push_back(std::move(t));
}

void push_record(active::CollectionLog& log, std::int64_t traj_index, const env::EnvState& state,
                 const Eigen::Vector2d& action, double uncertainty, bool explored) {
  active::StepRecord rec;
  rec.traj_index = traj_index;
  rec.obs = state.observation();
  rec.action = action;
  rec.uncertainty = uncertainty;
  rec.explored = explored;
  rec.stage = 2;
  log.steps.push_back(rec);
}

bool room_left(const active::Budget& budget, std::int64_t used, std::int64_t capacity) {
  if (budget.remaining <= 0) return false;
  return capacity < 0 || used < capacity;
}

}  // namespace

std::vector<data::Transition> ft_collect(const env::MazeSpec& spec,
                                         const offline::DeterministicPolicy& policy,
                                         active::Budget& budget, Rng& reset_rng, Rng& action_rng,
                                         active::CollectionLog& log, double noise_sigma,
                                         std::int64_t capacity, std::int64_t episode_id_start) {
  std::vector<data::Transition> buffer;
  std::int64_t episode_id = episode_id_start;
  while (room_left(budget, static_cast<std::int64_t>(buffer.size()), capacity)) {
    env::EnvState state = env::reset(spec, reset_rng);
    const std::int64_t traj_index = static_cast<std::int64_t>(log.trajectories.size());
    active::TrajectoryRecord traj;
    traj.initial_obs = state.observation();
    auto reason = active::TerminationReason::episode_done;
    std::int64_t length = 0;
    while (true) {
      if (!room_left(budget, static_cast<std::int64_t>(buffer.size()), capacity)) {
        reason = active::TerminationReason::budget_exhausted;
        break;
      }
      Eigen::Vector2d action = policy.act(state.observation());
      if (noise_sigma > 0.0)
        action += noise_sigma * spec.max_force * action_rng.normal_vector(2);
      action = action.cwiseMax(-spec.max_force).cwiseMin(spec.max_force);
      const env::StepResult step = env::step(spec, state, action);
      push_transition(buffer, state, action, step, episode_id, spec.max_force);
      push_record(log, traj_index, state, action, 0.0, false);
      budget.remaining -= 1;
      ++length;
      state = step.next;
      if (step.done) break;
    }
    traj.length = length;
    traj.reason = reason;
    log.trajectories.push_back(traj);
    ++episode_id;
  }
  return buffer;
}

std::vector<data::Transition> ablation_arm_collect(const AblationArm& arm,
                                                   const ArmComponents& components,
                                                   std::int64_t capacity, active::Budget& budget,
                                                   Rng& reset_rng, Rng& candidate_rng,
                                                   Rng& explore_rng, active::CollectionLog& log,
                                                   std::int64_t episode_id_start) {
  if (components.spec == nullptr || components.policy == nullptr)
    throw std::invalid_argument("ablation_arm_collect: missing spec or policy");
  const env::MazeSpec& spec = *components.spec;

  const bool needs_ensemble =
      arm.init_mode == InitMode::active || arm.explore_mode == ExploreMode::uncertainty;
  if (needs_ensemble && components.ensemble == nullptr)
    throw std::invalid_argument("ablation_arm_collect: arm " + arm.label() +
                                " requires the ensemble");
  if (arm.init_mode == InitMode::active && components.candidate_source == nullptr)
    throw std::invalid_argument("ablation_arm_collect: arm " + arm.label() +
                                " requires candidate states");

  // the A+U arm is by definition the active module's collection
  if (arm.init_mode == InitMode::active && arm.explore_mode == ExploreMode::uncertainty) {
    active::ActiveAgent agent{components.ensemble, components.policy, components.explore_cfg};
    return active::collect_buffer(spec, *components.candidate_source, agent, capacity, budget,
                                  candidate_rng, explore_rng, log, episode_id_start);
  }

  active::ActiveAgent agent{components.ensemble, components.policy, components.explore_cfg};
  std::vector<data::Transition> buffer;
  std::int64_t episode_id = episode_id_start;
  int consecutive_empty = 0;
  while (room_left(budget, static_cast<std::int64_t>(buffer.size()), capacity)) {
    env::EnvState state;
    if (arm.init_mode == InitMode::active) {
      const env::CandidateSet candidates = env::sample_candidates(
          *components.candidate_source, components.explore_cfg.candidate_count, candidate_rng);
      state = env::reset_to(spec, active::select_initial_state(candidates, *components.ensemble).state);
    } else {
      state = env::reset(spec, reset_rng);
    }

    const std::int64_t traj_index = static_cast<std::int64_t>(log.trajectories.size());
    active::TrajectoryRecord traj;
    traj.initial_obs = state.observation();
    auto reason = active::TerminationReason::episode_done;
    std::int64_t length = 0;
    while (true) {
      if (!room_left(budget, static_cast<std::int64_t>(buffer.size()), capacity)) {
        reason = active::TerminationReason::budget_exhausted;
        break;
      }
      double uncertainty = 0.0;
      if (arm.explore_mode == ExploreMode::uncertainty) {
        uncertainty = repr::uncertainty_state(*components.ensemble, state.observation(),
                                              repr::Aggregator::max)
                          .value;
        if (uncertainty < components.explore_cfg.uncertainty_threshold) {
          reason = active::TerminationReason::threshold;
          break;
        }
      }
      Eigen::Vector2d action;
      bool explored = false;
      switch (arm.explore_mode) {
        case ExploreMode::random:
          action = {explore_rng.uniform(-spec.max_force, spec.max_force),
                    explore_rng.uniform(-spec.max_force, spec.max_force)};
          explored = true;
          break;
        case ExploreMode::policy:
          action = components.policy->act(state.observation());
          if (components.policy_noise_sigma > 0.0)
            action += components.policy_noise_sigma * spec.max_force *
                      explore_rng.normal_vector(2);
          action = action.cwiseMax(-spec.max_force).cwiseMin(spec.max_force);
          break;
        case ExploreMode::uncertainty: {
          const active::ExploreResult explore =
              active::explore_action(state, agent, spec, explore_rng);
          action = explore.action;
          explored = explore.explored;
          break;
        }
      }
      const env::StepResult step = env::step(spec, state, action);
      push_transition(buffer, state, action, step, episode_id, spec.max_force);
      push_record(log, traj_index, state, action, uncertainty, explored);
      budget.remaining -= 1;
      ++length;
      state = step.next;
      if (step.done) break;
    }
    traj.length = length;
    traj.reason = reason;
    log.trajectories.push_back(traj);
    ++episode_id;
    if (length == 0) {
      if (++consecutive_empty >= 1000)
        throw std::runtime_error("ablation_arm_collect: stuck on zero-length trajectories");
    } else {
      consecutive_empty = 0;
    }
  }
  return buffer;
}

Eigen::MatrixXd DistilledEnsemble::outputs(const Eigen::VectorXd& obs) const {
  Eigen::VectorXd norm = obs - obs_mean;
  norm.array() /= obs_std.array();
  Eigen::MatrixXd out(nets.empty() ? 0 : nets.front().spec.output_dim(),
                      static_cast<Eigen::Index>(nets.size()));
  for (std::size_t i = 0; i < nets.size(); ++i)
    out.col(static_cast<Eigen::Index>(i)) = action_bound * nn::forward(nets[i], norm);
  return out;
}

double DistilledEnsemble::disagreement(const Eigen::VectorXd& obs) const {
  const Eigen::MatrixXd out = outputs(obs);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < out.cols(); ++i)
    for (Eigen::Index j = i + 1; j < out.cols(); ++j)
      worst = std::max(worst, (out.col(i) - out.col(j)).squaredNorm());
  return worst;
}

DistilledEnsemble distill_policy(const offline::DeterministicPolicy& policy,
                                 const data::Dataset& d, int count, int hidden, int steps,
                                 int batch_size, std::uint64_t seed) {
  if (d.transitions.empty()) throw std::invalid_argument("distill_policy: dataset is empty");
  if (count < 1) throw std::invalid_argument("distill_policy: count must be >= 1");
  const int obs_dim = static_cast<int>(d.transitions.front().obs.size());
  const int act_dim = static_cast<int>(d.transitions.front().act.size());

  DistilledEnsemble ensemble;
  ensemble.obs_mean = policy.obs_mean;
  ensemble.obs_std = policy.obs_std;
  ensemble.action_bound = policy.action_bound;
  for (int k = 0; k < count; ++k) {
    nn::Mlp net = nn::Mlp::init(
        nn::MlpSpec::make({obs_dim, hidden, act_dim}, nn::Activation::relu, nn::Activation::tanh,
                          derive_seed(seed, "distill/net/" + std::to_string(k))));
    nn::AdamState opt = nn::AdamState::init(net.spec.parameter_count());
    Rng rng = Rng::derive(seed, "distill/batches/" + std::to_string(k));
    for (int step = 0; step < steps; ++step) {
      const data::Batch batch = data::sample_batch(d, batch_size, rng);
      const Eigen::MatrixXd target = policy.act_batch(batch.obs);
      Eigen::MatrixXd norm = batch.obs.colwise() - ensemble.obs_mean;
      norm.array().colwise() /= ensemble.obs_std.array();
      nn::ForwardTrace trace;
      const Eigen::MatrixXd out = ensemble.action_bound * nn::forward(net, norm, trace);
      const Eigen::MatrixXd diff = out - target;
      const Eigen::MatrixXd out_grad =
          (2.0 * ensemble.action_bound / static_cast<double>(batch_size)) * diff;
      const Eigen::VectorXd grad = nn::backward(net, trace, out_grad);
      nn::adam_step(net, grad, opt);
    }
    ensemble.nets.push_back(std::move(net));
  }
  return ensemble;
}

std::vector<data::Transition> rnd_collect(const env::MazeSpec& spec,
                                          const offline::DeterministicPolicy& policy,
                                          const DistilledEnsemble& distilled, const RndConfig& cfg,
                                          active::Budget& budget, Rng& reset_rng, Rng& action_rng,
                                          active::CollectionLog& log, std::int64_t capacity,
                                          std::int64_t episode_id_start) {
  std::vector<data::Transition> buffer;
  std::int64_t episode_id = episode_id_start;
  while (room_left(budget, static_cast<std::int64_t>(buffer.size()), capacity)) {
    env::EnvState state = env::reset(spec, reset_rng);
    const std::int64_t traj_index = static_cast<std::int64_t>(log.trajectories.size());
    active::TrajectoryRecord traj;
    traj.initial_obs = state.observation();
    auto reason = active::TerminationReason::episode_done;
    std::int64_t length = 0;
    while (true) {
      if (!room_left(budget, static_cast<std::int64_t>(buffer.size()), capacity)) {
        reason = active::TerminationReason::budget_exhausted;
        break;
      }
      const Eigen::Vector2d policy_action = policy.act(state.observation());
      Eigen::Vector2d action = policy_action;
      bool explored = false;
      double score = 0.0;
      if (action_rng.uniform() < cfg.epsilon) {
        explored = true;
        const Eigen::MatrixXd predictions = distilled.outputs(state.observation());
        Eigen::Index best = 0;
        double best_score = 0.0;
        Eigen::MatrixXd candidates(2, cfg.n_action_samples);
        const double sigma = cfg.noise_scale * spec.max_force;
        for (int m = 0; m < cfg.n_action_samples; ++m) {
          candidates.col(m) = (policy_action + sigma * action_rng.normal_vector(2))
                                  .cwiseMax(-spec.max_force)
                                  .cwiseMin(spec.max_force);
          // novelty: distance to the nearest distilled prediction
          double nearest = (candidates.col(m) - predictions.col(0)).squaredNorm();
          for (Eigen::Index i = 1; i < predictions.cols(); ++i)
            nearest = std::min(nearest, (candidates.col(m) - predictions.col(i)).squaredNorm());
          if (m == 0 || nearest > best_score) {
            best_score = nearest;
            best = m;
          }
        }
        action = candidates.col(best);
        score = best_score;
      }
      const env::StepResult step = env::step(spec, state, action);
      push_transition(buffer, state, action, step, episode_id, spec.max_force);
      push_record(log, traj_index, state, action, score, explored);
      budget.remaining -= 1;
      ++length;
      state = step.next;
      if (step.done) break;
    }
    traj.length = length;
    traj.reason = reason;
    log.trajectories.push_back(traj);
    ++episode_id;
  }
  return buffer;
}

}  // namespace aorl::baselines
