#include "aorl/active.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "aorl/eval.hpp"

namespace aorl::active {

std::string to_string(TerminationReason r) {
  switch (r) {
    case TerminationReason::threshold: return "threshold";
    case TerminationReason::episode_done: return "episode_done";
    case TerminationReason::budget_exhausted: return "budget_exhausted";
  }
  throw std::logic_error("unknown termination reason");
}

InitialStateSelection select_initial_state(const env::CandidateSet& candidates,
                                           const repr::RepresentationEnsemble& ensemble) {
  if (candidates.states.empty())
    throw std::invalid_argument("select_initial_state: empty candidate set");
  Eigen::MatrixXd obs(4, static_cast<Eigen::Index>(candidates.states.size()));
  for (std::size_t i = 0; i < candidates.states.size(); ++i)
    obs.col(static_cast<Eigen::Index>(i)) = candidates.states[i].observation();
  InitialStateSelection sel;
  sel.scores = repr::state_uncertainties(ensemble, obs, repr::Aggregator::max);
  sel.index = 0;
  for (Eigen::Index i = 1; i < sel.scores.size(); ++i)
    if (sel.scores[i] > sel.scores[static_cast<Eigen::Index>(sel.index)])
      sel.index = static_cast<std::size_t>(i);
  sel.state = candidates.states[sel.index];
  return sel;
}

ExploreResult explore_action(const env::EnvState& state, const ActiveAgent& agent,
                             const env::MazeSpec& spec, Rng& rng) {
  const Eigen::VectorXd obs = state.observation();
  const Eigen::Vector2d policy_action = agent.policy->act(obs);
  const double bound = spec.max_force;

  ExploreResult result;
  if (rng.uniform() < agent.explore_cfg.epsilon) {
    const int m = agent.explore_cfg.n_action_samples;
    const double sigma = agent.explore_cfg.noise_scale * bound;  // relative to the action box
    Eigen::MatrixXd actions(2, m);
    for (int i = 0; i < m; ++i)
      actions.col(i) = (policy_action + sigma * rng.normal_vector(2))
                           .cwiseMax(-bound)
                           .cwiseMin(bound);
    const Eigen::VectorXd scores =
        repr::state_action_uncertainties(*agent.scorer, obs, actions, agent.explore_cfg.aggregator);
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < scores.size(); ++i)
      if (scores[i] > scores[best]) best = i;
    result.action = actions.col(best);
    result.explored = true;
    result.uncertainty = scores[best];
  } else {
    result.action = policy_action;
    result.explored = false;
    result.uncertainty =
        repr::uncertainty_state_action(*agent.scorer, obs, policy_action,
                                       agent.explore_cfg.aggregator)
            .value;
  }
  return result;
}

TrajectoryResult collect_trajectory(const env::MazeSpec& spec, const env::EnvState& start,
                                    const ActiveAgent& agent, Budget& budget, Rng& rng,
                                    CollectionLog& log, std::int64_t step_cap,
                                    std::int64_t episode_id) {
  TrajectoryResult result;
  env::EnvState state = env::reset_to(spec, start);
  const std::int64_t traj_index = static_cast<std::int64_t>(log.trajectories.size());

  while (true) {
    if (budget.remaining <= 0 ||
        (step_cap >= 0 && static_cast<std::int64_t>(result.transitions.size()) >= step_cap)) {
      result.reason = TerminationReason::budget_exhausted;
      break;
    }
    const double state_uncertainty =
        repr::uncertainty_state(*agent.scorer, state.observation(), repr::Aggregator::max).value;
    if (state_uncertainty < agent.explore_cfg.uncertainty_threshold) {
      result.reason = TerminationReason::threshold;
      break;
    }
    const ExploreResult explore = explore_action(state, agent, spec, rng);
    const env::StepResult step = env::step(spec, state, explore.action);

    data::Transition t;
    t.obs = state.observation();
    t.act = explore.action;
    t.next_obs = step.next.observation();
    t.rew = step.reward;
    t.done = step.done;
    t.episode_id = episode_id;
    result.transitions.push_back(std::move(t));

    StepRecord record;
    record.traj_index = traj_index;
    record.obs = state.observation();
    record.action = explore.action;
    record.uncertainty = state_uncertainty;
    record.explored = explore.explored;
    record.stage = 2;
    log.steps.push_back(record);

    budget.remaining -= 1;
    state = step.next;
    if (step.done) {
      result.reason = TerminationReason::episode_done;
      break;
    }
  }

  TrajectoryRecord traj;
  traj.initial_obs = start.observation();
  traj.length = static_cast<std::int64_t>(result.transitions.size());
  traj.reason = result.reason;
  log.trajectories.push_back(traj);
  return result;
}

std::vector<data::Transition> collect_buffer(const env::MazeSpec& spec,
                                             const data::Dataset& candidate_source,
                                             const ActiveAgent& agent, std::int64_t capacity,
                                             Budget& budget, Rng& candidate_rng, Rng& explore_rng,
                                             CollectionLog& log, std::int64_t episode_id_start) {
  if (agent.scorer == nullptr || agent.policy == nullptr)
    throw std::invalid_argument("collect_buffer: agent is missing scorer or policy");
  std::vector<data::Transition> buffer;
  std::int64_t episode_id = episode_id_start;
  int consecutive_empty = 0;
  while (static_cast<std::int64_t>(buffer.size()) < capacity && budget.remaining > 0) {
    const env::CandidateSet candidates =
        env::sample_candidates(candidate_source, agent.explore_cfg.candidate_count, candidate_rng);
    const InitialStateSelection sel = select_initial_state(candidates, *agent.scorer);
    const std::int64_t cap = capacity - static_cast<std::int64_t>(buffer.size());
    TrajectoryResult traj =
        collect_trajectory(spec, sel.state, agent, budget, explore_rng, log, cap, episode_id++);
    if (traj.transitions.empty()) {
      if (++consecutive_empty >= 1000)
        throw std::runtime_error(
            "collect_buffer: 1000 consecutive zero-length trajectories; threshold appears "
            "unreachable");
      continue;
    }
    consecutive_empty = 0;
    for (auto& t : traj.transitions) buffer.push_back(std::move(t));
  }
  return buffer;
}

double threshold_from_dataset(const repr::RepresentationEnsemble& ensemble,
                              const data::Dataset& d, double quantile, int sample_cap) {
  if (d.transitions.empty())
    throw std::invalid_argument("threshold_from_dataset: dataset is empty");
  if (quantile < 0.0 || quantile > 1.0)
    throw std::invalid_argument("threshold_from_dataset: quantile outside [0, 1]");
  const std::size_t n = d.transitions.size();
  const std::size_t stride =
      (sample_cap > 0 && n > static_cast<std::size_t>(sample_cap))
          ? (n + static_cast<std::size_t>(sample_cap) - 1) / static_cast<std::size_t>(sample_cap)
          : 1;
  std::vector<std::size_t> indices;
  for (std::size_t i = 0; i < n; i += stride) indices.push_back(i);
  Eigen::MatrixXd obs(d.transitions.front().obs.size(), static_cast<Eigen::Index>(indices.size()));
  for (std::size_t i = 0; i < indices.size(); ++i)
    obs.col(static_cast<Eigen::Index>(i)) = d.transitions[indices[i]].obs;
  Eigen::VectorXd u = repr::state_uncertainties(ensemble, obs, repr::Aggregator::max);
  std::vector<double> values(u.data(), u.data() + u.size());
  std::sort(values.begin(), values.end());
  const std::size_t rank = static_cast<std::size_t>(
      std::floor(quantile * static_cast<double>(values.size() - 1)));
  return values[rank];
}

ActiveLoopResult active_loop(const data::Dataset& d0, const env::MazeSpec& spec,
                             offline::Learner& learner, repr::RepresentationEnsemble* ensemble,
                             const ActiveLoopConfig& loop_cfg,
                             const offline::OfflineConfig& offline_cfg,
                             const ExplorationConfig& explore_cfg, std::uint64_t seed,
                             const std::function<double(double)>& normalize_score,
                             const EpochCollector& collector) {
  if (loop_cfg.budget < 1) throw std::invalid_argument("active_loop: budget must be >= 1");
  if (loop_cfg.epoch_transitions < 1)
    throw std::invalid_argument("active_loop: epoch_transitions must be >= 1");
  if (ensemble == nullptr && !collector)
    throw std::invalid_argument("active_loop: built-in collection requires an ensemble");

  ActiveLoopResult result;
  result.augmented = d0;
  result.augmented.provenance += "; active collection";

  Budget budget = Budget::of(loop_cfg.budget);
  const int n_epochs = static_cast<int>(
      (loop_cfg.budget + loop_cfg.epoch_transitions - 1) / loop_cfg.epoch_transitions);
  offline::OfflineConfig ft_cfg = offline_cfg;
  ft_cfg.n_epochs = n_epochs;

  std::int64_t next_episode_id = 0;
  for (const auto& t : d0.transitions) next_episode_id = std::max(next_episode_id, t.episode_id + 1);

  Rng candidate_rng = Rng::derive(seed, "active/candidates");
  Rng explore_rng = Rng::derive(seed, "active/explore");

  const auto evaluate_point = [&](int epoch) {
    Rng eval_rng = Rng::derive(seed, "active/eval/" + std::to_string(epoch));
    const eval::EvalReport report =
        eval::evaluate(spec, learner.policy, loop_cfg.eval_episodes, eval_rng);
    CurvePoint point;
    point.epoch = epoch;
    point.env_steps_used = budget.used();
    point.mean_return = report.mean_return;
    point.normalized_score = normalize_score(report.mean_return);
    result.curve.push_back(point);
  };

  evaluate_point(0);

  int epoch = 0;
  while (budget.remaining > 0) {
    ExplorationConfig cfg = explore_cfg;
    if (ensemble != nullptr)
      cfg.uncertainty_threshold =
          threshold_from_dataset(*ensemble, result.augmented, explore_cfg.threshold_quantile,
                                 loop_cfg.threshold_sample_cap);

    const std::int64_t capacity = std::min<std::int64_t>(loop_cfg.epoch_transitions,
                                                         budget.remaining);
    const std::size_t trajectories_before = result.log.trajectories.size();
    std::vector<data::Transition> buffer;
    if (collector) {
      buffer = collector(result.augmented, cfg, capacity, budget, result.log, next_episode_id);
    } else {
      ActiveAgent agent{ensemble, &learner.policy, cfg};
      buffer = collect_buffer(spec, result.augmented, agent, capacity, budget, candidate_rng,
                              explore_rng, result.log, next_episode_id);
    }
    next_episode_id +=
        static_cast<std::int64_t>(result.log.trajectories.size() - trajectories_before);
    for (auto& t : buffer) result.augmented.transitions.push_back(std::move(t));

    offline::finetune_epoch(learner, result.augmented, ft_cfg, epoch, loop_cfg.epoch_updates,
                            seed);
    if (ensemble != nullptr)
      repr::train_ensemble(*ensemble, result.augmented, loop_cfg.repr_steps_per_epoch,
                           loop_cfg.repr_batch_size, seed, static_cast<std::uint64_t>(epoch) + 1);

    ++epoch;
    evaluate_point(epoch);
  }
  return result;
}

void CollectionLog::save_steps_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "traj_index,stage,explored,uncertainty,px,py,vx,vy,ax,ay\n";
  char buf[256];
  for (const StepRecord& s : steps) {
    std::snprintf(buf, sizeof(buf), "%lld,%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  static_cast<long long>(s.traj_index), s.stage, s.explored ? 1 : 0,
                  s.uncertainty, s.obs[0], s.obs[1], s.obs[2], s.obs[3], s.action[0], s.action[1]);
    out << buf;
  }
}

void CollectionLog::save_trajectories_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "traj_index,start_px,start_py,start_vx,start_vy,length,reason\n";
  char buf[256];
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const TrajectoryRecord& t = trajectories[i];
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g,%lld,%s\n", i, t.initial_obs[0],
                  t.initial_obs[1], t.initial_obs[2], t.initial_obs[3],
                  static_cast<long long>(t.length), to_string(t.reason).c_str());
    out << buf;
  }
}

void save_curve_csv(const std::vector<CurvePoint>& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "epoch,env_steps_used,mean_return,normalized_score\n";
  char buf[128];
  for (const CurvePoint& p : curve) {
    std::snprintf(buf, sizeof(buf), "%d,%lld,%.17g,%.17g\n", p.epoch,
                  static_cast<long long>(p.env_steps_used), p.mean_return, p.normalized_score);
    out << buf;
  }
}

}  // namespace aorl::active
