#include "aorl/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "aorl/baselines.hpp"
#include "aorl/planner.hpp"

namespace fs = std::filesystem;

namespace aorl::cli {

namespace {

std::string now_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

repr::EnsembleConfig ensemble_config(const ExperimentConfig& cfg) {
  repr::EnsembleConfig ec;
  ec.count = cfg.repr_cfg.count;
  ec.lambda = cfg.repr_cfg.lambda;
  ec.embed_dim = cfg.repr_cfg.embed_dim;
  ec.hidden_dim = cfg.repr_cfg.hidden_dim;
  ec.lr = cfg.repr_cfg.lr;
  return ec;
}

// everything the offline checkpoints depend on; reuse requires an exact match
std::string offline_stamp(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "dataset " << cfg.dataset_path << " " << file_checksum(cfg.dataset_path) << "\n";
  out << "layout " << cfg.layout << "\n";
  out << "algo " << cfg.offline_algo << "\n";
  for (const auto& [key, value] : config_entries(cfg))
    if (key.rfind("offline.", 0) == 0 || key.rfind("repr.", 0) == 0)
      out << key << " = " << value << "\n";
  return out.str();
}

offline::Learner learner_from_checkpoints(const std::string& policy_path,
                                          const std::string& critics_path,
                                          const offline::OfflineConfig& cfg) {
  offline::Learner l;
  l.policy = offline::load_policy(policy_path);
  l.critics = offline::load_critics(critics_path);
  l.actor_target = l.policy.actor;
  l.actor_opt = nn::AdamState::init(l.policy.actor.spec.parameter_count(), cfg.lr);
  l.q1_opt = nn::AdamState::init(l.critics.q1.spec.parameter_count(), cfg.lr);
  l.q2_opt = nn::AdamState::init(l.critics.q2.spec.parameter_count(), cfg.lr);
  return l;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) return "";
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

active::ActiveLoopConfig loop_config(const ExperimentConfig& cfg) {
  active::ActiveLoopConfig lc;
  lc.budget = cfg.budget;
  lc.epoch_transitions = cfg.epoch_x;
  lc.epoch_updates = cfg.epoch_y;
  lc.repr_steps_per_epoch = cfg.repr_cfg.steps_per_epoch;
  lc.repr_batch_size = cfg.repr_cfg.batch_size;
  lc.eval_episodes = cfg.eval_episodes;
  return lc;
}

std::vector<std::string> split_arms(const std::string& arms) {
  std::vector<std::string> out;
  std::istringstream in(arms);
  std::string tok;
  while (std::getline(in, tok, ','))
    if (!tok.empty()) out.push_back(tok);
  if (out.empty()) throw ConfigError("experiment.arms: no arms given");
  return out;
}

}  // namespace

OfflineArtifacts prepare_offline(const ExperimentConfig& cfg, const data::Dataset& d,
                                 const env::MazeSpec& spec, int seed, const std::string& dir) {
  if (cfg.offline_algo != "td3bc")
    throw ConfigError("collection modes require experiment.algo = td3bc");
  fs::create_directories(dir);
  const std::string policy_path = dir + "/policy.ckpt";
  const std::string critics_path = dir + "/critics.ckpt";
  const std::string ensemble_path = dir + "/ensemble.ckpt";
  const std::string stamp_path = dir + "/stamp.txt";
  const std::string stamp = offline_stamp(cfg);

  const bool reusable = fs::exists(policy_path) && fs::exists(critics_path) &&
                        fs::exists(ensemble_path) && read_file(stamp_path) == stamp;
  if (!reusable) {
    const std::uint64_t master = static_cast<std::uint64_t>(seed);
    offline::Learner learner = offline::td3bc_train(d, cfg.offline_cfg, master);
    repr::RepresentationEnsemble ensemble = repr::RepresentationEnsemble::init(
        ensemble_config(cfg), static_cast<int>(d.transitions.front().obs.size()),
        static_cast<int>(d.transitions.front().act.size()), master);
    repr::train_ensemble(ensemble, d, cfg.repr_cfg.steps, cfg.repr_cfg.batch_size, master, 0);
    offline::save_policy(learner.policy, policy_path);
    offline::save_critics(learner.critics, critics_path);
    repr::save_ensemble(ensemble, ensemble_path);
    std::ofstream stamp_out(stamp_path);
    stamp_out << stamp;
  }
  (void)spec;
  // always reload so warm and cold starts share the exact same state
  OfflineArtifacts artifacts{learner_from_checkpoints(policy_path, critics_path, cfg.offline_cfg),
                             repr::load_ensemble(ensemble_path)};
  for (auto& opt : artifacts.ensemble.state_opt) opt.lr = cfg.repr_cfg.continuation_lr;
  for (auto& opt : artifacts.ensemble.action_opt) opt.lr = cfg.repr_cfg.continuation_lr;
  return artifacts;
}

active::ActiveLoopResult collection_run(const ExperimentConfig& cfg, const env::MazeSpec& spec,
                                        const data::Dataset& d0, OfflineArtifacts& artifacts,
                                        int seed, const eval::ReferenceScores& ref,
                                        const std::string& arm_label) {
  const std::uint64_t master = static_cast<std::uint64_t>(seed);
  const auto normalize = [&ref](double raw) { return eval::normalize(raw, ref); };
  const active::ActiveLoopConfig lc = loop_config(cfg);

  // the A+U arm is the plain active path by definition
  if (arm_label.empty() || arm_label == "A+U") {
    return active::active_loop(d0, spec, artifacts.learner, &artifacts.ensemble, lc,
                               cfg.offline_cfg, cfg.explore_cfg, master, normalize);
  }

  const baselines::AblationArm arm = baselines::AblationArm::parse(arm_label);
  const bool uses_ensemble = arm.init_mode == baselines::InitMode::active ||
                             arm.explore_mode == baselines::ExploreMode::uncertainty;
  Rng reset_rng = Rng::derive(master, "active/reset");
  Rng candidate_rng = Rng::derive(master, "active/candidates");
  Rng explore_rng = Rng::derive(master, "active/explore");

  offline::Learner& learner = artifacts.learner;
  repr::RepresentationEnsemble* ensemble = uses_ensemble ? &artifacts.ensemble : nullptr;
  const active::EpochCollector collector =
      [&, arm](const data::Dataset& current, const active::ExplorationConfig& explore_cfg,
               std::int64_t capacity, active::Budget& budget, active::CollectionLog& log,
               std::int64_t episode_id_start) {
        baselines::ArmComponents components;
        components.spec = &spec;
        components.candidate_source = &current;
        components.ensemble = ensemble;
        components.policy = &learner.policy;
        components.explore_cfg = explore_cfg;
        return baselines::ablation_arm_collect(arm, components, capacity, budget, reset_rng,
                                               candidate_rng, explore_rng, log, episode_id_start);
      };
  return active::active_loop(d0, spec, learner, ensemble, lc, cfg.offline_cfg, cfg.explore_cfg,
                             master, normalize, collector);
}

OnlineResult online_loop(const env::MazeSpec& spec, const ExperimentConfig& cfg, int seed,
                         const eval::ReferenceScores& ref) {
  const std::uint64_t master = static_cast<std::uint64_t>(seed);
  const bool active_variant = cfg.online_cfg.variant == "active";

  offline::OfflineConfig ocfg = cfg.offline_cfg;
  ocfg.alpha = 0.0;  // no behavior term without a behavior dataset

  const int obs_dim = 4, act_dim = 2;
  OnlineResult result;
  result.learner = offline::Learner::init(obs_dim, act_dim, ocfg, spec.max_force,
                                          Eigen::VectorXd::Zero(obs_dim),
                                          Eigen::VectorXd::Ones(obs_dim),
                                          derive_seed(master, "online/learner"));
  repr::RepresentationEnsemble ensemble = repr::RepresentationEnsemble::init(
      ensemble_config(cfg), obs_dim, act_dim, derive_seed(master, "online/ensemble"));

  result.dataset.layout_name = spec.layout_name;
  result.dataset.provenance = "online " + cfg.online_cfg.variant;

  Rng reset_rng = Rng::derive(master, "online/reset");
  Rng candidate_rng = Rng::derive(master, "online/candidates");
  Rng explore_rng = Rng::derive(master, "online/explore");
  Rng update_rng = Rng::derive(master, "online/updates");

  const auto evaluate_point = [&](int index, std::int64_t used) {
    Rng eval_rng = Rng::derive(master, "online/eval/" + std::to_string(index));
    const eval::EvalReport report =
        eval::evaluate(spec, result.learner.policy, cfg.eval_episodes, eval_rng);
    active::CurvePoint point;
    point.epoch = index;
    point.env_steps_used = used;
    point.mean_return = report.mean_return;
    point.normalized_score = eval::normalize(report.mean_return, ref);
    result.curve.push_back(point);
  };
  evaluate_point(0, 0);

  double threshold = 0.0;
  bool need_new_episode = true;
  env::EnvState state;
  std::int64_t episode_id = 0;
  std::int64_t used = 0;
  int eval_index = 0;
  int consecutive_restarts = 0;

  active::ExplorationConfig explore_cfg = cfg.explore_cfg;
  while (used < cfg.budget) {
    if (need_new_episode) {
      if (active_variant && !result.dataset.empty()) {
        const env::CandidateSet candidates = env::sample_candidates(
            result.dataset, cfg.explore_cfg.candidate_count, candidate_rng);
        state = env::reset_to(spec, active::select_initial_state(candidates, ensemble).state);
      } else {
        state = env::reset(spec, reset_rng);
      }
      ++episode_id;
      need_new_episode = false;
    }

    if (active_variant && threshold > 0.0 && consecutive_restarts < 100) {
      const double u =
          repr::uncertainty_state(ensemble, state.observation(), repr::Aggregator::max).value;
      if (u < threshold) {
        need_new_episode = true;
        ++consecutive_restarts;
        continue;
      }
    }
    consecutive_restarts = 0;

    Eigen::Vector2d action;
    if (active_variant) {
      explore_cfg.uncertainty_threshold = threshold;
      active::ActiveAgent agent{&ensemble, &result.learner.policy, explore_cfg};
      action = active::explore_action(state, agent, spec, explore_rng).action;
    } else {
      action = result.learner.policy.act(state.observation());
      action += 0.1 * spec.max_force * explore_rng.normal_vector(2);
      action = action.cwiseMax(-spec.max_force).cwiseMin(spec.max_force);
    }

    const env::StepResult step = env::step(spec, state, action);
    data::Transition t;
    t.obs = state.observation();
    t.act = action.cwiseMax(-spec.max_force).cwiseMin(spec.max_force);
    t.next_obs = step.next.observation();
    t.rew = step.reward;
    t.done = step.done;
    t.episode_id = episode_id;
    result.dataset.transitions.push_back(std::move(t));
    state = step.next;
    ++used;
    if (step.done) need_new_episode = true;

    if (static_cast<int>(result.dataset.size()) >= cfg.online_cfg.warmup_transitions) {
      for (int u = 0; u < cfg.online_cfg.train_updates_per_step; ++u)
        result.learner.update(result.dataset, ocfg, 0.0, update_rng);
    }
    if (active_variant && static_cast<int>(result.dataset.size()) >= 32)
      repr::train_ensemble(ensemble, result.dataset, 1, cfg.repr_cfg.batch_size, master,
                           static_cast<std::uint64_t>(used));

    if (active_variant && used % cfg.online_cfg.threshold_refresh == 0)
      threshold = active::threshold_from_dataset(ensemble, result.dataset,
                                                 cfg.explore_cfg.threshold_quantile);

    if (used % cfg.online_cfg.eval_every == 0) evaluate_point(++eval_index, used);
  }
  if (result.curve.back().env_steps_used != used) evaluate_point(++eval_index, used);
  return result;
}

namespace {

struct SeedOutput {
  std::string method;
  int seed = 0;
  std::vector<active::CurvePoint> curve;
};

void write_seed_artifacts(const std::string& dir, const active::ActiveLoopResult& result,
                          const offline::Learner& learner,
                          const repr::RepresentationEnsemble* ensemble) {
  active::save_curve_csv(result.curve, dir + "/curve.csv");
  result.log.save_steps_csv(dir + "/log_steps.csv");
  result.log.save_trajectories_csv(dir + "/log_trajs.csv");
  offline::save_policy(learner.policy, dir + "/final_policy.ckpt");
  offline::save_critics(learner.critics, dir + "/final_critics.ckpt");
  if (ensemble != nullptr) repr::save_ensemble(*ensemble, dir + "/final_ensemble.ckpt");
  data::save(result.augmented, dir + "/augmented.ds");
}

void add_checksums(RunManifest& manifest, const std::string& dir) {
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().filename() != "manifest.txt")
      files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());
  for (const auto& f : files)
    manifest.checksums.emplace_back(fs::path(f).filename().string(), file_checksum(f));
}

eval::LearningCurve to_learning_curve(const SeedOutput& out, const std::string& layout) {
  eval::LearningCurve curve;
  curve.method_label = out.method;
  curve.seed = out.seed;
  (void)layout;
  for (const auto& p : out.curve) curve.points.emplace_back(p.env_steps_used, p.normalized_score);
  return curve;
}

void write_report(const std::vector<SeedOutput>& outputs, const std::string& path) {
  // final-point statistics per method; reduction is measured against the
  // ft / I+P arm when one is present
  std::vector<std::string> methods;
  for (const auto& out : outputs)
    if (std::find(methods.begin(), methods.end(), out.method) == methods.end())
      methods.push_back(out.method);

  std::string baseline_method;
  for (const auto& m : methods)
    if (m == "ft" || m == "I+P") baseline_method = m;

  // per-method mean curves for the reduction metric
  const auto mean_curve = [&](const std::string& method) {
    eval::LearningCurve mean;
    mean.method_label = method;
    std::vector<const SeedOutput*> members;
    for (const auto& out : outputs)
      if (out.method == method) members.push_back(&out);
    if (members.empty()) return mean;
    const std::size_t n_points = members.front()->curve.size();
    for (std::size_t i = 0; i < n_points; ++i) {
      double sum = 0.0;
      bool complete = true;
      for (const auto* m : members) {
        if (i >= m->curve.size()) {
          complete = false;
          break;
        }
        sum += m->curve[i].normalized_score;
      }
      if (!complete) break;
      mean.points.emplace_back(members.front()->curve[i].env_steps_used,
                               sum / static_cast<double>(members.size()));
    }
    return mean;
  };

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "method,mean,std,normalized,reduction_pct\n";
  char buf[256];
  for (const auto& method : methods) {
    std::vector<double> final_returns, final_scores;
    for (const auto& o : outputs)
      if (o.method == method && !o.curve.empty()) {
        final_returns.push_back(o.curve.back().mean_return);
        final_scores.push_back(o.curve.back().normalized_score);
      }
    double mean = 0.0, sq = 0.0, norm = 0.0;
    for (double r : final_returns) mean += r;
    mean /= static_cast<double>(final_returns.size());
    for (double r : final_returns) sq += (r - mean) * (r - mean);
    const double stddev = std::sqrt(sq / static_cast<double>(final_returns.size()));
    for (double s : final_scores) norm += s;
    norm /= static_cast<double>(final_scores.size());

    std::string reduction = "-";
    if (!baseline_method.empty() && method != baseline_method) {
      const auto active_mean = mean_curve(method);
      const auto baseline_mean = mean_curve(baseline_method);
      if (!active_mean.points.empty() && !baseline_mean.points.empty()) {
        const auto r = eval::interaction_reduction(active_mean, baseline_mean);
        if (r.has_value()) {
          std::snprintf(buf, sizeof(buf), "%.1f", *r);
          reduction = buf;
        }
      }
    }
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%s\n", method.c_str(), mean, stddev,
                  norm, reduction.c_str());
    out << buf;
  }
}

}  // namespace

void run(const ExperimentConfig& cfg) {
  cfg.validate();
  const env::MazeSpec spec = env::resolve_layout(cfg.layout);
  fs::create_directories(cfg.out_dir);

  data::Dataset dataset;
  if (cfg.mode != Mode::online) dataset = data::load(cfg.dataset_path);

  const eval::ReferenceScores ref = eval::reference_scores_cached(
      spec, cfg.out_dir + "/refs_" + spec.layout_name + ".txt", 9000);

  const std::string mode_dir = cfg.out_dir + "/" + to_string(cfg.mode);
  fs::create_directories(mode_dir);

  std::vector<SeedOutput> outputs;
  for (int seed : cfg.seeds) {
    const std::string seed_dir = mode_dir + "/seed" + std::to_string(seed);
    fs::create_directories(seed_dir);

    RunManifest manifest;
    manifest.tool_version = tool_version();
    manifest.status = "running";
    manifest.started_at = now_utc();
    manifest.config_snapshot = config_entries(cfg);
    manifest.write(seed_dir + "/manifest.txt");

    try {
      switch (cfg.mode) {
        case Mode::offline: {
          if (cfg.offline_algo == "bc") {
            const offline::DeterministicPolicy policy =
                offline::bc_train(dataset, cfg.offline_cfg, static_cast<std::uint64_t>(seed));
            offline::save_policy(policy, seed_dir + "/policy.ckpt");
            Rng eval_rng = Rng::derive(static_cast<std::uint64_t>(seed), "offline/eval");
            const eval::EvalReport report = eval::evaluate(spec, policy, cfg.eval_episodes, eval_rng);
            std::ofstream out(seed_dir + "/eval.txt");
            out << "mean_return " << report.mean_return << "\n"
                << "std_return " << report.std_return << "\n"
                << "normalized " << eval::normalize(report.mean_return, ref) << "\n";
          } else {
            OfflineArtifacts artifacts = prepare_offline(cfg, dataset, spec, seed, seed_dir);
            Rng eval_rng = Rng::derive(static_cast<std::uint64_t>(seed), "offline/eval");
            const eval::EvalReport report =
                eval::evaluate(spec, artifacts.learner.policy, cfg.eval_episodes, eval_rng);
            std::ofstream out(seed_dir + "/eval.txt");
            out << "mean_return " << report.mean_return << "\n"
                << "std_return " << report.std_return << "\n"
                << "normalized " << eval::normalize(report.mean_return, ref) << "\n";
          }
          break;
        }
        case Mode::ft:
        case Mode::active: {
          OfflineArtifacts artifacts = prepare_offline(
              cfg, dataset, spec, seed, cfg.out_dir + "/offline/seed" + std::to_string(seed));
          active::ActiveLoopResult result;
          if (cfg.mode == Mode::active) {
            result = collection_run(cfg, spec, dataset, artifacts, seed, ref, "");
            write_seed_artifacts(seed_dir, result, artifacts.learner, &artifacts.ensemble);
          } else {
            Rng reset_rng = Rng::derive(static_cast<std::uint64_t>(seed), "active/reset");
            Rng noise_rng = Rng::derive(static_cast<std::uint64_t>(seed), "active/explore");
            offline::Learner& learner = artifacts.learner;
            const active::EpochCollector collector =
                [&](const data::Dataset&, const active::ExplorationConfig&, std::int64_t capacity,
                    active::Budget& budget, active::CollectionLog& log,
                    std::int64_t episode_id_start) {
                  return baselines::ft_collect(spec, learner.policy, budget, reset_rng, noise_rng,
                                               log, 0.1, capacity, episode_id_start);
                };
            result = active::active_loop(dataset, spec, learner, nullptr, loop_config(cfg),
                                         cfg.offline_cfg, cfg.explore_cfg,
                                         static_cast<std::uint64_t>(seed),
                                         [&ref](double raw) { return eval::normalize(raw, ref); },
                                         collector);
            write_seed_artifacts(seed_dir, result, learner, nullptr);
          }
          outputs.push_back({to_string(cfg.mode), seed, result.curve});
          break;
        }
        case Mode::active_restricted: {
          OfflineArtifacts artifacts = prepare_offline(
              cfg, dataset, spec, seed, cfg.out_dir + "/offline/seed" + std::to_string(seed));
          const std::uint64_t master = static_cast<std::uint64_t>(seed);

          Rng graph_rng = Rng::derive(master, "restricted/graph");
          const restricted::StateGraph graph = restricted::build_state_graph(
              dataset, cfg.restricted_cfg.max_nodes, cfg.restricted_cfg.edge_threshold, graph_rng);
          Rng louvain_rng = Rng::derive(master, "restricted/louvain");
          const restricted::Clustering clustering = restricted::louvain(graph, louvain_rng);
          restricted::save_clustering_csv(graph, clustering, seed_dir + "/clustering.csv");

          const data::Dataset relabeled =
              restricted::relabel_subtrajectories(dataset, cfg.restricted_cfg.goal_window);
          offline::OfflineConfig goal_cfg = cfg.offline_cfg;
          goal_cfg.steps = cfg.restricted_cfg.goal_policy_steps;
          const restricted::GoalPolicy goal_policy = restricted::train_goal_policy(
              relabeled, goal_cfg, derive_seed(master, "restricted/goal_policy"));
          restricted::save_goal_policy(goal_policy, seed_dir + "/goal_policy.ckpt");

          restricted::TwoStageConfig ts_cfg;
          ts_cfg.switch_radius = cfg.restricted_cfg.switch_radius;
          ts_cfg.stage1_step_cap = cfg.restricted_cfg.stage1_step_cap;

          Rng reset_rng = Rng::derive(master, "active/reset");
          Rng candidate_rng = Rng::derive(master, "active/candidates");
          Rng explore_rng = Rng::derive(master, "active/explore");
          offline::Learner& learner = artifacts.learner;
          repr::RepresentationEnsemble& ensemble = artifacts.ensemble;
          const active::EpochCollector collector =
              [&](const data::Dataset& current, const active::ExplorationConfig& explore_cfg,
                  std::int64_t capacity, active::Budget& budget, active::CollectionLog& log,
                  std::int64_t episode_id_start) {
                active::ActiveAgent agent{&ensemble, &learner.policy, explore_cfg};
                return restricted::two_stage_collect(spec, current, agent, goal_policy, graph,
                                                     clustering, ts_cfg, capacity, budget,
                                                     reset_rng, candidate_rng, explore_rng, log,
                                                     episode_id_start);
              };
          active::ActiveLoopResult result = active::active_loop(
              dataset, spec, learner, &ensemble, loop_config(cfg), cfg.offline_cfg,
              cfg.explore_cfg, master, [&ref](double raw) { return eval::normalize(raw, ref); },
              collector);
          write_seed_artifacts(seed_dir, result, learner, &ensemble);
          outputs.push_back({to_string(cfg.mode), seed, result.curve});
          break;
        }
        case Mode::online: {
          OnlineResult result = online_loop(spec, cfg, seed, ref);
          active::save_curve_csv(result.curve, seed_dir + "/curve.csv");
          offline::save_policy(result.learner.policy, seed_dir + "/final_policy.ckpt");
          data::save(result.dataset, seed_dir + "/collected.ds");
          outputs.push_back({"online-" + cfg.online_cfg.variant, seed, result.curve});
          break;
        }
        case Mode::ablate: {
          for (const std::string& arm : split_arms(cfg.arms)) {
            OfflineArtifacts artifacts = prepare_offline(
                cfg, dataset, spec, seed, cfg.out_dir + "/offline/seed" + std::to_string(seed));
            const std::string arm_dir = seed_dir + "/" + arm;
            fs::create_directories(arm_dir);
            active::ActiveLoopResult result =
                collection_run(cfg, spec, dataset, artifacts, seed, ref, arm);
            active::save_curve_csv(result.curve, arm_dir + "/curve.csv");
            result.log.save_trajectories_csv(arm_dir + "/log_trajs.csv");
            offline::save_policy(artifacts.learner.policy, arm_dir + "/final_policy.ckpt");
            outputs.push_back({arm, seed, result.curve});
          }
          break;
        }
      }
      manifest.status = "ok";
    } catch (...) {
      manifest.status = "failed";
      manifest.finished_at = now_utc();
      manifest.write(seed_dir + "/manifest.txt");
      throw;
    }
    manifest.finished_at = now_utc();
    add_checksums(manifest, seed_dir);
    manifest.write(seed_dir + "/manifest.txt");
  }

  // aggregated outputs across seeds
  if (!outputs.empty() && cfg.mode != Mode::offline) {
    std::vector<eval::LearningCurve> curves;
    for (const auto& out : outputs) curves.push_back(to_learning_curve(out, cfg.layout));
    eval::save_curves_csv(curves, mode_dir + "/curves.csv");
    eval::emit_plots(curves, mode_dir + "/plot_" + spec.layout_name + ".svg",
                     mode_dir + "/bands.csv", to_string(cfg.mode) + " on " + spec.layout_name);
    write_report(outputs, mode_dir + "/report.csv");
  }
}

}  // namespace aorl::cli
