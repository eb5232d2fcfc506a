// aorl: active trajectory collection for offline RL on point-mass mazes.
//
// Verbs: gen-data, prune, subsample, train-offline, train-repr,
// active-collect [--restricted], finetune, evaluate, ablate, online, plot,
// run. Exit codes: 0 success, 1 configuration error, 2 runtime failure.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>

#include <CLI11.hpp>

#include "aorl/baselines.hpp"
#include "aorl/config.hpp"
#include "aorl/planner.hpp"
#include "aorl/runner.hpp"

namespace fs = std::filesystem;
using namespace aorl;

namespace {

std::string default_out_root() {
  const char* env = std::getenv("AORL_OUT");
  return env != nullptr && *env != '\0' ? env : "runs";
}

data::BehaviorPolicy planner_policy(double noise_sigma) {
  auto wander = std::make_shared<planner::WanderPolicy>(noise_sigma);
  return [wander](const env::MazeSpec& spec, const env::EnvState& state, Rng& rng) {
    return (*wander)(spec, state, rng);
  };
}

cli::ExperimentConfig load_config(const std::string& config_path,
                                  const std::vector<std::string>& overrides) {
  cli::ExperimentConfig cfg;
  if (!config_path.empty()) cfg = cli::parse_config(config_path);
  for (const auto& assignment : overrides) cli::apply_override(cfg, assignment);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"active data collection for offline RL on point-mass mazes"};
  app.require_subcommand(1);

  // ---- gen-data ----
  auto* gen = app.add_subcommand("gen-data", "roll the waypoint behavior policy into a dataset");
  std::string gen_layout = "large", gen_out = "dataset.ds";
  int gen_n = 30000;
  std::uint64_t gen_seed = 0;
  double gen_noise = 0.2;
  gen->add_option("--layout", gen_layout, "built-in layout name or layout file");
  gen->add_option("--n", gen_n, "number of transitions");
  gen->add_option("--seed", gen_seed, "master seed");
  gen->add_option("--noise", gen_noise, "behavior action noise sigma");
  gen->add_option("--out", gen_out, "output dataset path")->required();

  // ---- prune ----
  auto* prune = app.add_subcommand("prune", "remove transitions near a point (default: the goal)");
  std::string prune_in, prune_out;
  double prune_radius = 2.0;
  std::vector<double> prune_center;
  prune->add_option("--in", prune_in, "input dataset")->required();
  prune->add_option("--radius", prune_radius, "prune radius in cells");
  prune->add_option("--center", prune_center, "override center (x y)")->expected(2);
  prune->add_option("--out", prune_out, "output dataset path")->required();

  // ---- subsample ----
  auto* sub = app.add_subcommand("subsample", "keep a random fraction of whole trajectories");
  std::string sub_in, sub_out;
  double sub_fraction = 0.3;
  std::uint64_t sub_seed = 0;
  sub->add_option("--in", sub_in, "input dataset")->required();
  sub->add_option("--fraction", sub_fraction, "fraction of trajectories to keep");
  sub->add_option("--seed", sub_seed, "seed");
  sub->add_option("--out", sub_out, "output dataset path")->required();

  // ---- train-offline ----
  auto* offline_cmd = app.add_subcommand("train-offline", "behavior cloning or TD3+BC");
  std::string off_algo = "td3bc", off_data, off_dir = default_out_root() + "/offline";
  double off_alpha = 2.5;
  int off_steps = 20000;
  int off_seed = 0;
  offline_cmd->add_option("--algo", off_algo, "bc or td3bc")
      ->check(CLI::IsMember({"bc", "td3bc"}));
  offline_cmd->add_option("--data", off_data, "dataset path")->required();
  offline_cmd->add_option("--alpha", off_alpha, "behavior-cloning weight");
  offline_cmd->add_option("--steps", off_steps, "gradient updates");
  offline_cmd->add_option("--seed", off_seed, "seed");
  offline_cmd->add_option("--out-dir", off_dir, "checkpoint directory");

  // ---- train-repr ----
  auto* repr_cmd = app.add_subcommand("train-repr", "contrastive representation ensemble");
  std::string repr_data, repr_out = "ensemble.ckpt", repr_agg = "max";
  int repr_k = 5, repr_steps = 12000;
  double repr_lambda = 1.0;
  int repr_seed = 0;
  repr_cmd->add_option("--data", repr_data, "dataset path")->required();
  repr_cmd->add_option("--k", repr_k, "ensemble size");
  repr_cmd->add_option("--lambda", repr_lambda, "transition-term weight");
  repr_cmd->add_option("--steps", repr_steps, "gradient updates per member");
  repr_cmd->add_option("--seed", repr_seed, "seed");
  repr_cmd->add_option("--aggregator", repr_agg, "metadata aggregator: max|mean|min|var");
  repr_cmd->add_option("--out", repr_out, "ensemble checkpoint path");

  // ---- config-driven pipeline verbs ----
  std::string config_path;
  std::vector<std::string> overrides;
  const auto add_config_options = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "configuration file");
    cmd->add_option("--set", overrides, "override, e.g. --set experiment.budget=20000");
  };

  auto* collect = app.add_subcommand("active-collect", "the collect-retrain loop");
  bool collect_restricted = false;
  std::string c_data, c_layout, c_out;
  std::string c_seeds, c_aggregator;
  std::int64_t c_budget = -1;
  int c_epoch_x = -1, c_epoch_y = -1, c_m_samples = -1, c_max_nodes = -1;
  double c_epsilon = -1.0, c_noise_scale = -1.0, c_quantile = -1.0, c_edge_threshold = -1.0,
         c_switch_radius = -1.0;
  add_config_options(collect);
  collect->add_flag("--restricted", collect_restricted, "two-stage collection from fixed starts");
  collect->add_option("--data", c_data, "dataset path");
  collect->add_option("--layout", c_layout, "layout name or file");
  collect->add_option("--out-dir", c_out, "output root");
  collect->add_option("--seeds", c_seeds, "comma-separated seeds");
  collect->add_option("--budget", c_budget, "interaction budget");
  collect->add_option("--epoch-x", c_epoch_x, "transitions per epoch");
  collect->add_option("--epoch-y", c_epoch_y, "gradient updates per epoch");
  collect->add_option("--epsilon", c_epsilon, "exploration probability");
  collect->add_option("--noise-scale", c_noise_scale, "action perturbation scale");
  collect->add_option("--m-samples", c_m_samples, "candidate actions per step");
  collect->add_option("--threshold-quantile", c_quantile, "termination threshold quantile");
  collect->add_option("--aggregator", c_aggregator, "max|mean|min|var");
  collect->add_option("--max-nodes", c_max_nodes, "graph nodes (restricted)");
  collect->add_option("--edge-threshold", c_edge_threshold, "graph edge cutoff (restricted)");
  collect->add_option("--switch-radius", c_switch_radius, "stage switch radius (restricted)");

  auto* finetune = app.add_subcommand("finetune", "fine-tune on collected data (ft baseline)");
  add_config_options(finetune);
  std::string f_data, f_layout, f_out, f_seeds;
  std::int64_t f_budget = -1;
  finetune->add_option("--data", f_data, "dataset path");
  finetune->add_option("--layout", f_layout, "layout name or file");
  finetune->add_option("--out-dir", f_out, "output root");
  finetune->add_option("--seeds", f_seeds, "comma-separated seeds");
  finetune->add_option("--budget", f_budget, "interaction budget");

  auto* evaluate_cmd = app.add_subcommand("evaluate", "roll out a policy checkpoint");
  std::string e_layout = "large", e_policy, e_refs;
  int e_episodes = 20;
  int e_seed = 0;
  evaluate_cmd->add_option("--layout", e_layout, "layout name or file");
  evaluate_cmd->add_option("--policy", e_policy, "policy checkpoint")->required();
  evaluate_cmd->add_option("--episodes", e_episodes, "evaluation episodes");
  evaluate_cmd->add_option("--seed", e_seed, "seed");
  evaluate_cmd->add_option("--refs", e_refs, "reference-score cache file");

  auto* ablate = app.add_subcommand("ablate", "run the init/exploration ablation grid");
  add_config_options(ablate);
  std::string a_data, a_layout, a_out, a_seeds, a_arms;
  ablate->add_option("--data", a_data, "dataset path");
  ablate->add_option("--layout", a_layout, "layout name or file");
  ablate->add_option("--out-dir", a_out, "output root");
  ablate->add_option("--seeds", a_seeds, "comma-separated seeds");
  ablate->add_option("--arms", a_arms, "e.g. I+R,I+P,I+U,A+R,A+P,A+U");

  auto* online = app.add_subcommand("online", "learn from scratch with zero offline data");
  add_config_options(online);
  std::string o_layout, o_out, o_seeds, o_variant;
  std::int64_t o_budget = -1;
  online->add_option("--layout", o_layout, "layout name or file");
  online->add_option("--out-dir", o_out, "output root");
  online->add_option("--seeds", o_seeds, "comma-separated seeds");
  online->add_option("--budget", o_budget, "interaction budget");
  online->add_option("--variant", o_variant, "active or baseline");

  auto* plot = app.add_subcommand("plot", "aggregate curve CSVs into an SVG");
  std::vector<std::string> plot_inputs;
  std::string plot_out = "plot.svg", plot_csv = "bands.csv", plot_title;
  plot->add_option("--curves", plot_inputs, "curves.csv files")->required();
  plot->add_option("--out", plot_out, "output SVG path");
  plot->add_option("--bands", plot_csv, "aggregated CSV path");
  plot->add_option("--title", plot_title, "plot title");

  auto* run_cmd = app.add_subcommand("run", "execute a full configured pipeline");
  add_config_options(run_cmd);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const env::MazeSpec spec = env::resolve_layout(gen_layout);
      Rng rng = Rng::derive(gen_seed, "gen-data");
      const data::Dataset d =
          data::collect_behavior_dataset(spec, planner_policy(gen_noise), gen_n, rng);
      data::save(d, gen_out);
      std::cout << "wrote " << d.size() << " transitions to " << gen_out << "\n";
      return 0;
    }
    if (prune->parsed()) {
      data::Dataset d = data::load(prune_in);
      Eigen::Vector2d center;
      if (prune_center.size() == 2) {
        center = {prune_center[0], prune_center[1]};
      } else {
        center = env::resolve_layout(d.layout_name).goal;
      }
      const data::Dataset out = data::prune_near_goal(d, center, prune_radius);
      data::save(out, prune_out);
      std::cout << "kept " << out.size() << " of " << d.size() << " transitions\n";
      return 0;
    }
    if (sub->parsed()) {
      data::Dataset d = data::load(sub_in);
      Rng rng = Rng::derive(sub_seed, "subsample");
      const data::Dataset out = data::subsample_trajectories(d, sub_fraction, rng);
      data::save(out, sub_out);
      std::cout << "kept " << out.size() << " of " << d.size() << " transitions\n";
      return 0;
    }
    if (offline_cmd->parsed()) {
      const data::Dataset d = data::load(off_data);
      fs::create_directories(off_dir);
      offline::OfflineConfig ocfg;
      ocfg.alpha = off_alpha;
      ocfg.steps = off_steps;
      if (off_algo == "bc") {
        const offline::DeterministicPolicy policy =
            offline::bc_train(d, ocfg, static_cast<std::uint64_t>(off_seed));
        offline::save_policy(policy, off_dir + "/policy.ckpt");
        std::cout << "wrote " << off_dir << "/policy.ckpt\n";
      } else {
        const offline::Learner learner =
            offline::td3bc_train(d, ocfg, static_cast<std::uint64_t>(off_seed));
        offline::save_policy(learner.policy, off_dir + "/policy.ckpt");
        offline::save_critics(learner.critics, off_dir + "/critics.ckpt");
        std::cout << "wrote " << off_dir << "/policy.ckpt and critics.ckpt\n";
      }
      return 0;
    }
    if (repr_cmd->parsed()) {
      const data::Dataset d = data::load(repr_data);
      repr::EnsembleConfig ec;
      ec.count = repr_k;
      ec.lambda = repr_lambda;
      repr::RepresentationEnsemble ensemble = repr::RepresentationEnsemble::init(
          ec, static_cast<int>(d.transitions.front().obs.size()),
          static_cast<int>(d.transitions.front().act.size()),
          static_cast<std::uint64_t>(repr_seed));
      ensemble.default_aggregator = repr::aggregator_from_string(repr_agg);
      repr::train_ensemble(ensemble, d, repr_steps, 256, static_cast<std::uint64_t>(repr_seed));
      repr::save_ensemble(ensemble, repr_out);
      std::cout << "wrote " << repr_out << "\n";
      return 0;
    }
    if (evaluate_cmd->parsed()) {
      const env::MazeSpec spec = env::resolve_layout(e_layout);
      const offline::DeterministicPolicy policy = offline::load_policy(e_policy);
      Rng rng = Rng::derive(static_cast<std::uint64_t>(e_seed), "evaluate");
      const eval::EvalReport report = eval::evaluate(spec, policy, e_episodes, rng);
      std::cout << "mean_return " << report.mean_return << "\n";
      std::cout << "std_return " << report.std_return << "\n";
      if (!e_refs.empty()) {
        const eval::ReferenceScores ref = eval::reference_scores_cached(spec, e_refs, 9000);
        std::cout << "normalized " << eval::normalize(report.mean_return, ref) << "\n";
      }
      return 0;
    }
    if (plot->parsed()) {
      std::vector<eval::LearningCurve> curves;
      for (const auto& path : plot_inputs)
        for (auto& c : eval::load_curves_csv(path)) curves.push_back(std::move(c));
      eval::emit_plots(curves, plot_out, plot_csv, plot_title);
      std::cout << "wrote " << plot_out << " and " << plot_csv << "\n";
      return 0;
    }

    // pipeline verbs share the config machinery
    cli::ExperimentConfig cfg = load_config(config_path, overrides);
    if (cfg.out_dir == "runs/out") cfg.out_dir = default_out_root() + "/out";

    const auto set_if = [&cfg](const std::string& key, const std::string& value) {
      if (!value.empty()) cli::apply_override(cfg, key + "=" + value);
    };
    if (collect->parsed()) {
      cfg.mode = collect_restricted ? cli::Mode::active_restricted : cli::Mode::active;
      set_if("experiment.dataset", c_data);
      set_if("experiment.layout", c_layout);
      set_if("experiment.out_dir", c_out);
      set_if("experiment.seeds", c_seeds);
      if (c_budget >= 0) cfg.budget = c_budget;
      if (c_epoch_x >= 0) cfg.epoch_x = c_epoch_x;
      if (c_epoch_y >= 0) cfg.epoch_y = c_epoch_y;
      if (c_epsilon >= 0.0) cfg.explore_cfg.epsilon = c_epsilon;
      if (c_noise_scale >= 0.0) cfg.explore_cfg.noise_scale = c_noise_scale;
      if (c_m_samples >= 0) cfg.explore_cfg.n_action_samples = c_m_samples;
      if (c_quantile >= 0.0) cfg.explore_cfg.threshold_quantile = c_quantile;
      if (!c_aggregator.empty())
        cfg.explore_cfg.aggregator = repr::aggregator_from_string(c_aggregator);
      if (c_max_nodes >= 0) cfg.restricted_cfg.max_nodes = c_max_nodes;
      if (c_edge_threshold >= 0.0) cfg.restricted_cfg.edge_threshold = c_edge_threshold;
      if (c_switch_radius >= 0.0) cfg.restricted_cfg.switch_radius = c_switch_radius;
    } else if (finetune->parsed()) {
      cfg.mode = cli::Mode::ft;
      set_if("experiment.dataset", f_data);
      set_if("experiment.layout", f_layout);
      set_if("experiment.out_dir", f_out);
      set_if("experiment.seeds", f_seeds);
      if (f_budget >= 0) cfg.budget = f_budget;
    } else if (ablate->parsed()) {
      cfg.mode = cli::Mode::ablate;
      set_if("experiment.dataset", a_data);
      set_if("experiment.layout", a_layout);
      set_if("experiment.out_dir", a_out);
      set_if("experiment.seeds", a_seeds);
      set_if("experiment.arms", a_arms);
    } else if (online->parsed()) {
      cfg.mode = cli::Mode::online;
      set_if("experiment.layout", o_layout);
      set_if("experiment.out_dir", o_out);
      set_if("experiment.seeds", o_seeds);
      set_if("online.variant", o_variant);
      if (o_budget >= 0) cfg.budget = o_budget;
    }
    // run_cmd: mode comes from the config file

    cli::run(cfg);
    return 0;
  } catch (const cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
