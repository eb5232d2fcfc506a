#include <doctest.h>

#include <cmath>

#include "aorl/baselines.hpp"
#include "aorl/planner.hpp"

using namespace aorl;

namespace {

struct Rig {
  env::MazeSpec spec = env::builtin_layout("open");
  data::Dataset dataset;
  repr::RepresentationEnsemble ensemble;
  offline::Learner learner;

  explicit Rig(std::uint64_t seed) {
    Rng data_rng = Rng::derive(seed, "rig/data");
    dataset = data::collect_behavior_dataset(
        spec,
        [](const env::MazeSpec& s, const env::EnvState& st, Rng& r) {
          const planner::WaypointPlanner p(s, s.goal);
          return Eigen::Vector2d(p.act(st) + 0.2 * r.normal_vector(2));
        },
        300, data_rng);
    ensemble = repr::RepresentationEnsemble::init(repr::EnsembleConfig{3, 1.0, 8, 16, 1e-3}, 4, 2,
                                                  seed);
    repr::train_ensemble(ensemble, dataset, 100, 32, seed);
    offline::OfflineConfig cfg;
    cfg.hidden_dim = 16;
    cfg.batch_size = 32;
    cfg.steps = 100;
    learner = offline::td3bc_train(dataset, cfg, seed);
  }
};

}  // namespace

TEST_CASE("arm labels parse and print") {
  for (const std::string label : {"I+R", "I+P", "I+U", "A+R", "A+P", "A+U"}) {
    const baselines::AblationArm arm = baselines::AblationArm::parse(label);
    CHECK(arm.label() == label);
  }
  CHECK_THROWS(baselines::AblationArm::parse("B+Q"));
  CHECK_THROWS(baselines::AblationArm::parse("AU"));
}

TEST_CASE("ft_collect with zero budget returns nothing") {
  Rig rig(1);
  active::Budget budget = active::Budget::of(0);
  active::CollectionLog log;
  Rng r1(1), r2(2);
  const auto buffer = baselines::ft_collect(rig.spec, rig.learner.policy, budget, r1, r2, log);
  CHECK(buffer.empty());
}

TEST_CASE("ft_collect spends exactly the budget and chains episodes") {
  Rig rig(2);
  active::Budget budget = active::Budget::of(137);
  active::CollectionLog log;
  Rng r1(3), r2(4);
  const auto buffer = baselines::ft_collect(rig.spec, rig.learner.policy, budget, r1, r2, log);
  CHECK(buffer.size() == 137);
  CHECK(budget.remaining == 0);
  std::int64_t total = 0;
  for (const auto& t : log.trajectories) total += t.length;
  CHECK(total == 137);
}

TEST_CASE("ft_collect with zero noise ignores the action-noise stream") {
  Rig rig(3);
  const auto run = [&](std::uint64_t action_seed) {
    active::Budget budget = active::Budget::of(50);
    active::CollectionLog log;
    Rng reset(7), action(action_seed);
    return baselines::ft_collect(rig.spec, rig.learner.policy, budget, reset, action, log, 0.0);
  };
  const auto a = run(100);
  const auto b = run(200);  // different noise seed, same rollouts
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].obs == b[i].obs);
    CHECK(a[i].act == b[i].act);
  }
}

TEST_CASE("the I+P arm coincides with ft_collect") {
  Rig rig(4);
  const auto via_ft = [&] {
    active::Budget budget = active::Budget::of(80);
    active::CollectionLog log;
    Rng reset(11), action(12);
    return baselines::ft_collect(rig.spec, rig.learner.policy, budget, reset, action, log, 0.1,
                                 80, 0);
  }();
  const auto via_arm = [&] {
    active::Budget budget = active::Budget::of(80);
    active::CollectionLog log;
    Rng reset(11), candidates(99), action(12);
    baselines::ArmComponents components;
    components.spec = &rig.spec;
    components.policy = &rig.learner.policy;
    components.policy_noise_sigma = 0.1;
    return baselines::ablation_arm_collect(baselines::AblationArm::parse("I+P"), components, 80,
                                           budget, reset, candidates, action, log, 0);
  }();
  REQUIRE(via_ft.size() == via_arm.size());
  for (std::size_t i = 0; i < via_ft.size(); ++i) {
    CHECK(via_ft[i].obs == via_arm[i].obs);
    CHECK(via_ft[i].act == via_arm[i].act);
    CHECK(via_ft[i].rew == via_arm[i].rew);
  }
}

TEST_CASE("the A+U arm routes through the active module byte for byte") {
  Rig rig(5);
  active::ExplorationConfig explore;
  explore.epsilon = 0.5;
  explore.n_action_samples = 4;
  explore.uncertainty_threshold = 1e-9;
  explore.candidate_count = 8;

  const auto via_active = [&] {
    active::Budget budget = active::Budget::of(60);
    active::CollectionLog log;
    Rng candidates(21), action(22);
    active::ActiveAgent agent{&rig.ensemble, &rig.learner.policy, explore};
    return active::collect_buffer(rig.spec, rig.dataset, agent, 60, budget, candidates, action,
                                  log, 0);
  }();
  const auto via_arm = [&] {
    active::Budget budget = active::Budget::of(60);
    active::CollectionLog log;
    Rng reset(99), candidates(21), action(22);
    baselines::ArmComponents components;
    components.spec = &rig.spec;
    components.candidate_source = &rig.dataset;
    components.ensemble = &rig.ensemble;
    components.policy = &rig.learner.policy;
    components.explore_cfg = explore;
    return baselines::ablation_arm_collect(baselines::AblationArm::parse("A+U"), components, 60,
                                           budget, reset, candidates, action, log, 0);
  }();
  REQUIRE(via_active.size() == via_arm.size());
  for (std::size_t i = 0; i < via_active.size(); ++i) {
    CHECK(via_active[i].obs == via_arm[i].obs);
    CHECK(via_active[i].act == via_arm[i].act);
    CHECK(via_active[i].next_obs == via_arm[i].next_obs);
    CHECK(via_active[i].episode_id == via_arm[i].episode_id);
  }
}

TEST_CASE("the I+R arm draws uniform actions over the box") {
  Rig rig(6);
  baselines::ArmComponents components;
  components.spec = &rig.spec;
  components.policy = &rig.learner.policy;
  active::Budget budget = active::Budget::of(10000);
  active::CollectionLog log;
  Rng reset(31), candidates(32), action(33);
  const auto buffer =
      baselines::ablation_arm_collect(baselines::AblationArm::parse("I+R"), components, 10000,
                                      budget, reset, candidates, action, log, 0);
  REQUIRE(buffer.size() == 10000);
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& t : buffer) mean += Eigen::Vector2d(t.act);
  mean /= static_cast<double>(buffer.size());
  // uniform on [-F,F]: sigma_mean = F*sqrt(1/3/n); allow 3 sigma
  const double bound = 3.0 * rig.spec.max_force * std::sqrt(1.0 / 3.0 / 10000.0);
  CHECK(std::abs(mean.x()) < bound);
  CHECK(std::abs(mean.y()) < bound);
}

TEST_CASE("every arm consumes exactly its budget") {
  Rig rig(7);
  for (const std::string label : {"I+R", "I+P", "I+U", "A+R", "A+P", "A+U"}) {
    baselines::ArmComponents components;
    components.spec = &rig.spec;
    components.candidate_source = &rig.dataset;
    components.ensemble = &rig.ensemble;
    components.policy = &rig.learner.policy;
    components.explore_cfg.epsilon = 0.5;
    components.explore_cfg.n_action_samples = 4;
    components.explore_cfg.uncertainty_threshold = 1e-12;
    components.explore_cfg.candidate_count = 8;
    active::Budget budget = active::Budget::of(73);
    active::CollectionLog log;
    Rng reset(41), candidates(42), action(43);
    const auto buffer =
        baselines::ablation_arm_collect(baselines::AblationArm::parse(label), components, 73,
                                        budget, reset, candidates, action, log, 0);
    CHECK(buffer.size() == 73);
    CHECK(budget.remaining == 0);
  }
}

TEST_CASE("distilling one net or identical seeds gives zero disagreement") {
  Rig rig(8);
  const baselines::DistilledEnsemble one =
      baselines::distill_policy(rig.learner.policy, rig.dataset, 1, 8, 50, 32, 5);
  Rng probe(9);
  for (int i = 0; i < 10; ++i)
    CHECK(one.disagreement(probe.normal_vector(4)) == 0.0);

  baselines::DistilledEnsemble twins = one;
  twins.nets.push_back(twins.nets[0]);
  for (int i = 0; i < 10; ++i)
    CHECK(twins.disagreement(probe.normal_vector(4)) == 0.0);
}

TEST_CASE("distilled nets disagree more where the data was missing") {
  const env::MazeSpec spec = env::builtin_layout("open");
  // left-half dataset with a simple position-dependent action pattern
  data::Dataset d;
  Rng rng(10);
  for (int i = 0; i < 500; ++i) {
    data::Transition t;
    const double x = rng.uniform(1.0, 3.0);
    const double y = rng.uniform(1.0, 4.0);
    t.obs = Eigen::Vector4d(x, y, 0.0, 0.0);
    t.act = Eigen::Vector2d(std::tanh(x - 2.0), std::tanh(y - 2.5));
    t.next_obs = t.obs;
    t.episode_id = i;
    d.transitions.push_back(t);
  }
  offline::OfflineConfig cfg;
  cfg.hidden_dim = 24;
  cfg.batch_size = 64;
  cfg.steps = 1500;
  const offline::DeterministicPolicy policy = offline::bc_train(d, cfg, 11);
  const baselines::DistilledEnsemble distilled =
      baselines::distill_policy(policy, d, 4, 8, 1500, 64, 12);

  Rng probe(13);
  double covered = 0.0, uncovered = 0.0;
  for (int i = 0; i < 200; ++i) {
    covered += distilled.disagreement(
        Eigen::Vector4d(probe.uniform(1.0, 3.0), probe.uniform(1.0, 4.0), 0.0, 0.0));
    uncovered += distilled.disagreement(
        Eigen::Vector4d(probe.uniform(4.5, 6.0), probe.uniform(1.0, 4.0), 0.0, 0.0));
  }
  CHECK(uncovered > covered);
}

TEST_CASE("rnd_collect respects budget, reproduces, and collapses at epsilon zero") {
  Rig rig(14);
  const baselines::DistilledEnsemble distilled =
      baselines::distill_policy(rig.learner.policy, rig.dataset, 3, 8, 100, 32, 15);

  baselines::RndConfig cfg;
  cfg.epsilon = 0.5;
  cfg.n_action_samples = 4;

  const auto run = [&](std::uint64_t seed) {
    active::Budget budget = active::Budget::of(90);
    active::CollectionLog log;
    Rng reset(seed), action(seed + 1);
    return baselines::rnd_collect(rig.spec, rig.learner.policy, distilled, cfg, budget, reset,
                                  action, log);
  };
  const auto a = run(50);
  const auto b = run(50);
  CHECK(a.size() == 90);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].act == b[i].act);

  // epsilon zero: pure policy rollout, the distilled ensemble is never asked
  baselines::RndConfig greedy = cfg;
  greedy.epsilon = 0.0;
  active::Budget budget = active::Budget::of(40);
  active::CollectionLog log;
  Rng reset(60), action(61);
  const auto pure = baselines::rnd_collect(rig.spec, rig.learner.policy, distilled, greedy,
                                           budget, reset, action, log);
  for (const auto& t : pure) {
    const Eigen::Vector2d expected = rig.learner.policy.act(t.obs);
    CHECK(Eigen::Vector2d(t.act) == expected);
  }
}
