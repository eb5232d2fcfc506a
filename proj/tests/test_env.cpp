#include <doctest.h>

#include <cmath>

#include "aorl/data.hpp"
#include "aorl/env.hpp"
#include "aorl/planner.hpp"

using namespace aorl;

namespace {

env::MazeSpec open_room() {
  // 5x5 free interior with a wall ring
  return env::parse_layout(
      "#######\n"
      "#.....#\n"
      "#.....#\n"
      "#..G..#\n"
      "#.....#\n"
      "#######\n",
      "room");
}

}  // namespace

TEST_CASE("zero action and zero velocity is a fixed point") {
  const env::MazeSpec spec = open_room();
  env::EnvState s;
  s.position = {1.5, 1.5};
  const env::StepResult r = env::step(spec, s, Eigen::Vector2d::Zero());
  CHECK(r.next.position == s.position);
  CHECK(r.next.velocity == Eigen::Vector2d::Zero());
  CHECK(r.reward == 0.0);
  CHECK_FALSE(r.done);
}

TEST_CASE("reward is 1 inside the goal radius") {
  const env::MazeSpec spec = open_room();
  env::EnvState s;
  s.position = spec.goal;
  const env::StepResult r = env::step(spec, s, Eigen::Vector2d(0.01, 0.0));
  CHECK(r.reward == 1.0);
}

TEST_CASE("hand-checked Euler step") {
  const env::MazeSpec spec = open_room();
  env::EnvState s;
  s.position = {2.5, 2.5};
  const env::StepResult r = env::step(spec, s, Eigen::Vector2d(1.0, 0.0));
  CHECK(r.next.velocity.x() == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(r.next.velocity.y() == 0.0);
  CHECK(r.next.position.x() == doctest::Approx(2.51).epsilon(1e-15));
  CHECK(r.next.position.y() == 2.5);
}

TEST_CASE("actions are clipped to the force bounds") {
  const env::MazeSpec spec = open_room();
  env::EnvState s;
  s.position = {2.5, 2.5};
  const env::StepResult big = env::step(spec, s, Eigen::Vector2d(100.0, 0.0));
  const env::StepResult bound = env::step(spec, s, Eigen::Vector2d(spec.max_force, 0.0));
  CHECK(big.next.position == bound.next.position);
}

TEST_CASE("walls block and slide per axis") {
  const env::MazeSpec spec = open_room();
  env::EnvState s;
  s.position = {1.05, 1.5};
  s.velocity = {-1.0, 0.5};  // pushing into the left wall while moving down
  const env::StepResult r = env::step(spec, s, Eigen::Vector2d(-1.0, 0.0));
  CHECK(r.next.position.x() >= 1.0);          // clamped at the wall face
  CHECK(r.next.velocity.x() == 0.0);          // blocked axis zeroed
  CHECK(r.next.position.y() > s.position.y());  // free axis still moves
  CHECK_FALSE(spec.is_wall_at(r.next.position.x(), r.next.position.y()));
}

TEST_CASE("no rollout ever penetrates a wall") {
  const env::MazeSpec spec = env::builtin_layout("large");
  Rng rng(17);
  for (int episode = 0; episode < 20; ++episode) {
    env::EnvState s = env::reset(spec, rng);
    for (int t = 0; t < 100; ++t) {
      const Eigen::Vector2d action{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
      const env::StepResult r = env::step(spec, s, action);
      CHECK_FALSE(spec.is_wall_at(r.next.position.x(), r.next.position.y()));
      CHECK(r.next.velocity.cwiseAbs().maxCoeff() <= spec.max_speed);
      CHECK((r.reward == 0.0 || r.reward == 1.0));
      CHECK(r.reward == (((r.next.position - spec.goal).norm() <= spec.goal_radius) ? 1.0 : 0.0));
      s = r.next;
      if (r.done) break;
    }
  }
}

TEST_CASE("dynamics are bit-deterministic") {
  const env::MazeSpec spec = env::builtin_layout("medium");
  Rng rng(3);
  env::EnvState s = env::reset(spec, rng);
  s.velocity = {0.3, -0.2};
  const env::StepResult a = env::step(spec, s, Eigen::Vector2d(0.7, -0.4));
  const env::StepResult b = env::step(spec, s, Eigen::Vector2d(0.7, -0.4));
  CHECK(a.next.position == b.next.position);
  CHECK(a.next.velocity == b.next.velocity);
}

TEST_CASE("done fires exactly at the step limit") {
  env::MazeSpec spec = open_room();
  spec.max_episode_steps = 3;
  env::EnvState s;
  s.position = {1.5, 1.5};
  env::StepResult r = env::step(spec, s, Eigen::Vector2d::Zero());
  CHECK_FALSE(r.done);
  r = env::step(spec, r.next, Eigen::Vector2d::Zero());
  CHECK_FALSE(r.done);
  r = env::step(spec, r.next, Eigen::Vector2d::Zero());
  CHECK(r.done);
}

TEST_CASE("reset is deterministic under a fixed seed and always lands in free space") {
  const env::MazeSpec spec = env::builtin_layout("large");
  Rng a(5), b(5);
  const env::EnvState sa = env::reset(spec, a);
  const env::EnvState sb = env::reset(spec, b);
  CHECK(sa.position == sb.position);
  Rng rng(6);
  for (int i = 0; i < 1000; ++i) {
    const env::EnvState s = env::reset(spec, rng);
    CHECK_FALSE(spec.is_wall_at(s.position.x(), s.position.y()));
    CHECK(s.velocity == Eigen::Vector2d::Zero());
    CHECK(s.step_index == 0);
  }
}

TEST_CASE("single-free-cell maze resets into that cell") {
  const env::MazeSpec spec = env::parse_layout("###\n#G#\n###\n", "cell");
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const env::EnvState s = env::reset(spec, rng);
    CHECK(s.position.x() >= 1.0);
    CHECK(s.position.x() < 2.0);
    CHECK(s.position.y() >= 1.0);
    CHECK(s.position.y() < 2.0);
  }
}

TEST_CASE("reset_to restores the state with step_index zero") {
  const env::MazeSpec spec = open_room();
  env::EnvState s;
  s.position = {3.3, 2.2};
  s.velocity = {0.1, -0.5};
  s.step_index = 57;
  const env::EnvState restored = env::reset_to(spec, s);
  CHECK(restored.position == s.position);
  CHECK(restored.velocity == s.velocity);
  CHECK(restored.step_index == 0);

  const env::StepResult from_restored = env::step(spec, restored, Eigen::Vector2d::Zero());
  const env::StepResult again = env::step(spec, env::reset_to(spec, s), Eigen::Vector2d::Zero());
  CHECK(from_restored.next.position == again.next.position);
}

TEST_CASE("reset_to rejects wall positions") {
  const env::MazeSpec spec = open_room();
  env::EnvState s;
  s.position = {0.5, 0.5};  // border wall
  CHECK_THROWS_AS(env::reset_to(spec, s), std::invalid_argument);
}

TEST_CASE("sample_candidates draws dataset states") {
  const env::MazeSpec spec = open_room();
  data::Dataset d;
  for (int i = 0; i < 10; ++i) {
    data::Transition t;
    t.obs = Eigen::Vector4d(1.5 + 0.1 * i, 2.5, 0.0, 0.0);
    t.act = Eigen::Vector2d::Zero();
    t.next_obs = t.obs;
    t.episode_id = i;
    d.transitions.push_back(t);
  }
  Rng rng(2);
  const env::CandidateSet set = env::sample_candidates(d, 4, rng);
  CHECK(set.states.size() == 4);
  for (const auto& s : set.states) {
    bool found = false;
    for (const auto& t : d.transitions)
      if (t.obs == Eigen::VectorXd(s.observation())) found = true;
    CHECK(found);
  }

  // n = 1 on a single-state dataset returns that state
  data::Dataset one;
  one.transitions.push_back(d.transitions[0]);
  Rng rng2(3);
  const env::CandidateSet single = env::sample_candidates(one, 1, rng2);
  CHECK(single.states.size() == 1);
  CHECK(Eigen::VectorXd(single.states[0].observation()) == one.transitions[0].obs);

  // deterministic under a fixed seed
  Rng r1(9), r2(9);
  const auto c1 = env::sample_candidates(d, 5, r1);
  const auto c2 = env::sample_candidates(d, 5, r2);
  for (std::size_t i = 0; i < 5; ++i)
    CHECK(c1.states[i].position == c2.states[i].position);

  // n beyond the dataset size falls back to replacement
  Rng r3(4);
  const auto big = env::sample_candidates(d, 25, r3);
  CHECK(big.states.size() == 25);
}

TEST_CASE("layout parsing validates the grid") {
  CHECK_THROWS(env::parse_layout("", "empty"));
  CHECK_THROWS(env::parse_layout("##\n#\n", "ragged"));
  CHECK_THROWS(env::parse_layout("##\n##\n", "no goal"));
  CHECK_THROWS(env::parse_layout("#G\nGG\n", "many goals"));
  CHECK_THROWS(env::parse_layout("#X\n#G\n", "bad char"));
  const env::MazeSpec ok = env::parse_layout("#.G\n", "strip");
  CHECK(ok.rows == 1);
  CHECK(ok.cols == 3);
  CHECK(ok.goal == Eigen::Vector2d(2.5, 0.5));
}

TEST_CASE("built-in layouts are valid and fully reachable") {
  for (const auto& name : env::builtin_layout_names()) {
    const env::MazeSpec spec = env::builtin_layout(name);
    CHECK_NOTHROW(spec.validate());
    const planner::WaypointPlanner p(spec, spec.goal);
    CHECK(p.fully_reachable());
  }
  CHECK_THROWS(env::builtin_layout("nope"));
}

TEST_CASE("layout files load through the resolver") {
  const env::MazeSpec direct = env::builtin_layout("umaze");
  const env::MazeSpec resolved = env::resolve_layout("umaze");
  CHECK(direct.walls == resolved.walls);
  CHECK(direct.goal == resolved.goal);
}
