#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "aorl/config.hpp"

using namespace aorl;

namespace {

std::string temp(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string write_temp(const std::string& name, const std::string& text) {
  const std::string path = temp(name);
  std::ofstream out(path);
  out << text;
  return path;
}

}  // namespace

TEST_CASE("a minimal config inherits every documented default") {
  const std::string path = write_temp("aorl_min.cfg",
                                      "[experiment]\n"
                                      "mode = active\n");
  const cli::ExperimentConfig cfg = cli::parse_config(path);
  CHECK(cfg.mode == cli::Mode::active);
  CHECK(cfg.layout == "large");
  CHECK(cfg.budget == 40000);
  CHECK(cfg.epoch_x == 2500);
  CHECK(cfg.explore_cfg.epsilon == 0.5);
  CHECK(cfg.explore_cfg.noise_scale == 0.3);
  CHECK(cfg.explore_cfg.n_action_samples == 16);
  CHECK(cfg.repr_cfg.count == 5);
  CHECK(cfg.repr_cfg.lambda == 1.0);
  CHECK(cfg.offline_cfg.alpha == 2.5);
  CHECK(cfg.offline_cfg.alpha_decay_factor == 5.0);
  CHECK(cfg.offline_cfg.gamma == 0.99);
  CHECK(cfg.restricted_cfg.edge_threshold == 1e-2);
  CHECK(cfg.restricted_cfg.goal_window == 32);
  // the full key/value dump mentions every key exactly once
  const auto entries = cli::config_entries(cfg);
  CHECK(entries.size() > 40);
  std::filesystem::remove(path);
}

TEST_CASE("unknown keys are rejected by full path") {
  const std::string path = write_temp("aorl_bad.cfg",
                                      "[offline]\n"
                                      "stepz = 100\n");
  try {
    cli::parse_config(path);
    FAIL("expected a config error");
  } catch (const cli::ConfigError& e) {
    CHECK(std::string(e.what()).find("offline.stepz") != std::string::npos);
  }
  std::filesystem::remove(path);
}

TEST_CASE("overrides beat file values") {
  const std::string path = write_temp("aorl_over.cfg",
                                      "[experiment]\n"
                                      "mode = ft\n"
                                      "budget = 1000\n"
                                      "[explore]\n"
                                      "epsilon = 0.25\n");
  cli::ExperimentConfig cfg = cli::parse_config(path);
  CHECK(cfg.budget == 1000);
  cli::apply_override(cfg, "experiment.budget=2000");
  cli::apply_override(cfg, "explore.epsilon=0.75");
  CHECK(cfg.budget == 2000);
  CHECK(cfg.explore_cfg.epsilon == 0.75);
  CHECK(cfg.mode == cli::Mode::ft);
  CHECK_THROWS_AS(cli::apply_override(cfg, "nonsense"), cli::ConfigError);
  CHECK_THROWS_AS(cli::apply_override(cfg, "experiment.nope=1"), cli::ConfigError);
  std::filesystem::remove(path);
}

TEST_CASE("bad values name the key") {
  cli::ExperimentConfig cfg;
  try {
    cli::apply_override(cfg, "experiment.budget=soon");
    FAIL("expected a config error");
  } catch (const cli::ConfigError& e) {
    CHECK(std::string(e.what()).find("experiment.budget") != std::string::npos);
  }
  CHECK_THROWS_AS(cli::apply_override(cfg, "explore.aggregator=median"), std::exception);
}

TEST_CASE("validation requires seeds and an existing dataset") {
  cli::ExperimentConfig cfg;
  cfg.mode = cli::Mode::active;
  cfg.dataset_path = "/definitely/not/here.ds";
  CHECK_THROWS_AS(cfg.validate(), cli::ConfigError);

  const std::string ds = write_temp("aorl_cfg_data.ds", "# aorl-dataset v1\n");
  cfg.dataset_path = ds;
  CHECK_NOTHROW(cfg.validate());

  cfg.seeds.clear();
  CHECK_THROWS_AS(cfg.validate(), cli::ConfigError);
  cfg.seeds = {0};

  cfg.explore_cfg.epsilon = 1.5;
  CHECK_THROWS_AS(cfg.validate(), cli::ConfigError);
  cfg.explore_cfg.epsilon = 0.5;

  // online mode runs without a dataset
  cfg.mode = cli::Mode::online;
  cfg.dataset_path.clear();
  CHECK_NOTHROW(cfg.validate());
  std::filesystem::remove(ds);
}

TEST_CASE("config entries round-trip through overrides") {
  cli::ExperimentConfig cfg;
  cfg.budget = 1234;
  cfg.explore_cfg.epsilon = 0.125;
  const auto entries = cli::config_entries(cfg);
  cli::ExperimentConfig rebuilt;
  for (const auto& [key, value] : entries)
    if (!value.empty()) cli::apply_override(rebuilt, key + "=" + value);
  CHECK(rebuilt.budget == cfg.budget);
  CHECK(rebuilt.explore_cfg.epsilon == cfg.explore_cfg.epsilon);
  CHECK(rebuilt.mode == cfg.mode);
}

TEST_CASE("manifest writes config and checksums") {
  cli::RunManifest manifest;
  manifest.tool_version = cli::tool_version();
  manifest.status = "ok";
  manifest.started_at = "2000-01-01T00:00:00Z";
  manifest.finished_at = "2000-01-01T00:00:01Z";
  manifest.config_snapshot = {{"experiment.mode", "active"}};
  manifest.checksums = {{"curve.csv", "0123456789abcdef"}};
  const std::string path = temp("aorl_manifest.txt");
  manifest.write(path);
  std::ifstream in(path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(text.find("status ok") != std::string::npos);
  CHECK(text.find("experiment.mode = active") != std::string::npos);
  CHECK(text.find("curve.csv 0123456789abcdef") != std::string::npos);
  std::filesystem::remove(path);
}

TEST_CASE("file checksums are stable and content-sensitive") {
  const std::string a = write_temp("aorl_sum_a.txt", "hello");
  const std::string b = write_temp("aorl_sum_b.txt", "hello");
  const std::string c = write_temp("aorl_sum_c.txt", "hellp");
  CHECK(cli::file_checksum(a) == cli::file_checksum(b));
  CHECK(cli::file_checksum(a) != cli::file_checksum(c));
  std::filesystem::remove(a);
  std::filesystem::remove(b);
  std::filesystem::remove(c);
}
