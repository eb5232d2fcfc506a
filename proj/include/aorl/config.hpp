#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "aorl/active.hpp"
#include "aorl/offline.hpp"
#include "aorl/repr.hpp"

namespace aorl::cli {

// Configuration problems exit with status 1; runtime failures with 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Mode { offline, ft, active, active_restricted, online, ablate };

Mode mode_from_string(const std::string& s);
std::string to_string(Mode mode);

struct ReprConfig {
  int count = 5;
  double lambda = 1.0;
  int embed_dim = 32;
  int hidden_dim = 64;
  double lr = 1e-3;            // initial training
  double continuation_lr = 1e-4;  // gentle updates during collection epochs
  int steps = 12000;           // initial training
  int steps_per_epoch = 800;   // continuation during collection
  int batch_size = 256;
};

struct RestrictedConfig {
  int max_nodes = 2000;
  double edge_threshold = 1e-2;
  double switch_radius = 1.0;
  int stage1_step_cap = 150;
  int goal_window = 32;
  int goal_policy_steps = 15000;
};

struct OnlineConfig {
  int train_updates_per_step = 5;  // collect one transition, train this many times
  int eval_every = 1000;
  int threshold_refresh = 500;
  int warmup_transitions = 256;    // no training below this dataset size
  std::string variant = "active";  // active | baseline
};

struct ExperimentConfig {
  Mode mode = Mode::active;
  std::string layout = "large";
  std::string dataset_path;
  std::string out_dir = "runs/out";
  std::vector<int> seeds = {0};
  std::int64_t budget = 40000;
  int epoch_x = 2500;
  int epoch_y = 8000;
  int eval_episodes = 20;
  std::string arms = "I+R,I+P,I+U,A+R,A+P,A+U";
  std::string offline_algo = "td3bc";  // bc | td3bc

  offline::OfflineConfig offline_cfg;
  active::ExplorationConfig explore_cfg;
  ReprConfig repr_cfg;
  RestrictedConfig restricted_cfg;
  OnlineConfig online_cfg;

  void validate() const;  // referenced paths must exist, seeds non-empty
};

// Structured plaintext with [section] headers and key = value lines; '#'
// starts a comment. Unknown section/key pairs are rejected by full path.
ExperimentConfig parse_config(const std::string& path);

// "section.key=value" overrides applied over a parsed (or default) config.
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

// The full key/value view of a config, used for manifests and round-trips.
std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& cfg);

struct RunManifest {
  std::string tool_version;
  std::string status;  // running | ok | failed
  std::string started_at;
  std::string finished_at;
  std::vector<std::pair<std::string, std::string>> config_snapshot;
  std::vector<std::pair<std::string, std::string>> checksums;  // artifact -> fnv1a64 hex

  void write(const std::string& path) const;
};

std::string tool_version();

// FNV-1a64 of a file's bytes, hex-encoded; manifest integrity stamp.
std::string file_checksum(const std::string& path);

}  // namespace aorl::cli
