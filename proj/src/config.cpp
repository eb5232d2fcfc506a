#include "aorl/config.hpp"

#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

namespace aorl::cli {

Mode mode_from_string(const std::string& s) {
  if (s == "offline") return Mode::offline;
  if (s == "ft") return Mode::ft;
  if (s == "active") return Mode::active;
  if (s == "active-restricted") return Mode::active_restricted;
  if (s == "online") return Mode::online;
  if (s == "ablate") return Mode::ablate;
  throw ConfigError("unknown mode: " + s);
}

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::offline: return "offline";
    case Mode::ft: return "ft";
    case Mode::active: return "active";
    case Mode::active_restricted: return "active-restricted";
    case Mode::online: return "online";
    case Mode::ablate: return "ablate";
  }
  throw std::logic_error("unknown mode");
}

namespace {

int parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected an integer, got '" + value + "'");
  }
}

std::int64_t parse_i64(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const std::int64_t v = std::stoll(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected an integer, got '" + value + "'");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected a number, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true") return true;
  if (value == "0" || value == "false") return false;
  throw ConfigError("key '" + key + "': expected a boolean, got '" + value + "'");
}

std::vector<int> parse_seed_list(const std::string& key, const std::string& value) {
  std::vector<int> seeds;
  std::istringstream in(value);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    if (!tok.empty()) seeds.push_back(parse_int(key, tok));
  }
  if (seeds.empty()) throw ConfigError("key '" + key + "': no seeds given");
  return seeds;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_seeds(const std::vector<int>& seeds) {
  std::string out;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (i > 0) out += ',';
    out += std::to_string(seeds[i]);
  }
  return out;
}

struct KeyDef {
  const char* path;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

const std::vector<KeyDef>& key_table() {
  static const std::vector<KeyDef> table = {
      {"experiment.mode",
       [](ExperimentConfig& c, const std::string& v) { c.mode = mode_from_string(v); },
       [](const ExperimentConfig& c) { return to_string(c.mode); }},
      {"experiment.layout", [](ExperimentConfig& c, const std::string& v) { c.layout = v; },
       [](const ExperimentConfig& c) { return c.layout; }},
      {"experiment.dataset", [](ExperimentConfig& c, const std::string& v) { c.dataset_path = v; },
       [](const ExperimentConfig& c) { return c.dataset_path; }},
      {"experiment.out_dir", [](ExperimentConfig& c, const std::string& v) { c.out_dir = v; },
       [](const ExperimentConfig& c) { return c.out_dir; }},
      {"experiment.seeds",
       [](ExperimentConfig& c, const std::string& v) {
         c.seeds = parse_seed_list("experiment.seeds", v);
       },
       [](const ExperimentConfig& c) { return fmt_seeds(c.seeds); }},
      {"experiment.budget",
       [](ExperimentConfig& c, const std::string& v) {
         c.budget = parse_i64("experiment.budget", v);
       },
       [](const ExperimentConfig& c) { return std::to_string(c.budget); }},
      {"experiment.epoch_x",
       [](ExperimentConfig& c, const std::string& v) {
         c.epoch_x = parse_int("experiment.epoch_x", v);
       },
       [](const ExperimentConfig& c) { return std::to_string(c.epoch_x); }},
      {"experiment.epoch_y",
       [](ExperimentConfig& c, const std::string& v) {
         c.epoch_y = parse_int("experiment.epoch_y", v);
       },
       [](const ExperimentConfig& c) { return std::to_string(c.epoch_y); }},
      {"experiment.eval_episodes",
       [](ExperimentConfig& c, const std::string& v) {
         c.eval_episodes = parse_int("experiment.eval_episodes", v);
       },
       [](const ExperimentConfig& c) { return std::to_string(c.eval_episodes); }},
      {"experiment.arms", [](ExperimentConfig& c, const std::string& v) { c.arms = v; },
       [](const ExperimentConfig& c) { return c.arms; }},
      {"experiment.algo",
       [](ExperimentConfig& c, const std::string& v) {
         if (v != "bc" && v != "td3bc") throw ConfigError("experiment.algo must be bc or td3bc");
         c.offline_algo = v;
       },
       [](const ExperimentConfig& c) { return c.offline_algo; }},

      {"offline.alpha",
       [](ExperimentConfig& c, const std::string& v) {
         c.offline_cfg.alpha = parse_double("offline.alpha", v);
       },
       [](const ExperimentConfig& c) { return fmt_double(c.offline_cfg.alpha); }},
      {"offline.gamma",
       [](ExperimentConfig& c, const std::string& v) {
         c.offline_cfg.gamma = parse_double("offline.gamma", v);
       },
       [](const ExperimentConfig& c) { return fmt_double(c.offline_cfg.gamma); }},
      {"offline.policy_delay",
       [](ExperimentConfig& c, const std::string& v) {
         c.offline_cfg.policy_delay = parse_int("offline.policy_delay", v);
       },
       [](const ExperimentConfig& c) { return std::to_string(c.offline_cfg.policy_delay); }},
      {"offline.policy_noise",
       [](ExperimentConfig& c, const std::string& v) {
         c.offline_cfg.policy_noise = parse_double("offline.policy_noise", v);
       },
       [](const ExperimentConfig& c) { return fmt_double(c.offline_cfg.policy_noise); }},
      {"offline.noise_clip",
       [](ExperimentConfig& c, const std::string& v) {
         c.offline_cfg.noise_clip = parse_double("offline.noise_clip", v);
       },
       [](const ExperimentConfig& c) { return fmt_double(c.offline_cfg.noise_clip); }},
      {"offline.tau",
       [](ExperimentConfig& c, const std::string& v) {
         c.offline_cfg.tau = parse_double("offline.tau", v);
       },
       [](const ExperimentConfig& c) { return fmt_double(c.offline_cfg.tau); }},
      {"offline.batch_size",
       [](ExperimentConfig& c, const std::string& v) {
         c.offline_cfg.batch_size = parse_int("offline.batch_size", v);
       },
       [](const ExperimentConfig& c) { return std::to_string(c.offline_cfg.batch_size); }},
      {"offline.steps",
       [](ExperimentConfig& c, const std::string& v) {
         c.offline_cfg.steps = parse_int("offline.steps", v);
       },
       [](const ExperimentConfig& c) { return std::to_string(c.offline_cfg.steps); }},
      {"offline.alpha_decay_factor",
       [](ExperimentConfig& c, const std::string& v) {
         c.offline_cfg.alpha_decay_factor = parse_double("offline.alpha_decay_factor", v);
       },
       [](const ExperimentConfig& c) { return fmt_double(c.offline_cfg.alpha_decay_factor); }},
      {"offline.lr",
       [](ExperimentConfig& c, const std::string& v) {
         c.offline_cfg.lr = parse_double("offline.lr", v);
       },
       [](const ExperimentConfig& c) { return fmt_double(c.offline_cfg.lr); }},
      {"offline.hidden",
       [](ExperimentConfig& c, const std::string& v) {
         c.offline_cfg.hidden_dim = parse_int("offline.hidden", v);
       },
       [](const ExperimentConfig& c) { return std::to_string(c.offline_cfg.hidden_dim); }},
      {"offline.normalize_q",
       [](ExperimentConfig& c, const std::string& v) {
         c.offline_cfg.normalize_q_scale = parse_bool("offline.normalize_q", v);
       },
       [](const ExperimentConfig& c) {
         return std::string(c.offline_cfg.normalize_q_scale ? "1" : "0");
       }},

      {"explore.epsilon",
       [](ExperimentConfig& c, const std::string& v) {
         c.explore_cfg.epsilon = parse_double("explore.epsilon", v);
       },
       [](const ExperimentConfig& c) { return fmt_double(c.explore_cfg.epsilon); }},
      {"explore.m_samples",
       [](ExperimentConfig& c, const std::string& v) {
         c.explore_cfg.n_action_samples = parse_int("explore.m_samples", v);
       },
       [](const ExperimentConfig& c) { return std::to_string(c.explore_cfg.n_action_samples); }},
      {"explore.noise_scale",
       [](ExperimentConfig& c, const std::string& v) {
         c.explore_cfg.noise_scale = parse_double("explore.noise_scale", v);
       },
       [](const ExperimentConfig& c) { return fmt_double(c.explore_cfg.noise_scale); }},
      {"explore.threshold_quantile",
       [](ExperimentConfig& c, const std::string& v) {
         c.explore_cfg.threshold_quantile = parse_double("explore.threshold_quantile", v);
       },
       [](const ExperimentConfig& c) { return fmt_double(c.explore_cfg.threshold_quantile); }},
      {"explore.aggregator",
       [](ExperimentConfig& c, const std::string& v) {
         c.explore_cfg.aggregator = repr::aggregator_from_string(v);
       },
       [](const ExperimentConfig& c) { return repr::to_string(c.explore_cfg.aggregator); }},
      {"explore.candidates",
       [](ExperimentConfig& c, const std::string& v) {
         c.explore_cfg.candidate_count = parse_int("explore.candidates", v);
       },
       [](const ExperimentConfig& c) { return std::to_string(c.explore_cfg.candidate_count); }},

      {"repr.k",
       [](ExperimentConfig& c, const std::string& v) { c.repr_cfg.count = parse_int("repr.k", v); },
       [](const ExperimentConfig& c) { return std::to_string(c.repr_cfg.count); }},
      {"repr.lambda",
       [](ExperimentConfig& c, const std::string& v) {
         c.repr_cfg.lambda = parse_double("repr.lambda", v);
       },
       [](const ExperimentConfig& c) { return fmt_double(c.repr_cfg.lambda); }},
      {"repr.embed_dim",
       [](ExperimentConfig& c, const std::string& v) {
         c.repr_cfg.embed_dim = parse_int("repr.embed_dim", v);
       },
       [](const ExperimentConfig& c) { return std::to_string(c.repr_cfg.embed_dim); }},
      {"repr.hidden",
       [](ExperimentConfig& c, const std::string& v) {
         c.repr_cfg.hidden_dim = parse_int("repr.hidden", v);
       },
       [](const ExperimentConfig& c) { return std::to_string(c.repr_cfg.hidden_dim); }},
      {"repr.lr",
       [](ExperimentConfig& c, const std::string& v) {
         c.repr_cfg.lr = parse_double("repr.lr", v);
       },
       [](const ExperimentConfig& c) { return fmt_double(c.repr_cfg.lr); }},
      {"repr.continuation_lr",
       [](ExperimentConfig& c, const std::string& v) {
         c.repr_cfg.continuation_lr = parse_double("repr.continuation_lr", v);
       },
       [](const ExperimentConfig& c) { return fmt_double(c.repr_cfg.continuation_lr); }},
      {"repr.steps",
       [](ExperimentConfig& c, const std::string& v) {
         c.repr_cfg.steps = parse_int("repr.steps", v);
       },
       [](const ExperimentConfig& c) { return std::to_string(c.repr_cfg.steps); }},
      {"repr.steps_per_epoch",
       [](ExperimentConfig& c, const std::string& v) {
         c.repr_cfg.steps_per_epoch = parse_int("repr.steps_per_epoch", v);
       },
       [](const ExperimentConfig& c) { return std::to_string(c.repr_cfg.steps_per_epoch); }},
      {"repr.batch_size",
       [](ExperimentConfig& c, const std::string& v) {
         c.repr_cfg.batch_size = parse_int("repr.batch_size", v);
       },
       [](const ExperimentConfig& c) { return std::to_string(c.repr_cfg.batch_size); }},

      {"restricted.max_nodes",
       [](ExperimentConfig& c, const std::string& v) {
         c.restricted_cfg.max_nodes = parse_int("restricted.max_nodes", v);
       },
       [](const ExperimentConfig& c) { return std::to_string(c.restricted_cfg.max_nodes); }},
      {"restricted.edge_threshold",
       [](ExperimentConfig& c, const std::string& v) {
         c.restricted_cfg.edge_threshold = parse_double("restricted.edge_threshold", v);
       },
       [](const ExperimentConfig& c) { return fmt_double(c.restricted_cfg.edge_threshold); }},
      {"restricted.switch_radius",
       [](ExperimentConfig& c, const std::string& v) {
         c.restricted_cfg.switch_radius = parse_double("restricted.switch_radius", v);
       },
       [](const ExperimentConfig& c) { return fmt_double(c.restricted_cfg.switch_radius); }},
      {"restricted.stage1_cap",
       [](ExperimentConfig& c, const std::string& v) {
         c.restricted_cfg.stage1_step_cap = parse_int("restricted.stage1_cap", v);
       },
       [](const ExperimentConfig& c) { return std::to_string(c.restricted_cfg.stage1_step_cap); }},
      {"restricted.goal_window",
       [](ExperimentConfig& c, const std::string& v) {
         c.restricted_cfg.goal_window = parse_int("restricted.goal_window", v);
       },
       [](const ExperimentConfig& c) { return std::to_string(c.restricted_cfg.goal_window); }},
      {"restricted.goal_policy_steps",
       [](ExperimentConfig& c, const std::string& v) {
         c.restricted_cfg.goal_policy_steps = parse_int("restricted.goal_policy_steps", v);
       },
       [](const ExperimentConfig& c) {
         return std::to_string(c.restricted_cfg.goal_policy_steps);
       }},

      {"online.train_per_step",
       [](ExperimentConfig& c, const std::string& v) {
         c.online_cfg.train_updates_per_step = parse_int("online.train_per_step", v);
       },
       [](const ExperimentConfig& c) {
         return std::to_string(c.online_cfg.train_updates_per_step);
       }},
      {"online.eval_every",
       [](ExperimentConfig& c, const std::string& v) {
         c.online_cfg.eval_every = parse_int("online.eval_every", v);
       },
       [](const ExperimentConfig& c) { return std::to_string(c.online_cfg.eval_every); }},
      {"online.threshold_refresh",
       [](ExperimentConfig& c, const std::string& v) {
         c.online_cfg.threshold_refresh = parse_int("online.threshold_refresh", v);
       },
       [](const ExperimentConfig& c) { return std::to_string(c.online_cfg.threshold_refresh); }},
      {"online.warmup",
       [](ExperimentConfig& c, const std::string& v) {
         c.online_cfg.warmup_transitions = parse_int("online.warmup", v);
       },
       [](const ExperimentConfig& c) { return std::to_string(c.online_cfg.warmup_transitions); }},
      {"online.variant",
       [](ExperimentConfig& c, const std::string& v) {
         if (v != "active" && v != "baseline")
           throw ConfigError("online.variant must be active or baseline");
         c.online_cfg.variant = v;
       },
       [](const ExperimentConfig& c) { return c.online_cfg.variant; }},
  };
  return table;
}

void set_key(ExperimentConfig& cfg, const std::string& path, const std::string& value) {
  for (const auto& def : key_table()) {
    if (path == def.path) {
      def.set(cfg, value);
      return;
    }
  }
  throw ConfigError("unknown configuration key: " + path);
}

std::string trim(const std::string& s) {
  std::size_t begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  std::size_t end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("experiment.seeds: at least one seed required");
  const bool needs_dataset = mode != Mode::online;
  if (needs_dataset) {
    if (dataset_path.empty())
      throw ConfigError("experiment.dataset: required for mode " + to_string(mode));
    if (!std::filesystem::exists(dataset_path))
      throw ConfigError("experiment.dataset: path does not exist: " + dataset_path);
  }
  if (mode != Mode::offline && budget < 1)
    throw ConfigError("experiment.budget: must be >= 1 for mode " + to_string(mode));
  if (epoch_x < 1) throw ConfigError("experiment.epoch_x: must be >= 1");
  if (epoch_y < 0) throw ConfigError("experiment.epoch_y: must be >= 0");
  if (eval_episodes < 1) throw ConfigError("experiment.eval_episodes: must be >= 1");
  if (explore_cfg.epsilon < 0.0 || explore_cfg.epsilon > 1.0)
    throw ConfigError("explore.epsilon: must lie in [0, 1]");
  if (explore_cfg.n_action_samples < 1) throw ConfigError("explore.m_samples: must be >= 1");
  if (explore_cfg.noise_scale < 0.0) throw ConfigError("explore.noise_scale: must be >= 0");
  if (repr_cfg.count < 1) throw ConfigError("repr.k: must be >= 1");
  if (repr_cfg.lambda < 0.0) throw ConfigError("repr.lambda: must be >= 0");
  if (offline_cfg.alpha < 0.0) throw ConfigError("offline.alpha: must be >= 0");
  if (offline_cfg.gamma < 0.0 || offline_cfg.gamma >= 1.0)
    throw ConfigError("offline.gamma: must lie in [0, 1)");
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  ExperimentConfig cfg;
  std::string line;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(path + ":" + std::to_string(line_no) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty())
      throw ConfigError(path + ":" + std::to_string(line_no) + ": key outside any section");
    set_key(cfg, section + "." + key, value);
  }
  return cfg;
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override must look like section.key=value: " + assignment);
  set_key(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> entries;
  for (const auto& def : key_table()) entries.emplace_back(def.path, def.get(cfg));
  return entries;
}

std::string tool_version() { return "aorl 0.1.0"; }

std::string file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("file_checksum: cannot open " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[65536];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
    if (!in) break;
  }
  char hex[24];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

void RunManifest::write(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "tool " << tool_version << "\n";
  out << "status " << status << "\n";
  out << "started_at " << started_at << "\n";
  if (!finished_at.empty()) out << "finished_at " << finished_at << "\n";
  out << "[config]\n";
  for (const auto& [key, value] : config_snapshot) out << key << " = " << value << "\n";
  out << "[checksums]\n";
  for (const auto& [name, sum] : checksums) out << name << " " << sum << "\n";
}

}  // namespace aorl::cli
