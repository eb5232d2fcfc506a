#include "aorl/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace aorl::data {

void validate(const Dataset& d) {
  std::vector<std::int64_t> seen_ids;
  const Transition* prev = nullptr;
  for (std::size_t i = 0; i < d.transitions.size(); ++i) {
    const Transition& t = d.transitions[i];
    if (t.obs.size() != t.next_obs.size())
      throw std::runtime_error("dataset: obs/next_obs length mismatch at index " +
                               std::to_string(i));
    const bool new_episode = (prev == nullptr) || (prev->episode_id != t.episode_id);
    if (new_episode) {
      for (std::int64_t id : seen_ids)
        if (id == t.episode_id)
          throw std::runtime_error("dataset: episode id " + std::to_string(t.episode_id) +
                                   " recurs non-contiguously at index " + std::to_string(i));
      seen_ids.push_back(t.episode_id);
    } else {
      if (prev->done)
        throw std::runtime_error("dataset: done set before end of episode " +
                                 std::to_string(t.episode_id));
      if (prev->next_obs != t.obs)
        throw std::runtime_error("dataset: broken next_obs chain at index " + std::to_string(i));
    }
    prev = &t;
  }
}

std::vector<std::pair<std::size_t, std::size_t>> trajectory_ranges(const Dataset& d) {
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  std::size_t begin = 0;
  for (std::size_t i = 1; i <= d.transitions.size(); ++i) {
    if (i == d.transitions.size() ||
        d.transitions[i].episode_id != d.transitions[begin].episode_id) {
      ranges.emplace_back(begin, i);
      begin = i;
    }
  }
  return ranges;
}

Dataset collect_behavior_dataset(const env::MazeSpec& spec, const BehaviorPolicy& policy,
                                 int n_transitions, Rng& rng) {
  if (n_transitions < 1)
    throw std::invalid_argument("collect_behavior_dataset: n_transitions must be >= 1");
  Dataset d;
  d.layout_name = spec.layout_name;
  d.provenance = "behavior_policy";
  d.transitions.reserve(static_cast<std::size_t>(n_transitions));
  std::int64_t episode_id = 0;
  while (d.transitions.size() < static_cast<std::size_t>(n_transitions)) {
    env::EnvState state = env::reset(spec, rng);
    while (d.transitions.size() < static_cast<std::size_t>(n_transitions)) {
      const Eigen::Vector2d action = policy(spec, state, rng);
      const env::StepResult result = env::step(spec, state, action);
      Transition t;
      t.obs = state.observation();
      t.act = action.cwiseMax(-spec.max_force).cwiseMin(spec.max_force);
      t.next_obs = result.next.observation();
      t.rew = result.reward;
      t.done = result.done;
      t.episode_id = episode_id;
      d.transitions.push_back(std::move(t));
      state = result.next;
      if (result.done) break;
    }
    ++episode_id;
  }
  return d;
}

Dataset prune_near_goal(const Dataset& d, const Eigen::Vector2d& center, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("prune_near_goal: radius must be positive");
  auto inside = [&](const Eigen::VectorXd& obs) {
    return (Eigen::Vector2d(obs[0], obs[1]) - center).norm() <= radius;
  };
  Dataset out;
  out.layout_name = d.layout_name;
  out.provenance = d.provenance + "; pruned r=" + std::to_string(radius);
  std::int64_t next_id = 0;
  bool in_segment = false;
  for (const auto& [begin, end] : trajectory_ranges(d)) {
    in_segment = false;
    for (std::size_t i = begin; i < end; ++i) {
      const Transition& t = d.transitions[i];
      if (inside(t.obs) || inside(t.next_obs)) {
        in_segment = false;
        continue;
      }
      if (!in_segment) {
        ++next_id;
        in_segment = true;
      }
      // done can only be set on the original trajectory end, which stays the
      // last element of whichever segment keeps it
      Transition kept = t;
      kept.episode_id = next_id - 1;
      out.transitions.push_back(std::move(kept));
    }
  }
  if (out.transitions.empty())
    throw std::runtime_error("prune_near_goal: pruning removed every transition");
  return out;
}

Dataset subsample_trajectories(const Dataset& d, double fraction, Rng& rng) {
  if (!(fraction > 0.0) || fraction > 1.0)
    throw std::invalid_argument("subsample_trajectories: fraction must be in (0, 1]");
  const auto ranges = trajectory_ranges(d);
  const std::size_t keep =
      static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(ranges.size())));
  auto chosen = rng.sample_without_replacement(ranges.size(), keep);
  std::sort(chosen.begin(), chosen.end());
  Dataset out;
  out.layout_name = d.layout_name;
  out.provenance = d.provenance + "; subsampled f=" + std::to_string(fraction);
  for (std::size_t idx : chosen)
    for (std::size_t i = ranges[idx].first; i < ranges[idx].second; ++i)
      out.transitions.push_back(d.transitions[i]);
  return out;
}

namespace {

void print_vector(std::string& line, const Eigen::VectorXd& v) {
  char buf[64];
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i > 0) line += ' ';
    std::snprintf(buf, sizeof(buf), "%.17g", v[i]);
    line += buf;
  }
}

Eigen::VectorXd parse_vector(const std::string& field, std::size_t line_no) {
  std::vector<double> values;
  std::istringstream in(field);
  std::string tok;
  while (in >> tok) {
    try {
      std::size_t pos = 0;
      values.push_back(std::stod(tok, &pos));
      if (pos != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw std::runtime_error("dataset parse error at line " + std::to_string(line_no) +
                               ": bad float '" + tok + "'");
    }
  }
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) v[static_cast<Eigen::Index>(i)] = values[i];
  return v;
}

}  // namespace

void save(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "# aorl-dataset v1\n";
  out << "# layout=" << d.layout_name << "\n";
  out << "# provenance=" << d.provenance << "\n";
  char buf[64];
  for (const Transition& t : d.transitions) {
    std::string line;
    print_vector(line, t.obs);
    line += '|';
    print_vector(line, t.act);
    line += '|';
    print_vector(line, t.next_obs);
    line += '|';
    std::snprintf(buf, sizeof(buf), "%.17g", t.rew);
    line += buf;
    line += '|';
    line += t.done ? '1' : '0';
    line += '|';
    line += std::to_string(t.episode_id);
    out << line << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

Dataset load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  Dataset d;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto parse_meta = [&](const std::string& key) -> bool {
        const std::string prefix = "# " + key + "=";
        if (line.rfind(prefix, 0) == 0) {
          const std::string value = line.substr(prefix.size());
          if (key == "layout") d.layout_name = value;
          if (key == "provenance") d.provenance = value;
          return true;
        }
        return false;
      };
      parse_meta("layout") || parse_meta("provenance");
      continue;
    }
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t bar = line.find('|', start);
      if (bar == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, bar - start));
      start = bar + 1;
    }
    if (fields.size() != 6)
      throw std::runtime_error("dataset parse error at line " + std::to_string(line_no) +
                               ": expected 6 fields, got " + std::to_string(fields.size()));
    Transition t;
    t.obs = parse_vector(fields[0], line_no);
    t.act = parse_vector(fields[1], line_no);
    t.next_obs = parse_vector(fields[2], line_no);
    const Eigen::VectorXd rew = parse_vector(fields[3], line_no);
    if (rew.size() != 1)
      throw std::runtime_error("dataset parse error at line " + std::to_string(line_no) +
                               ": reward must be a single value");
    t.rew = rew[0];
    if (fields[4] == "0")
      t.done = false;
    else if (fields[4] == "1")
      t.done = true;
    else
      throw std::runtime_error("dataset parse error at line " + std::to_string(line_no) +
                               ": done flag must be 0 or 1");
    try {
      t.episode_id = std::stoll(fields[5]);
    } catch (const std::exception&) {
      throw std::runtime_error("dataset parse error at line " + std::to_string(line_no) +
                               ": bad episode id '" + fields[5] + "'");
    }
    d.transitions.push_back(std::move(t));
  }
  validate(d);
  return d;
}

Batch sample_batch(const Dataset& d, int batch_size, Rng& rng) {
  if (d.transitions.empty()) throw std::invalid_argument("sample_batch: dataset is empty");
  if (batch_size < 1) throw std::invalid_argument("sample_batch: batch_size must be >= 1");
  const Eigen::Index obs_dim = d.transitions.front().obs.size();
  const Eigen::Index act_dim = d.transitions.front().act.size();
  Batch b;
  b.obs.resize(obs_dim, batch_size);
  b.act.resize(act_dim, batch_size);
  b.next_obs.resize(obs_dim, batch_size);
  b.rew.resize(batch_size);
  b.done.resize(batch_size);
  b.neg_obs.resize(obs_dim, batch_size);
  const std::size_t n = d.transitions.size();
  for (int i = 0; i < batch_size; ++i) {
    const Transition& t = d.transitions[rng.uniform_int(n)];
    b.obs.col(i) = t.obs;
    b.act.col(i) = t.act;
    b.next_obs.col(i) = t.next_obs;
    b.rew[i] = t.rew;
    b.done[i] = t.done ? 1.0 : 0.0;
  }
  for (int i = 0; i < batch_size; ++i)
    b.neg_obs.col(i) = d.transitions[rng.uniform_int(n)].obs;
  return b;
}

Eigen::MatrixXd observation_matrix(const Dataset& d) {
  if (d.transitions.empty()) return {};
  Eigen::MatrixXd m(d.transitions.front().obs.size(),
                    static_cast<Eigen::Index>(d.transitions.size()));
  for (std::size_t i = 0; i < d.transitions.size(); ++i)
    m.col(static_cast<Eigen::Index>(i)) = d.transitions[i].obs;
  return m;
}

}  // namespace aorl::data
