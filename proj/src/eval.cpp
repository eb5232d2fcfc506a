#include "aorl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "aorl/planner.hpp"

namespace aorl::eval {

EvalReport evaluate(const env::MazeSpec& spec, const offline::DeterministicPolicy& policy,
                    int n_episodes, Rng& rng) {
  if (n_episodes < 1) throw std::invalid_argument("evaluate: n_episodes must be >= 1");
  std::vector<double> returns;
  returns.reserve(static_cast<std::size_t>(n_episodes));
  for (int ep = 0; ep < n_episodes; ++ep) {
    env::EnvState state = env::reset(spec, rng);
    double total = 0.0;
    while (true) {
      const Eigen::Vector2d action = policy.act(state.observation());
      const env::StepResult result = env::step(spec, state, action);
      total += result.reward;
      state = result.next;
      if (result.done) break;
    }
    returns.push_back(total);
  }
  EvalReport report;
  report.n_episodes = n_episodes;
  double sum = 0.0;
  for (double r : returns) sum += r;
  report.mean_return = sum / n_episodes;
  double sq = 0.0;
  for (double r : returns) sq += (r - report.mean_return) * (r - report.mean_return);
  report.std_return = std::sqrt(sq / n_episodes);
  return report;
}

double normalize(double raw, const ReferenceScores& ref) {
  if (!(ref.expert_return > ref.random_return))
    throw std::invalid_argument("normalize: reference scores are degenerate (expert <= random)");
  return 100.0 * (raw - ref.random_return) / (ref.expert_return - ref.random_return);
}

std::optional<double> interaction_reduction(const LearningCurve& active_curve,
                                            const LearningCurve& baseline_curve) {
  if (active_curve.points.empty() || baseline_curve.points.empty())
    throw std::invalid_argument("interaction_reduction: empty curve");

  double best = baseline_curve.points.front().second;
  for (const auto& [steps, score] : baseline_curve.points) best = std::max(best, score);
  std::int64_t baseline_steps = -1;
  for (const auto& [steps, score] : baseline_curve.points)
    if (score == best) {
      baseline_steps = steps;
      break;
    }

  std::int64_t active_steps = -1;
  for (const auto& [steps, score] : active_curve.points)
    if (score >= best) {
      active_steps = steps;
      break;
    }
  if (active_steps < 0) return std::nullopt;
  if (baseline_steps == 0) {
    if (active_steps == 0) return 0.0;
    return std::nullopt;  // the formula cannot express a regression from step zero
  }
  return 100.0 * static_cast<double>(baseline_steps - active_steps) /
         static_cast<double>(baseline_steps);
}

ReferenceScores compute_reference_scores(const env::MazeSpec& spec, Rng& rng, int n_episodes) {
  ReferenceScores ref;
  ref.layout_name = spec.layout_name;

  double random_sum = 0.0;
  for (int ep = 0; ep < n_episodes; ++ep) {
    env::EnvState state = env::reset(spec, rng);
    while (true) {
      const Eigen::Vector2d action{rng.uniform(-spec.max_force, spec.max_force),
                                   rng.uniform(-spec.max_force, spec.max_force)};
      const env::StepResult result = env::step(spec, state, action);
      random_sum += result.reward;
      state = result.next;
      if (result.done) break;
    }
  }
  ref.random_return = random_sum / n_episodes;

  const planner::WaypointPlanner expert(spec, spec.goal);
  if (!expert.fully_reachable())
    throw std::runtime_error("compute_reference_scores: goal unreachable from some free cell in '" +
                             spec.layout_name + "'");
  double expert_sum = 0.0;
  for (int ep = 0; ep < n_episodes; ++ep) {
    env::EnvState state = env::reset(spec, rng);
    while (true) {
      const env::StepResult result = env::step(spec, state, expert.act(state));
      expert_sum += result.reward;
      state = result.next;
      if (result.done) break;
    }
  }
  ref.expert_return = expert_sum / n_episodes;
  return ref;
}

void save_reference_scores(const ReferenceScores& ref, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  char buf[128];
  out << "layout " << ref.layout_name << "\n";
  std::snprintf(buf, sizeof(buf), "random %.17g\n", ref.random_return);
  out << buf;
  std::snprintf(buf, sizeof(buf), "expert %.17g\n", ref.expert_return);
  out << buf;
}

ReferenceScores load_reference_scores(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  ReferenceScores ref;
  std::string key;
  bool have_random = false, have_expert = false;
  while (in >> key) {
    if (key == "layout") {
      in >> ref.layout_name;
    } else if (key == "random") {
      in >> ref.random_return;
      have_random = true;
    } else if (key == "expert") {
      in >> ref.expert_return;
      have_expert = true;
    } else {
      throw std::runtime_error("reference score file: unexpected key '" + key + "'");
    }
  }
  if (!have_random || !have_expert)
    throw std::runtime_error("reference score file: missing fields in " + path);
  return ref;
}

ReferenceScores reference_scores_cached(const env::MazeSpec& spec, const std::string& path,
                                        std::uint64_t seed) {
  if (std::filesystem::exists(path)) {
    const ReferenceScores ref = load_reference_scores(path);
    if (ref.layout_name == spec.layout_name) return ref;
  }
  Rng rng = Rng::derive(seed, "eval/reference/" + spec.layout_name);
  const ReferenceScores ref = compute_reference_scores(spec, rng);
  save_reference_scores(ref, path);
  return ref;
}

namespace {

// previous-value (staircase) interpolation
double interpolate(const LearningCurve& curve, std::int64_t step) {
  double value = curve.points.front().second;
  for (const auto& [s, score] : curve.points) {
    if (s > step) break;
    value = score;
  }
  return value;
}

struct MethodBand {
  std::string label;
  std::vector<std::int64_t> grid;
  std::vector<double> mean;
  std::vector<double> stddev;
};

std::vector<MethodBand> aggregate(const std::vector<LearningCurve>& curves) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const LearningCurve*>> by_method;
  for (const auto& c : curves) {
    if (c.points.empty()) throw std::invalid_argument("emit_plots: empty curve");
    if (by_method.find(c.method_label) == by_method.end()) order.push_back(c.method_label);
    by_method[c.method_label].push_back(&c);
  }
  std::vector<MethodBand> bands;
  for (const auto& label : order) {
    const auto& members = by_method[label];
    MethodBand band;
    band.label = label;
    std::int64_t last_step = members.front()->points.back().first;
    for (const auto* c : members)
      last_step = std::min(last_step, c->points.back().first);
    std::vector<std::int64_t> grid;
    for (const auto* c : members)
      for (const auto& [s, score] : c->points)
        if (s <= last_step) grid.push_back(s);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    band.grid = grid;
    for (std::int64_t s : grid) {
      double sum = 0.0;
      for (const auto* c : members) sum += interpolate(*c, s);
      const double mean = sum / static_cast<double>(members.size());
      double sq = 0.0;
      for (const auto* c : members) {
        const double v = interpolate(*c, s);
        sq += (v - mean) * (v - mean);
      }
      band.mean.push_back(mean);
      band.stddev.push_back(std::sqrt(sq / static_cast<double>(members.size())));
    }
    bands.push_back(std::move(band));
  }
  return bands;
}

const char* kPalette[6] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};

}  // namespace

void emit_plots(const std::vector<LearningCurve>& curves, const std::string& svg_path,
                const std::string& csv_path, const std::string& title) {
  if (curves.empty()) throw std::invalid_argument("emit_plots: no curves");
  const std::vector<MethodBand> bands = aggregate(curves);

  // CSV with the aggregated bands
  {
    std::ofstream out(csv_path);
    if (!out) throw std::runtime_error("cannot open for writing: " + csv_path);
    out << "method,env_steps,mean,std\n";
    char buf[256];
    for (const auto& band : bands)
      for (std::size_t i = 0; i < band.grid.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%s,%lld,%.17g,%.17g\n", band.label.c_str(),
                      static_cast<long long>(band.grid[i]), band.mean[i], band.stddev[i]);
        out << buf;
      }
  }

  // plot geometry
  const double width = 800, height = 500;
  const double ml = 70, mr = 20, mt = 40, mb = 50;
  std::int64_t x_max = 1;
  double y_min = 0.0, y_max = 1.0;
  bool first = true;
  for (const auto& band : bands)
    for (std::size_t i = 0; i < band.grid.size(); ++i) {
      x_max = std::max(x_max, band.grid[i]);
      const double lo = band.mean[i] - band.stddev[i];
      const double hi = band.mean[i] + band.stddev[i];
      if (first) {
        y_min = lo;
        y_max = hi;
        first = false;
      } else {
        y_min = std::min(y_min, lo);
        y_max = std::max(y_max, hi);
      }
    }
  if (y_max - y_min < 1e-9) {
    y_min -= 1.0;
    y_max += 1.0;
  }
  const double pad = 0.05 * (y_max - y_min);
  y_min -= pad;
  y_max += pad;

  const auto sx = [&](double step) {
    return ml + (width - ml - mr) * step / static_cast<double>(x_max);
  };
  const auto sy = [&](double v) {
    return height - mb - (height - mt - mb) * (v - y_min) / (y_max - y_min);
  };

  std::ofstream out(svg_path);
  if (!out) throw std::runtime_error("cannot open for writing: " + svg_path);
  char buf[512];
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty())
    out << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" "
        << "font-family=\"sans-serif\">" << title << "</text>\n";

  // axes
  std::snprintf(buf, sizeof(buf),
                "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n", ml,
                height - mb, width - mr, height - mb);
  out << buf;
  std::snprintf(buf, sizeof(buf),
                "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n", ml, mt, ml,
                height - mb);
  out << buf;
  for (int t = 0; t <= 5; ++t) {
    const double xv = static_cast<double>(x_max) * t / 5.0;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%g\" y=\"%g\" text-anchor=\"middle\" font-size=\"11\" "
                  "font-family=\"sans-serif\">%lld</text>\n",
                  sx(xv), height - mb + 18, static_cast<long long>(xv));
    out << buf;
    const double yv = y_min + (y_max - y_min) * t / 5.0;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%g\" y=\"%g\" text-anchor=\"end\" font-size=\"11\" "
                  "font-family=\"sans-serif\">%.1f</text>\n",
                  ml - 6, sy(yv) + 4, yv);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%g\" y=\"%g\" text-anchor=\"middle\" font-size=\"12\" "
                "font-family=\"sans-serif\">environment steps</text>\n",
                ml + (width - ml - mr) / 2, height - 12);
  out << buf;
  std::snprintf(buf, sizeof(buf),
                "<text x=\"16\" y=\"%g\" text-anchor=\"middle\" font-size=\"12\" "
                "font-family=\"sans-serif\" transform=\"rotate(-90 16 %g)\">normalized score"
                "</text>\n",
                mt + (height - mt - mb) / 2, mt + (height - mt - mb) / 2);
  out << buf;

  for (std::size_t b = 0; b < bands.size(); ++b) {
    const MethodBand& band = bands[b];
    const char* color = kPalette[b % 6];
    if (band.grid.size() >= 2) {
      std::string poly = "<polygon fill=\"" + std::string(color) + "\" fill-opacity=\"0.2\" "
                         "stroke=\"none\" points=\"";
      for (std::size_t i = 0; i < band.grid.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%g,%g ", sx(static_cast<double>(band.grid[i])),
                      sy(band.mean[i] + band.stddev[i]));
        poly += buf;
      }
      for (std::size_t i = band.grid.size(); i-- > 0;) {
        std::snprintf(buf, sizeof(buf), "%g,%g ", sx(static_cast<double>(band.grid[i])),
                      sy(band.mean[i] - band.stddev[i]));
        poly += buf;
      }
      poly += "\"/>\n";
      out << poly;
    }
    std::string line = "<polyline fill=\"none\" stroke=\"" + std::string(color) +
                       "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < band.grid.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%g,%g ", sx(static_cast<double>(band.grid[i])),
                    sy(band.mean[i]));
      line += buf;
    }
    line += "\"/>\n";
    out << line;
    // legend entry
    const double ly = mt + 18.0 * static_cast<double>(b);
    std::snprintf(buf, sizeof(buf),
                  "<rect x=\"%g\" y=\"%g\" width=\"12\" height=\"12\" fill=\"%s\"/>\n",
                  width - mr - 150, ly, color);
    out << buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%g\" y=\"%g\" font-size=\"12\" font-family=\"sans-serif\">%s"
                  "</text>\n",
                  width - mr - 132, ly + 10, band.label.c_str());
    out << buf;
  }
  out << "</svg>\n";
}

void save_curves_csv(const std::vector<LearningCurve>& curves, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "method,seed,env_steps,score\n";
  char buf[256];
  for (const auto& c : curves)
    for (const auto& [steps, score] : c.points) {
      std::snprintf(buf, sizeof(buf), "%s,%d,%lld,%.17g\n", c.method_label.c_str(), c.seed,
                    static_cast<long long>(steps), score);
      out << buf;
    }
}

std::vector<LearningCurve> load_curves_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("curves csv: empty file " + path);
  std::vector<LearningCurve> curves;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string method, seed_s, steps_s, score_s;
    if (!std::getline(ls, method, ',') || !std::getline(ls, seed_s, ',') ||
        !std::getline(ls, steps_s, ',') || !std::getline(ls, score_s))
      throw std::runtime_error("curves csv: malformed line " + std::to_string(line_no));
    const int seed = std::stoi(seed_s);
    LearningCurve* curve = nullptr;
    for (auto& c : curves)
      if (c.method_label == method && c.seed == seed) curve = &c;
    if (curve == nullptr) {
      curves.push_back(LearningCurve{{}, seed, method});
      curve = &curves.back();
    }
    curve->points.emplace_back(std::stoll(steps_s), std::stod(score_s));
  }
  return curves;
}

}  // namespace aorl::eval
