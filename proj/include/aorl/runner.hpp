#pragma once

#include <string>

#include "aorl/config.hpp"
#include "aorl/data.hpp"
#include "aorl/env.hpp"
#include "aorl/eval.hpp"
#include "aorl/restricted.hpp"

namespace aorl::cli {

// Offline-phase products shared by every collection mode. Training always
// round-trips through the checkpoint files, so a warm start from an earlier
// `offline` run and a cold start inside a collection run are byte-identical.
struct OfflineArtifacts {
  offline::Learner learner;
  repr::RepresentationEnsemble ensemble;
};

// Loads the offline policy/critics/ensemble for this seed from `dir` when a
// matching stamp is present; trains, saves, and reloads them otherwise.
OfflineArtifacts prepare_offline(const ExperimentConfig& cfg, const data::Dataset& d,
                                 const env::MazeSpec& spec, int seed, const std::string& dir);

// Executes the configured mode for every seed, writing artifacts and a
// manifest under out_dir/<mode>/seed<k>/. Throws ConfigError for
// configuration problems and std::runtime_error for runtime failures.
void run(const ExperimentConfig& cfg);

// Online-from-scratch training: empty initial dataset, alpha = 0, one
// collected transition followed by train_updates_per_step gradient updates.
// The active variant collects with the uncertainty machinery; the baseline
// variant rolls the current policy out from the initial distribution with
// exploration noise.
struct OnlineResult {
  std::vector<active::CurvePoint> curve;
  offline::Learner learner;
  data::Dataset dataset;
};

OnlineResult online_loop(const env::MazeSpec& spec, const ExperimentConfig& cfg, int seed,
                         const eval::ReferenceScores& ref);

// One collection run (active, restricted, ft, or one ablation arm) on top of
// prepared offline artifacts; dispatches to the matching epoch collector.
active::ActiveLoopResult collection_run(const ExperimentConfig& cfg, const env::MazeSpec& spec,
                                        const data::Dataset& d0, OfflineArtifacts& artifacts,
                                        int seed, const eval::ReferenceScores& ref,
                                        const std::string& arm_label);

}  // namespace aorl::cli
