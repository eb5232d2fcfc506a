#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "aorl/data.hpp"
#include "aorl/nn.hpp"
#include "aorl/rng.hpp"

namespace aorl::repr {

// Paired encoders: the state encoder embeds a state on its own, and a
// state-action pair embeds as state encoding plus action encoding.
struct RepresentationModel {
  nn::Mlp state_encoder;   // obs_dim -> embed_dim
  nn::Mlp action_encoder;  // act_dim -> embed_dim
  int embed_dim = 0;

  static RepresentationModel init(int obs_dim, int act_dim, int embed_dim, int hidden_dim,
                                  std::uint64_t seed);
};

Eigen::VectorXd encode_state(const RepresentationModel& m, const Eigen::VectorXd& s);
Eigen::MatrixXd encode_states(const RepresentationModel& m, const Eigen::MatrixXd& s);
Eigen::VectorXd encode_state_action(const RepresentationModel& m, const Eigen::VectorXd& s,
                                    const Eigen::VectorXd& a);
Eigen::MatrixXd encode_state_actions(const RepresentationModel& m, const Eigen::MatrixXd& s,
                                     const Eigen::MatrixXd& a);

// Noise-contrastive objective over (s, a, s', s'') with a transition term:
// pull the next-state embedding toward the anchor, push the negative away,
// and tie the state-action embedding to the next-state embedding.
struct ContrastiveBatch {
  Eigen::MatrixXd anchor;     // s
  Eigen::MatrixXd action;     // a
  Eigen::MatrixXd positive;   // s'
  Eigen::MatrixXd negative;   // s''
};

struct ContrastiveResult {
  double loss = 0.0;                    // batch-mean L, to be maximized
  Eigen::VectorXd state_encoder_grad;   // gradient of -L
  Eigen::VectorXd action_encoder_grad;  // gradient of -L
};

ContrastiveResult contrastive_loss(const RepresentationModel& m, const ContrastiveBatch& batch,
                                   double lambda);

enum class Aggregator { max = 0, mean = 1, min = 2, var = 3 };

Aggregator aggregator_from_string(const std::string& s);
std::string to_string(Aggregator a);

struct EnsembleConfig {
  int count = 5;          // K
  double lambda = 1.0;    // transition-term weight
  int embed_dim = 32;
  int hidden_dim = 64;
  double lr = 3e-4;
};

// K models with independent seeds, each carrying its own optimizer state so
// training can continue across collection epochs without a restart.
struct RepresentationEnsemble {
  std::vector<RepresentationModel> models;
  std::vector<nn::AdamState> state_opt;
  std::vector<nn::AdamState> action_opt;
  double lambda = 1.0;
  Aggregator default_aggregator = Aggregator::max;  // carried in the checkpoint metadata

  static RepresentationEnsemble init(const EnsembleConfig& cfg, int obs_dim, int act_dim,
                                     std::uint64_t seed);
  int count() const { return static_cast<int>(models.size()); }
};

// Each member trains on its own seed-derived batch stream; no weight sharing.
void train_ensemble(RepresentationEnsemble& e, const data::Dataset& d, int steps, int batch_size,
                    std::uint64_t seed, std::uint64_t epoch = 0);

// S[i][j] = squared distance between embeddings i and j.
Eigen::MatrixXd similarity_matrix(const std::vector<Eigen::VectorXd>& embeddings);

// Aggregate of the strict upper triangle of S: max/mean/min of the pairwise
// squared distances, or their population variance. Zero when K < 2.
double aggregate_similarity(const Eigen::MatrixXd& similarity, Aggregator agg);

struct UncertaintyEstimate {
  Eigen::MatrixXd similarity;
  double value = 0.0;
};

UncertaintyEstimate uncertainty_state(const RepresentationEnsemble& e, const Eigen::VectorXd& s,
                                      Aggregator agg = Aggregator::max);
UncertaintyEstimate uncertainty_state_action(const RepresentationEnsemble& e,
                                             const Eigen::VectorXd& s, const Eigen::VectorXd& a,
                                             Aggregator agg = Aggregator::max);

// Batched state uncertainties (one column per state); used for threshold
// quantiles and uncertainty maps.
Eigen::VectorXd state_uncertainties(const RepresentationEnsemble& e, const Eigen::MatrixXd& states,
                                    Aggregator agg = Aggregator::max);

// Batched state-action uncertainties for M candidate actions at one state.
Eigen::VectorXd state_action_uncertainties(const RepresentationEnsemble& e,
                                           const Eigen::VectorXd& s,
                                           const Eigen::MatrixXd& actions,
                                           Aggregator agg = Aggregator::max);

// Checkpoint: ensemble header (K, lambda, embed_dim, aggregator) followed by
// the 2K encoder checkpoints.
void save_ensemble(const RepresentationEnsemble& e, const std::string& path);
RepresentationEnsemble load_ensemble(const std::string& path);

}  // namespace aorl::repr
