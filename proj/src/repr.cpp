#include "aorl/repr.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace aorl::repr {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log sigma(x) without overflow on either tail
double log_sigmoid(double x) {
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

}  // namespace

RepresentationModel RepresentationModel::init(int obs_dim, int act_dim, int embed_dim,
                                              int hidden_dim, std::uint64_t seed) {
  RepresentationModel m;
  m.embed_dim = embed_dim;
  m.state_encoder = nn::Mlp::init(nn::MlpSpec::make({obs_dim, hidden_dim, embed_dim},
                                                    nn::Activation::relu, nn::Activation::identity,
                                                    derive_seed(seed, "state_encoder")));
  m.action_encoder = nn::Mlp::init(nn::MlpSpec::make({act_dim, hidden_dim, embed_dim},
                                                     nn::Activation::relu, nn::Activation::identity,
                                                     derive_seed(seed, "action_encoder")));
  return m;
}

Eigen::VectorXd encode_state(const RepresentationModel& m, const Eigen::VectorXd& s) {
  return nn::forward(m.state_encoder, s);
}

Eigen::MatrixXd encode_states(const RepresentationModel& m, const Eigen::MatrixXd& s) {
  return nn::forward(m.state_encoder, s);
}

Eigen::VectorXd encode_state_action(const RepresentationModel& m, const Eigen::VectorXd& s,
                                    const Eigen::VectorXd& a) {
  return nn::forward(m.state_encoder, s) + nn::forward(m.action_encoder, a);
}

Eigen::MatrixXd encode_state_actions(const RepresentationModel& m, const Eigen::MatrixXd& s,
                                     const Eigen::MatrixXd& a) {
  return nn::forward(m.state_encoder, s) + nn::forward(m.action_encoder, a);
}

ContrastiveResult contrastive_loss(const RepresentationModel& m, const ContrastiveBatch& batch,
                                   double lambda) {
  const Eigen::Index n = batch.anchor.cols();
  if (n == 0) throw std::invalid_argument("contrastive_loss: empty batch");
  if (batch.action.cols() != n || batch.positive.cols() != n || batch.negative.cols() != n)
    throw std::invalid_argument("contrastive_loss: batch columns disagree");
  if (lambda < 0.0) throw std::invalid_argument("contrastive_loss: lambda must be >= 0");

  nn::ForwardTrace trace_anchor, trace_pos, trace_neg, trace_act;
  const Eigen::MatrixXd v = nn::forward(m.state_encoder, batch.anchor, trace_anchor);
  const Eigen::MatrixXd v_pos = nn::forward(m.state_encoder, batch.positive, trace_pos);
  const Eigen::MatrixXd v_neg = nn::forward(m.state_encoder, batch.negative, trace_neg);
  const Eigen::MatrixXd v_act = nn::forward(m.action_encoder, batch.action, trace_act);
  const Eigen::MatrixXd v_hat = v + v_act;          // state-action embedding
  const Eigen::MatrixXd diff = v_hat - v_pos;       // transition mismatch

  const Eigen::ArrayXd dots_pos = (v.array() * v_pos.array()).colwise().sum().transpose();
  const Eigen::ArrayXd dots_neg = (v.array() * v_neg.array()).colwise().sum().transpose();

  double loss = 0.0;
  Eigen::ArrayXd one_minus_p(n), q(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    loss += log_sigmoid(dots_pos[i]) + log_sigmoid(-dots_neg[i]) -
            lambda * diff.col(i).squaredNorm();
    one_minus_p[i] = 1.0 - sigmoid(dots_pos[i]);
    q[i] = sigmoid(dots_neg[i]);
  }
  loss /= static_cast<double>(n);
  if (!std::isfinite(loss))
    throw std::runtime_error("contrastive_loss: non-finite loss value");

  // gradients of -L, averaged over the batch
  const double scale = -1.0 / static_cast<double>(n);
  Eigen::MatrixXd g_v = scale * (v_pos * one_minus_p.matrix().asDiagonal() -
                                 v_neg * q.matrix().asDiagonal() - 2.0 * lambda * diff);
  Eigen::MatrixXd g_pos =
      scale * (v * one_minus_p.matrix().asDiagonal() + 2.0 * lambda * diff);
  Eigen::MatrixXd g_neg = scale * (-(v * q.matrix().asDiagonal()));
  Eigen::MatrixXd g_act = scale * (-2.0 * lambda * diff);

  ContrastiveResult result;
  result.loss = loss;
  result.state_encoder_grad = nn::backward(m.state_encoder, trace_anchor, g_v);
  result.state_encoder_grad += nn::backward(m.state_encoder, trace_pos, g_pos);
  result.state_encoder_grad += nn::backward(m.state_encoder, trace_neg, g_neg);
  result.action_encoder_grad = nn::backward(m.action_encoder, trace_act, g_act);
  return result;
}

Aggregator aggregator_from_string(const std::string& s) {
  if (s == "max") return Aggregator::max;
  if (s == "mean") return Aggregator::mean;
  if (s == "min") return Aggregator::min;
  if (s == "var") return Aggregator::var;
  throw std::invalid_argument("unknown aggregator: " + s);
}

std::string to_string(Aggregator a) {
  switch (a) {
    case Aggregator::max: return "max";
    case Aggregator::mean: return "mean";
    case Aggregator::min: return "min";
    case Aggregator::var: return "var";
  }
  throw std::logic_error("unknown aggregator");
}

RepresentationEnsemble RepresentationEnsemble::init(const EnsembleConfig& cfg, int obs_dim,
                                                    int act_dim, std::uint64_t seed) {
  if (cfg.count < 1) throw std::invalid_argument("ensemble: count must be >= 1");
  RepresentationEnsemble e;
  e.lambda = cfg.lambda;
  e.models.reserve(static_cast<std::size_t>(cfg.count));
  for (int k = 0; k < cfg.count; ++k) {
    const std::uint64_t model_seed = derive_seed(seed, "repr/model/" + std::to_string(k));
    e.models.push_back(
        RepresentationModel::init(obs_dim, act_dim, cfg.embed_dim, cfg.hidden_dim, model_seed));
    e.state_opt.push_back(
        nn::AdamState::init(e.models.back().state_encoder.spec.parameter_count(), cfg.lr));
    e.action_opt.push_back(
        nn::AdamState::init(e.models.back().action_encoder.spec.parameter_count(), cfg.lr));
  }
  return e;
}

void train_ensemble(RepresentationEnsemble& e, const data::Dataset& d, int steps, int batch_size,
                    std::uint64_t seed, std::uint64_t epoch) {
  if (d.transitions.empty()) throw std::invalid_argument("train_ensemble: dataset is empty");
  for (int k = 0; k < e.count(); ++k) {
    Rng rng = Rng::derive(seed, "repr/batches/" + std::to_string(k) + "/" + std::to_string(epoch));
    for (int step = 0; step < steps; ++step) {
      const data::Batch b = data::sample_batch(d, batch_size, rng);
      ContrastiveBatch cb{b.obs, b.act, b.next_obs, b.neg_obs};
      const ContrastiveResult r = contrastive_loss(e.models[static_cast<std::size_t>(k)], cb, e.lambda);
      nn::adam_step(e.models[static_cast<std::size_t>(k)].state_encoder, r.state_encoder_grad,
                    e.state_opt[static_cast<std::size_t>(k)]);
      nn::adam_step(e.models[static_cast<std::size_t>(k)].action_encoder, r.action_encoder_grad,
                    e.action_opt[static_cast<std::size_t>(k)]);
    }
  }
}

Eigen::MatrixXd similarity_matrix(const std::vector<Eigen::VectorXd>& embeddings) {
  const int k = static_cast<int>(embeddings.size());
  for (const auto& v : embeddings)
    if (v.size() != embeddings.front().size())
      throw std::invalid_argument("similarity_matrix: embedding lengths disagree");
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) {
      const double d2 = (embeddings[static_cast<std::size_t>(i)] -
                         embeddings[static_cast<std::size_t>(j)])
                            .squaredNorm();
      s(i, j) = d2;
      s(j, i) = d2;
    }
  return s;
}

double aggregate_similarity(const Eigen::MatrixXd& similarity, Aggregator agg) {
  const Eigen::Index k = similarity.rows();
  if (k < 2) return 0.0;
  double max_v = -1.0, min_v = -1.0, sum = 0.0, sum_sq = 0.0;
  int count = 0;
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = i + 1; j < k; ++j) {
      const double v = similarity(i, j);
      if (count == 0 || v > max_v) max_v = v;
      if (count == 0 || v < min_v) min_v = v;
      sum += v;
      sum_sq += v * v;
      ++count;
    }
  const double mean = sum / count;
  switch (agg) {
    case Aggregator::max: return max_v;
    case Aggregator::mean: return mean;
    case Aggregator::min: return min_v;
    case Aggregator::var: return sum_sq / count - mean * mean;
  }
  throw std::logic_error("unknown aggregator");
}

UncertaintyEstimate uncertainty_state(const RepresentationEnsemble& e, const Eigen::VectorXd& s,
                                      Aggregator agg) {
  std::vector<Eigen::VectorXd> embeddings;
  embeddings.reserve(e.models.size());
  for (const auto& m : e.models) embeddings.push_back(encode_state(m, s));
  UncertaintyEstimate u;
  u.similarity = similarity_matrix(embeddings);
  u.value = aggregate_similarity(u.similarity, agg);
  return u;
}

UncertaintyEstimate uncertainty_state_action(const RepresentationEnsemble& e,
                                             const Eigen::VectorXd& s, const Eigen::VectorXd& a,
                                             Aggregator agg) {
  std::vector<Eigen::VectorXd> embeddings;
  embeddings.reserve(e.models.size());
  for (const auto& m : e.models) embeddings.push_back(encode_state_action(m, s, a));
  UncertaintyEstimate u;
  u.similarity = similarity_matrix(embeddings);
  u.value = aggregate_similarity(u.similarity, agg);
  return u;
}

namespace {

// per-column aggregates over the K embedding matrices
Eigen::VectorXd aggregate_columns(const std::vector<Eigen::MatrixXd>& embeddings, Aggregator agg) {
  const int k = static_cast<int>(embeddings.size());
  const Eigen::Index n = embeddings.empty() ? 0 : embeddings.front().cols();
  if (k < 2) return Eigen::VectorXd::Zero(n);
  const int pairs = k * (k - 1) / 2;
  Eigen::MatrixXd d2(pairs, n);
  int row = 0;
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j)
      d2.row(row++) = (embeddings[static_cast<std::size_t>(i)] -
                       embeddings[static_cast<std::size_t>(j)])
                          .colwise()
                          .squaredNorm();
  switch (agg) {
    case Aggregator::max: return d2.colwise().maxCoeff();
    case Aggregator::mean: return d2.colwise().mean();
    case Aggregator::min: return d2.colwise().minCoeff();
    case Aggregator::var: {
      const Eigen::RowVectorXd mean = d2.colwise().mean();
      return (d2.array().square().colwise().mean() - mean.array().square()).transpose();
    }
  }
  throw std::logic_error("unknown aggregator");
}

}  // namespace

Eigen::VectorXd state_uncertainties(const RepresentationEnsemble& e, const Eigen::MatrixXd& states,
                                    Aggregator agg) {
  std::vector<Eigen::MatrixXd> embeddings;
  embeddings.reserve(e.models.size());
  for (const auto& m : e.models) embeddings.push_back(encode_states(m, states));
  return aggregate_columns(embeddings, agg);
}

Eigen::VectorXd state_action_uncertainties(const RepresentationEnsemble& e,
                                           const Eigen::VectorXd& s,
                                           const Eigen::MatrixXd& actions, Aggregator agg) {
  std::vector<Eigen::MatrixXd> embeddings;
  embeddings.reserve(e.models.size());
  for (const auto& m : e.models) {
    const Eigen::VectorXd vs = encode_state(m, s);
    Eigen::MatrixXd va = nn::forward(m.action_encoder, actions);
    va.colwise() += vs;
    embeddings.push_back(std::move(va));
  }
  return aggregate_columns(embeddings, agg);
}

namespace {
constexpr char kEnsembleMagic[4] = {'A', 'O', 'R', 'E'};
constexpr std::uint32_t kEnsembleVersion = 1;

template <typename T>
void write_le(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw std::runtime_error("ensemble checkpoint: unexpected end of stream");
  return value;
}
}  // namespace

void save_ensemble(const RepresentationEnsemble& e, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.write(kEnsembleMagic, 4);
  write_le<std::uint32_t>(out, kEnsembleVersion);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.models.size()));
  write_le<double>(out, e.lambda);
  write_le<std::uint32_t>(out,
                          static_cast<std::uint32_t>(e.models.empty() ? 0 : e.models.front().embed_dim));
  write_le<std::uint8_t>(out, static_cast<std::uint8_t>(e.default_aggregator));
  for (const auto& m : e.models) {
    nn::save_mlp(m.state_encoder, out);
    nn::save_mlp(m.action_encoder, out);
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

RepresentationEnsemble load_ensemble(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kEnsembleMagic, 4) != 0)
    throw std::runtime_error("ensemble checkpoint: bad magic");
  const auto version = read_le<std::uint32_t>(in);
  if (version != kEnsembleVersion)
    throw std::runtime_error("ensemble checkpoint: unsupported version");
  const auto count = read_le<std::uint32_t>(in);
  RepresentationEnsemble e;
  e.lambda = read_le<double>(in);
  const auto embed_dim = read_le<std::uint32_t>(in);
  const auto agg = read_le<std::uint8_t>(in);
  if (agg > 3) throw std::runtime_error("ensemble checkpoint: corrupt aggregator");
  e.default_aggregator = static_cast<Aggregator>(agg);
  for (std::uint32_t k = 0; k < count; ++k) {
    RepresentationModel m;
    m.state_encoder = nn::load_mlp(in);
    m.action_encoder = nn::load_mlp(in);
    m.embed_dim = static_cast<int>(embed_dim);
    e.models.push_back(std::move(m));
    e.state_opt.push_back(nn::AdamState::init(e.models.back().state_encoder.spec.parameter_count()));
    e.action_opt.push_back(nn::AdamState::init(e.models.back().action_encoder.spec.parameter_count()));
  }
  return e;
}

}  // namespace aorl::repr
