#include "aorl/offline.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace aorl::offline {

// largest action magnitude present in the data; used as the actor's tanh scale
double action_bound_from(const data::Dataset& d) {
  double bound = 0.0;
  for (const auto& t : d.transitions) bound = std::max(bound, t.act.cwiseAbs().maxCoeff());
  return bound > 0.0 ? bound : 1.0;
}

Eigen::MatrixXd DeterministicPolicy::normalize(const Eigen::MatrixXd& obs) const {
  Eigen::MatrixXd out = obs.colwise() - obs_mean;
  out.array().colwise() /= obs_std.array();
  return out;
}

Eigen::VectorXd DeterministicPolicy::act(const Eigen::VectorXd& obs) const {
  return act_batch(obs).col(0);
}

Eigen::MatrixXd DeterministicPolicy::act_batch(const Eigen::MatrixXd& obs) const {
  return action_bound * nn::forward(actor, normalize(obs));
}

void soft_update(nn::Mlp& target, const nn::Mlp& online, double tau) {
  if (target.parameters.size() != online.parameters.size())
    throw std::invalid_argument("soft_update: parameter size mismatch");
  target.parameters = (1.0 - tau) * target.parameters + tau * online.parameters;
}

double alpha_schedule(double alpha0, double decay_factor, int epoch_index, int n_epochs) {
  if (epoch_index < 0) throw std::invalid_argument("alpha_schedule: negative epoch index");
  if (n_epochs <= 1) return alpha0;
  const double t = static_cast<double>(epoch_index) / static_cast<double>(n_epochs - 1);
  return alpha0 * std::pow(decay_factor, -t);
}

void observation_stats(const data::Dataset& d, Eigen::VectorXd& mean, Eigen::VectorXd& std) {
  const Eigen::MatrixXd obs = data::observation_matrix(d);
  if (obs.cols() == 0) throw std::invalid_argument("observation_stats: dataset is empty");
  mean = obs.rowwise().mean();
  const Eigen::MatrixXd centered = obs.colwise() - mean;
  std = (centered.array().square().rowwise().mean()).sqrt().matrix();
  std = std.cwiseMax(1e-3);
}

LossResult bc_loss(const DeterministicPolicy& policy, const Eigen::MatrixXd& obs,
                   const Eigen::MatrixXd& act) {
  const Eigen::Index n = obs.cols();
  if (n == 0 || act.cols() != n) throw std::invalid_argument("bc_loss: bad batch shapes");
  nn::ForwardTrace trace;
  const Eigen::MatrixXd raw = nn::forward(policy.actor, policy.normalize(obs), trace);
  const Eigen::MatrixXd pi = policy.action_bound * raw;
  const Eigen::MatrixXd diff = pi - act;
  LossResult r;
  r.loss = diff.squaredNorm() / static_cast<double>(n);
  const Eigen::MatrixXd out_grad =
      (2.0 * policy.action_bound / static_cast<double>(n)) * diff;
  r.grad = nn::backward(policy.actor, trace, out_grad);
  return r;
}

namespace {

Eigen::MatrixXd critic_input(const DeterministicPolicy& policy, const Eigen::MatrixXd& obs,
                             const Eigen::MatrixXd& act) {
  Eigen::MatrixXd in(obs.rows() + act.rows(), obs.cols());
  in.topRows(obs.rows()) = policy.normalize(obs);
  in.bottomRows(act.rows()) = act;
  return in;
}

}  // namespace

CriticLossResult td3_critic_loss(const CriticPair& critics, const DeterministicPolicy& policy,
                                 const Eigen::MatrixXd& obs, const Eigen::MatrixXd& act,
                                 const Eigen::VectorXd& target) {
  const Eigen::Index n = obs.cols();
  if (target.size() != n) throw std::invalid_argument("td3_critic_loss: target size mismatch");
  const Eigen::MatrixXd in = critic_input(policy, obs, act);
  nn::ForwardTrace t1, t2;
  const Eigen::MatrixXd q1 = nn::forward(critics.q1, in, t1);
  const Eigen::MatrixXd q2 = nn::forward(critics.q2, in, t2);
  const Eigen::RowVectorXd err1 = q1.row(0) - target.transpose();
  const Eigen::RowVectorXd err2 = q2.row(0) - target.transpose();
  CriticLossResult r;
  r.loss = (err1.squaredNorm() + err2.squaredNorm()) / static_cast<double>(n);
  r.q1_grad = nn::backward(critics.q1, t1, (2.0 / static_cast<double>(n)) * err1);
  r.q2_grad = nn::backward(critics.q2, t2, (2.0 / static_cast<double>(n)) * err2);
  return r;
}

Eigen::VectorXd td3_target(const CriticPair& critics, const DeterministicPolicy& policy,
                           const nn::Mlp& actor_target, const data::Batch& batch,
                           const OfflineConfig& cfg, Rng& rng) {
  const Eigen::Index n = batch.next_obs.cols();
  const Eigen::Index act_dim = batch.act.rows();
  const double bound = policy.action_bound;

  Eigen::MatrixXd next_act =
      bound * nn::forward(actor_target, policy.normalize(batch.next_obs));
  // smoothing noise is relative to the action bound, as in TD3
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < act_dim; ++j) {
      const double noise = bound * std::clamp(cfg.policy_noise * rng.normal(), -cfg.noise_clip,
                                              cfg.noise_clip);
      next_act(j, i) = std::clamp(next_act(j, i) + noise, -bound, bound);
    }

  const Eigen::MatrixXd in = critic_input(policy, batch.next_obs, next_act);
  const Eigen::RowVectorXd q1 = nn::forward(critics.q1_target, in).row(0);
  const Eigen::RowVectorXd q2 = nn::forward(critics.q2_target, in).row(0);
  const Eigen::ArrayXd q_min = q1.cwiseMin(q2).transpose().array();
  return (batch.rew.array() + cfg.gamma * (1.0 - batch.done.array()) * q_min).matrix();
}

LossResult td3bc_actor_loss(const DeterministicPolicy& policy, const CriticPair& critics,
                            const Eigen::MatrixXd& obs, const Eigen::MatrixXd& act, double alpha,
                            bool normalize_q_scale) {
  const Eigen::Index n = obs.cols();
  const Eigen::Index act_dim = act.rows();
  nn::ForwardTrace actor_trace;
  const Eigen::MatrixXd raw = nn::forward(policy.actor, policy.normalize(obs), actor_trace);
  const Eigen::MatrixXd pi = policy.action_bound * raw;

  Eigen::MatrixXd in(obs.rows() + act_dim, n);
  in.topRows(obs.rows()) = policy.normalize(obs);
  in.bottomRows(act_dim) = pi;
  nn::ForwardTrace q_trace;
  const Eigen::RowVectorXd q = nn::forward(critics.q1, in, q_trace).row(0);

  // detached scale on the Q term when the original normalized form is on
  const double q_scale = normalize_q_scale ? alpha / (q.cwiseAbs().mean() + 1e-8) : 1.0;
  const double bc_weight = normalize_q_scale ? 1.0 : alpha;

  const Eigen::MatrixXd diff = pi - act;
  LossResult r;
  r.loss = -q_scale * q.mean() + bc_weight * diff.squaredNorm() / static_cast<double>(n);

  // dLoss/dQ_i = -q_scale/n, routed through the critic to its action inputs
  Eigen::MatrixXd critic_in_grad;
  const Eigen::MatrixXd q_out_grad =
      Eigen::MatrixXd::Constant(1, n, -q_scale / static_cast<double>(n));
  nn::backward(critics.q1, q_trace, q_out_grad, &critic_in_grad);
  Eigen::MatrixXd d_pi = critic_in_grad.bottomRows(act_dim);
  d_pi += (2.0 * bc_weight / static_cast<double>(n)) * diff;

  r.grad = nn::backward(policy.actor, actor_trace, policy.action_bound * d_pi);
  return r;
}

Learner Learner::init(int obs_dim, int act_dim, const OfflineConfig& cfg, double action_bound,
                      const Eigen::VectorXd& obs_mean, const Eigen::VectorXd& obs_std,
                      std::uint64_t seed) {
  Learner l;
  l.policy.actor = nn::Mlp::init(
      nn::MlpSpec::make({obs_dim, cfg.hidden_dim, cfg.hidden_dim, act_dim}, nn::Activation::relu,
                        nn::Activation::tanh, derive_seed(seed, "actor")));
  l.policy.obs_mean = obs_mean;
  l.policy.obs_std = obs_std;
  l.policy.action_bound = action_bound;
  l.actor_target = l.policy.actor;

  const auto critic_spec = [&](const char* label) {
    return nn::MlpSpec::make({obs_dim + act_dim, cfg.hidden_dim, cfg.hidden_dim, 1},
                             nn::Activation::relu, nn::Activation::identity,
                             derive_seed(seed, label));
  };
  l.critics.q1 = nn::Mlp::init(critic_spec("q1"));
  l.critics.q2 = nn::Mlp::init(critic_spec("q2"));
  l.critics.q1_target = l.critics.q1;
  l.critics.q2_target = l.critics.q2;
  l.critics.tau = cfg.tau;

  l.actor_opt = nn::AdamState::init(l.policy.actor.spec.parameter_count(), cfg.lr);
  l.q1_opt = nn::AdamState::init(l.critics.q1.spec.parameter_count(), cfg.lr);
  l.q2_opt = nn::AdamState::init(l.critics.q2.spec.parameter_count(), cfg.lr);
  return l;
}

void Learner::update(const data::Dataset& d, const OfflineConfig& cfg, double alpha, Rng& rng) {
  const data::Batch batch = data::sample_batch(d, cfg.batch_size, rng);
  const Eigen::VectorXd target = td3_target(critics, policy, actor_target, batch, cfg, rng);
  const CriticLossResult closs = td3_critic_loss(critics, policy, batch.obs, batch.act, target);
  if (!std::isfinite(closs.loss))
    throw std::runtime_error("td3bc: non-finite critic loss at update " +
                             std::to_string(update_count));
  nn::adam_step(critics.q1, closs.q1_grad, q1_opt);
  nn::adam_step(critics.q2, closs.q2_grad, q2_opt);
  ++update_count;

  if (update_count % cfg.policy_delay == 0) {
    const LossResult aloss =
        td3bc_actor_loss(policy, critics, batch.obs, batch.act, alpha, cfg.normalize_q_scale);
    if (!std::isfinite(aloss.loss))
      throw std::runtime_error("td3bc: non-finite actor loss at update " +
                               std::to_string(update_count));
    nn::adam_step(policy.actor, aloss.grad, actor_opt);
    soft_update(critics.q1_target, critics.q1, cfg.tau);
    soft_update(critics.q2_target, critics.q2, cfg.tau);
    soft_update(actor_target, policy.actor, cfg.tau);
  }
}

DeterministicPolicy bc_train(const data::Dataset& d, const OfflineConfig& cfg,
                             std::uint64_t seed) {
  if (d.transitions.empty()) throw std::invalid_argument("bc_train: dataset is empty");
  const int obs_dim = static_cast<int>(d.transitions.front().obs.size());
  const int act_dim = static_cast<int>(d.transitions.front().act.size());

  DeterministicPolicy policy;
  policy.actor = nn::Mlp::init(
      nn::MlpSpec::make({obs_dim, cfg.hidden_dim, cfg.hidden_dim, act_dim}, nn::Activation::relu,
                        nn::Activation::tanh, derive_seed(seed, "bc/actor")));
  observation_stats(d, policy.obs_mean, policy.obs_std);
  policy.action_bound = action_bound_from(d);

  nn::AdamState opt = nn::AdamState::init(policy.actor.spec.parameter_count(), cfg.lr);
  Rng rng = Rng::derive(seed, "bc/batches");
  for (int step = 0; step < cfg.steps; ++step) {
    const data::Batch batch = data::sample_batch(d, cfg.batch_size, rng);
    const LossResult r = bc_loss(policy, batch.obs, batch.act);
    nn::adam_step(policy.actor, r.grad, opt);
  }
  return policy;
}

Learner td3bc_train(const data::Dataset& d, const OfflineConfig& cfg, std::uint64_t seed) {
  if (d.transitions.empty()) throw std::invalid_argument("td3bc_train: dataset is empty");
  const int obs_dim = static_cast<int>(d.transitions.front().obs.size());
  const int act_dim = static_cast<int>(d.transitions.front().act.size());
  Eigen::VectorXd mean, std;
  observation_stats(d, mean, std);
  Learner learner = Learner::init(obs_dim, act_dim, cfg, action_bound_from(d), mean, std, seed);
  Rng rng = Rng::derive(seed, "td3bc/batches");
  for (int step = 0; step < cfg.steps; ++step) learner.update(d, cfg, cfg.alpha, rng);
  return learner;
}

void finetune_epoch(Learner& learner, const data::Dataset& d_augmented, const OfflineConfig& cfg,
                    int epoch_index, int updates, std::uint64_t seed) {
  const double alpha =
      alpha_schedule(cfg.alpha, cfg.alpha_decay_factor, epoch_index, cfg.n_epochs);
  Rng rng = Rng::derive(seed, "finetune/epoch/" + std::to_string(epoch_index));
  for (int u = 0; u < updates; ++u) learner.update(d_augmented, cfg, alpha, rng);
}

namespace {

constexpr char kPolicyMagic[4] = {'A', 'O', 'R', 'P'};
constexpr char kCriticMagic[4] = {'A', 'O', 'R', 'Q'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_le(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint: unexpected end of stream");
  return value;
}

void write_vector(std::ostream& out, const Eigen::VectorXd& v) {
  write_le<std::uint64_t>(out, static_cast<std::uint64_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) write_le<double>(out, v[i]);
}

Eigen::VectorXd read_vector(std::istream& in) {
  const auto n = read_le<std::uint64_t>(in);
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = read_le<double>(in);
  return v;
}

}  // namespace

void save_policy(const DeterministicPolicy& policy, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.write(kPolicyMagic, 4);
  write_le<std::uint32_t>(out, kVersion);
  write_le<double>(out, policy.action_bound);
  write_vector(out, policy.obs_mean);
  write_vector(out, policy.obs_std);
  nn::save_mlp(policy.actor, out);
  if (!out) throw std::runtime_error("write failed: " + path);
}

DeterministicPolicy load_policy(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kPolicyMagic, 4) != 0)
    throw std::runtime_error("policy checkpoint: bad magic");
  if (read_le<std::uint32_t>(in) != kVersion)
    throw std::runtime_error("policy checkpoint: unsupported version");
  DeterministicPolicy policy;
  policy.action_bound = read_le<double>(in);
  policy.obs_mean = read_vector(in);
  policy.obs_std = read_vector(in);
  policy.actor = nn::load_mlp(in);
  return policy;
}

void save_critics(const CriticPair& critics, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.write(kCriticMagic, 4);
  write_le<std::uint32_t>(out, kVersion);
  write_le<double>(out, critics.tau);
  nn::save_mlp(critics.q1, out);
  nn::save_mlp(critics.q2, out);
  nn::save_mlp(critics.q1_target, out);
  nn::save_mlp(critics.q2_target, out);
  if (!out) throw std::runtime_error("write failed: " + path);
}

CriticPair load_critics(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kCriticMagic, 4) != 0)
    throw std::runtime_error("critic checkpoint: bad magic");
  if (read_le<std::uint32_t>(in) != kVersion)
    throw std::runtime_error("critic checkpoint: unsupported version");
  CriticPair critics;
  critics.tau = read_le<double>(in);
  critics.q1 = nn::load_mlp(in);
  critics.q2 = nn::load_mlp(in);
  critics.q1_target = nn::load_mlp(in);
  critics.q2_target = nn::load_mlp(in);
  return critics;
}

}  // namespace aorl::offline
