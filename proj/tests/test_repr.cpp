#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "aorl/repr.hpp"
#include "gradcheck.hpp"

using namespace aorl;

namespace {

// single affine layer, identity activation, parameters set by hand
nn::Mlp linear_encoder(int in, int out, std::uint64_t seed = 0) {
  return nn::Mlp::init(
      nn::MlpSpec::make({in, out}, nn::Activation::identity, nn::Activation::identity, seed));
}

repr::RepresentationModel small_model(std::uint64_t seed) {
  return repr::RepresentationModel::init(3, 2, 4, 6, seed);
}

repr::ContrastiveBatch random_batch(int obs_dim, int act_dim, int n, Rng& rng) {
  repr::ContrastiveBatch b;
  b.anchor.resize(obs_dim, n);
  b.action.resize(act_dim, n);
  b.positive.resize(obs_dim, n);
  b.negative.resize(obs_dim, n);
  for (int i = 0; i < n; ++i) {
    b.anchor.col(i) = rng.normal_vector(obs_dim);
    b.action.col(i) = rng.normal_vector(act_dim);
    b.positive.col(i) = rng.normal_vector(obs_dim);
    b.negative.col(i) = rng.normal_vector(obs_dim);
  }
  return b;
}

data::Dataset toy_dataset(int n, Rng& rng) {
  data::Dataset d;
  for (int i = 0; i < n; ++i) {
    data::Transition t;
    t.obs = rng.normal_vector(3);
    t.act = rng.normal_vector(2);
    t.next_obs = t.obs + 0.1 * rng.normal_vector(3);
    t.episode_id = i;
    d.transitions.push_back(t);
  }
  return d;
}

}  // namespace

TEST_CASE("encode_state is the state encoder forward pass") {
  const repr::RepresentationModel m = small_model(1);
  const Eigen::Vector3d s(0.2, -1.0, 0.4);
  CHECK(repr::encode_state(m, s) == nn::forward(m.state_encoder, s));
  CHECK(repr::encode_state(m, s) == repr::encode_state(m, s));

  repr::RepresentationModel zero = m;
  zero.state_encoder.parameters.setZero();
  CHECK(repr::encode_state(zero, s).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("encode_state_action is the sum of the two encoders") {
  const repr::RepresentationModel m = small_model(2);
  const Eigen::Vector3d s(0.5, 0.1, -0.3);
  const Eigen::Vector2d a(0.7, -0.2);
  const Eigen::VectorXd sum =
      nn::forward(m.state_encoder, s) + nn::forward(m.action_encoder, a);
  CHECK(repr::encode_state_action(m, s, a) == sum);

  repr::RepresentationModel zero_action = m;
  zero_action.action_encoder.parameters.setZero();
  CHECK(repr::encode_state_action(zero_action, s, a) == repr::encode_state(zero_action, s));
}

TEST_CASE("contrastive loss hits the closed form on orthogonal embeddings") {
  // identity state encoder on R^3 so embeddings equal the inputs; the action
  // encoder contributes exactly v+ - v via its bias
  repr::RepresentationModel m;
  m.embed_dim = 3;
  m.state_encoder = linear_encoder(3, 3);
  m.state_encoder.parameters.setZero();
  m.state_encoder.weights(0).setIdentity();
  m.action_encoder = linear_encoder(2, 3);
  m.action_encoder.parameters.setZero();
  m.action_encoder.biases(0) << -1.0, 1.0, 0.0;

  repr::ContrastiveBatch b;
  b.anchor = Eigen::Vector3d(1.0, 0.0, 0.0);
  b.positive = Eigen::Vector3d(0.0, 1.0, 0.0);
  b.negative = Eigen::Vector3d(0.0, 0.0, 1.0);
  b.action = Eigen::Vector2d(0.0, 0.0);

  const repr::ContrastiveResult r = repr::contrastive_loss(m, b, 1.0);
  CHECK(r.loss == doctest::Approx(2.0 * std::log(0.5)).epsilon(1e-12));
  CHECK(r.loss == doctest::Approx(-1.3862944).epsilon(1e-6));
}

TEST_CASE("lambda zero removes the action encoder from the objective") {
  const repr::RepresentationModel m = small_model(3);
  Rng rng(4);
  const repr::ContrastiveBatch b = random_batch(3, 2, 8, rng);
  const repr::ContrastiveResult r = repr::contrastive_loss(m, b, 0.0);
  CHECK(r.action_encoder_grad.cwiseAbs().maxCoeff() == 0.0);
  CHECK(r.state_encoder_grad.cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("contrastive gradients match finite differences") {
  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    repr::RepresentationModel m = small_model(100 + trial);
    Rng rng(trial);
    gradcheck::jitter(m.state_encoder.parameters, rng);
    gradcheck::jitter(m.action_encoder.parameters, rng);
    const repr::ContrastiveBatch b = random_batch(3, 2, 5, rng);
    const double lambda = (trial % 3 == 0) ? 0.0 : 1.0;

    const repr::ContrastiveResult r = repr::contrastive_loss(m, b, lambda);
    // -L is the minimized quantity whose gradient the result carries
    const auto eval_state = [&]() { return -repr::contrastive_loss(m, b, lambda).loss; };
    const Eigen::VectorXd fd_state =
        gradcheck::central_differences(eval_state, m.state_encoder.parameters);
    CHECK(gradcheck::relative_error(r.state_encoder_grad, fd_state) < 1e-4);

    if (lambda > 0.0) {
      const Eigen::VectorXd fd_action =
          gradcheck::central_differences(eval_state, m.action_encoder.parameters);
      CHECK(gradcheck::relative_error(r.action_encoder_grad, fd_action) < 1e-4);
    }
  }
}

TEST_CASE("similarity matrix on hand-checked embeddings") {
  std::vector<Eigen::VectorXd> v(3);
  v[0] = Eigen::Vector2d(0.0, 0.0);
  v[1] = Eigen::Vector2d(1.0, 0.0);
  v[2] = Eigen::Vector2d(0.0, 2.0);
  const Eigen::MatrixXd s = repr::similarity_matrix(v);
  Eigen::Matrix3d expected;
  expected << 0, 1, 4, 1, 0, 5, 4, 5, 0;
  CHECK(s == expected);

  CHECK(repr::aggregate_similarity(s, repr::Aggregator::max) == 5.0);
  CHECK(repr::aggregate_similarity(s, repr::Aggregator::mean) ==
        doctest::Approx(10.0 / 3.0).epsilon(1e-15));
  CHECK(repr::aggregate_similarity(s, repr::Aggregator::min) == 1.0);
  // population variance of {1, 4, 5}
  const double mean = 10.0 / 3.0;
  const double var = ((1 - mean) * (1 - mean) + (4 - mean) * (4 - mean) +
                      (5 - mean) * (5 - mean)) / 3.0;
  CHECK(repr::aggregate_similarity(s, repr::Aggregator::var) ==
        doctest::Approx(var).epsilon(1e-12));

  // permuting the models permutes rows and columns; the max is unchanged
  std::vector<Eigen::VectorXd> perm{v[2], v[0], v[1]};
  const Eigen::MatrixXd sp = repr::similarity_matrix(perm);
  CHECK(repr::aggregate_similarity(sp, repr::Aggregator::max) == 5.0);
  CHECK(sp(0, 1) == s(2, 0));
  CHECK(sp(1, 2) == s(0, 1));
}

TEST_CASE("identical embeddings give a zero matrix and zero uncertainty") {
  std::vector<Eigen::VectorXd> v(4, Eigen::Vector3d(0.3, -0.7, 1.1));
  const Eigen::MatrixXd s = repr::similarity_matrix(v);
  CHECK(s.cwiseAbs().maxCoeff() == 0.0);
  for (auto agg : {repr::Aggregator::max, repr::Aggregator::mean, repr::Aggregator::min,
                   repr::Aggregator::var})
    CHECK(repr::aggregate_similarity(s, agg) == 0.0);
}

TEST_CASE("similarity rejects mismatched lengths; K=1 aggregates to zero") {
  std::vector<Eigen::VectorXd> bad(2);
  bad[0] = Eigen::Vector2d(0, 0);
  bad[1] = Eigen::Vector3d(0, 0, 0);
  CHECK_THROWS(repr::similarity_matrix(bad));

  std::vector<Eigen::VectorXd> one(1, Eigen::Vector2d(3.0, 4.0));
  CHECK(repr::aggregate_similarity(repr::similarity_matrix(one), repr::Aggregator::max) == 0.0);
}

TEST_CASE("uncertainty(max) equals an independent double-loop maximum") {
  repr::RepresentationEnsemble e = repr::RepresentationEnsemble::init(
      repr::EnsembleConfig{4, 1.0, 4, 6, 3e-4}, 3, 2, 11);
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::VectorXd s = rng.normal_vector(3);
    const repr::UncertaintyEstimate u = repr::uncertainty_state(e, s, repr::Aggregator::max);
    // independent recomputation
    double max_d2 = 0.0;
    for (int i = 0; i < e.count(); ++i)
      for (int j = 0; j < e.count(); ++j) {
        const double d2 = (repr::encode_state(e.models[i], s) -
                           repr::encode_state(e.models[j], s)).squaredNorm();
        max_d2 = std::max(max_d2, d2);
      }
    CHECK(u.value == max_d2);
    CHECK(u.similarity == u.similarity.transpose().eval());
    CHECK(u.similarity.diagonal().cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("batched state uncertainties agree with the scalar path") {
  repr::RepresentationEnsemble e = repr::RepresentationEnsemble::init(
      repr::EnsembleConfig{5, 1.0, 4, 6, 3e-4}, 3, 2, 13);
  Rng rng(14);
  Eigen::MatrixXd states(3, 10);
  for (int i = 0; i < 10; ++i) states.col(i) = rng.normal_vector(3);
  for (auto agg : {repr::Aggregator::max, repr::Aggregator::mean, repr::Aggregator::min,
                   repr::Aggregator::var}) {
    const Eigen::VectorXd batch = repr::state_uncertainties(e, states, agg);
    for (int i = 0; i < 10; ++i)
      CHECK(batch[i] ==
            doctest::Approx(repr::uncertainty_state(e, states.col(i), agg).value).epsilon(1e-12));
  }
}

TEST_CASE("batched state-action uncertainties agree with the scalar path") {
  repr::RepresentationEnsemble e = repr::RepresentationEnsemble::init(
      repr::EnsembleConfig{3, 1.0, 4, 6, 3e-4}, 3, 2, 15);
  Rng rng(16);
  const Eigen::VectorXd s = rng.normal_vector(3);
  Eigen::MatrixXd actions(2, 6);
  for (int i = 0; i < 6; ++i) actions.col(i) = rng.normal_vector(2);
  const Eigen::VectorXd batch =
      repr::state_action_uncertainties(e, s, actions, repr::Aggregator::max);
  for (int i = 0; i < 6; ++i)
    CHECK(batch[i] == doctest::Approx(repr::uncertainty_state_action(
                                          e, s, actions.col(i), repr::Aggregator::max)
                                          .value)
                          .epsilon(1e-12));
}

TEST_CASE("identical member seeds and batch streams give zero uncertainty") {
  repr::RepresentationModel a = repr::RepresentationModel::init(3, 2, 4, 6, 42);
  repr::RepresentationModel b = repr::RepresentationModel::init(3, 2, 4, 6, 42);
  nn::AdamState a_s = nn::AdamState::init(a.state_encoder.spec.parameter_count());
  nn::AdamState a_a = nn::AdamState::init(a.action_encoder.spec.parameter_count());
  nn::AdamState b_s = a_s, b_a = a_a;

  Rng data_rng(17);
  const data::Dataset d = toy_dataset(50, data_rng);
  for (auto* pair : {&a, &b}) {
    Rng rng(99);  // identical batch stream for both members
    nn::AdamState* so = (pair == &a) ? &a_s : &b_s;
    nn::AdamState* ao = (pair == &a) ? &a_a : &b_a;
    for (int step = 0; step < 20; ++step) {
      const data::Batch batch = data::sample_batch(d, 16, rng);
      const repr::ContrastiveResult r = repr::contrastive_loss(
          *pair, repr::ContrastiveBatch{batch.obs, batch.act, batch.next_obs, batch.neg_obs}, 1.0);
      nn::adam_step(pair->state_encoder, r.state_encoder_grad, *so);
      nn::adam_step(pair->action_encoder, r.action_encoder_grad, *ao);
    }
  }
  CHECK(a.state_encoder.parameters == b.state_encoder.parameters);

  repr::RepresentationEnsemble twins;
  twins.lambda = 1.0;
  twins.models = {a, b};
  Rng probe(18);
  const Eigen::VectorXd s = probe.normal_vector(3);
  CHECK(repr::uncertainty_state(twins, s, repr::Aggregator::max).value == 0.0);
}

TEST_CASE("train_ensemble with zero steps changes nothing; training is reproducible") {
  Rng data_rng(19);
  const data::Dataset d = toy_dataset(60, data_rng);
  const repr::EnsembleConfig cfg{3, 1.0, 4, 6, 3e-4};

  repr::RepresentationEnsemble e = repr::RepresentationEnsemble::init(cfg, 3, 2, 7);
  const Eigen::VectorXd before = e.models[0].state_encoder.parameters;
  repr::train_ensemble(e, d, 0, 16, 7);
  CHECK(e.models[0].state_encoder.parameters == before);

  repr::RepresentationEnsemble e1 = repr::RepresentationEnsemble::init(cfg, 3, 2, 7);
  repr::RepresentationEnsemble e2 = repr::RepresentationEnsemble::init(cfg, 3, 2, 7);
  repr::train_ensemble(e1, d, 30, 16, 7);
  repr::train_ensemble(e2, d, 30, 16, 7);
  for (int k = 0; k < 3; ++k) {
    CHECK(e1.models[k].state_encoder.parameters == e2.models[k].state_encoder.parameters);
    CHECK(e1.models[k].action_encoder.parameters == e2.models[k].action_encoder.parameters);
  }
  // distinct members actually diverged from one another
  CHECK(e1.models[0].state_encoder.parameters != e1.models[1].state_encoder.parameters);
}

TEST_CASE("scaling one embedding beyond its critical point never lowers the max aggregate") {
  // ||c v_k - v_j||^2 grows in c once c >= (v_k . v_j) / ||v_k||^2, so on
  // that branch the max over pairs cannot drop when model k is scaled up
  Rng rng(20);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 3;
    std::vector<Eigen::VectorXd> v;
    for (int i = 0; i < k; ++i) v.push_back(rng.normal_vector(4));
    const int target = static_cast<int>(rng.uniform_int(k));
    double c_min = 1.0;
    for (int j = 0; j < k; ++j) {
      if (j == target) continue;
      c_min = std::max(c_min, v[target].dot(v[j]) / v[target].squaredNorm());
    }
    const double c1 = c_min * (1.0 + rng.uniform());
    const double c2 = c1 * (1.0 + rng.uniform());
    auto scaled = [&](double c) {
      std::vector<Eigen::VectorXd> out = v;
      out[target] *= c;
      return repr::aggregate_similarity(repr::similarity_matrix(out), repr::Aggregator::max);
    };
    CHECK(scaled(c2) >= scaled(c1) - 1e-12);
  }
}

TEST_CASE("ensemble checkpoint round-trips") {
  Rng data_rng(21);
  const data::Dataset d = toy_dataset(40, data_rng);
  repr::RepresentationEnsemble e = repr::RepresentationEnsemble::init(
      repr::EnsembleConfig{3, 0.7, 4, 6, 3e-4}, 3, 2, 23);
  repr::train_ensemble(e, d, 10, 8, 23);
  const std::string path =
      (std::filesystem::temp_directory_path() / "aorl_ensemble.ckpt").string();
  repr::save_ensemble(e, path);
  const repr::RepresentationEnsemble loaded = repr::load_ensemble(path);
  CHECK(loaded.lambda == e.lambda);
  REQUIRE(loaded.count() == e.count());
  for (int i = 0; i < e.count(); ++i) {
    CHECK(loaded.models[i].state_encoder.parameters == e.models[i].state_encoder.parameters);
    CHECK(loaded.models[i].action_encoder.parameters == e.models[i].action_encoder.parameters);
  }
  std::filesystem::remove(path);
}
