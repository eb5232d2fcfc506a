#include <doctest.h>

#include <cmath>
#include <sstream>

#include "aorl/nn.hpp"
#include "gradcheck.hpp"

using namespace aorl;
using nn::Activation;

namespace {

nn::Mlp random_small_net(std::uint64_t seed) {
  Rng rng(seed);
  const int n_layers = 2 + static_cast<int>(rng.uniform_int(2));
  std::vector<int> sizes;
  for (int i = 0; i <= n_layers; ++i) sizes.push_back(1 + static_cast<int>(rng.uniform_int(8)));
  const Activation hidden = rng.uniform() < 0.5 ? Activation::tanh : Activation::relu;
  return nn::Mlp::init(nn::MlpSpec::make(sizes, hidden, Activation::identity, seed));
}

}  // namespace

TEST_CASE("zero-parameter net maps any input to zero") {
  nn::Mlp net = nn::Mlp::init(nn::MlpSpec::make({3, 4, 2}, Activation::relu,
                                                Activation::identity, 1));
  net.parameters.setZero();
  const Eigen::VectorXd out = nn::forward(net, Eigen::Vector3d(1.0, -2.0, 0.5));
  CHECK(out.size() == 2);
  CHECK(out.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single linear layer computes W x + b") {
  nn::Mlp net = nn::Mlp::init(nn::MlpSpec::make({1, 1}, Activation::identity,
                                                Activation::identity, 2));
  net.parameters << 2.0, 1.0;  // W = [[2]], b = [1]
  const Eigen::VectorXd out = nn::forward(net, Eigen::VectorXd::Constant(1, 3.0));
  CHECK(out[0] == doctest::Approx(7.0).epsilon(1e-15));
}

TEST_CASE("forward is deterministic") {
  nn::Mlp net = random_small_net(42);
  Eigen::VectorXd input = Eigen::VectorXd::LinSpaced(net.spec.input_dim(), -1.0, 1.0);
  const Eigen::VectorXd a = nn::forward(net, input);
  const Eigen::VectorXd b = nn::forward(net, input);
  CHECK(a == b);
}

TEST_CASE("forward rejects mismatched input size with the sizes in the report") {
  nn::Mlp net = nn::Mlp::init(nn::MlpSpec::make({4, 2}, Activation::relu,
                                                Activation::identity, 3));
  try {
    nn::forward(net, Eigen::Vector3d::Zero());
    FAIL("expected an exception");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find('3') != std::string::npos);
    CHECK(msg.find('4') != std::string::npos);
  }
}

TEST_CASE("identical spec yields bit-identical initial parameters") {
  const auto spec = nn::MlpSpec::make({5, 7, 3}, Activation::relu, Activation::tanh, 99);
  const nn::Mlp a = nn::Mlp::init(spec);
  const nn::Mlp b = nn::Mlp::init(spec);
  CHECK(a.parameters == b.parameters);
  CHECK(static_cast<std::size_t>(a.parameters.size()) == spec.parameter_count());
  CHECK(spec.parameter_count() == (5 + 1) * 7 + (7 + 1) * 3);
}

TEST_CASE("zero output gradient gives zero parameter gradient") {
  nn::Mlp net = random_small_net(7);
  const Eigen::VectorXd input = Eigen::VectorXd::Ones(net.spec.input_dim());
  const Eigen::VectorXd grads =
      nn::backward(net, input, Eigen::MatrixXd::Zero(net.spec.output_dim(), 1));
  CHECK(grads.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("linear layer gradients are g x^T and g") {
  nn::Mlp net = nn::Mlp::init(nn::MlpSpec::make({2, 2}, Activation::identity,
                                                Activation::identity, 5));
  const Eigen::Vector2d x(0.5, -1.5);
  const Eigen::Vector2d g(2.0, 3.0);
  const Eigen::VectorXd grads = nn::backward(net, x, g);
  // layout: W column-major (2x2) then bias
  const Eigen::Matrix2d expected_w = g * x.transpose();
  CHECK(grads[0] == doctest::Approx(expected_w(0, 0)));
  CHECK(grads[1] == doctest::Approx(expected_w(1, 0)));
  CHECK(grads[2] == doctest::Approx(expected_w(0, 1)));
  CHECK(grads[3] == doctest::Approx(expected_w(1, 1)));
  CHECK(grads[4] == doctest::Approx(g[0]));
  CHECK(grads[5] == doctest::Approx(g[1]));
}

TEST_CASE("backward matches central finite differences on random nets") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    nn::Mlp net = random_small_net(100 + seed);
    Rng rng(seed);
    gradcheck::jitter(net.parameters, rng);
    const Eigen::VectorXd input = rng.normal_vector(net.spec.input_dim());
    const Eigen::VectorXd probe = rng.normal_vector(net.spec.output_dim());

    const Eigen::VectorXd analytic = nn::backward(net, input, probe);
    const auto eval = [&]() { return probe.dot(nn::forward(net, input).col(0)); };
    const Eigen::VectorXd numeric = gradcheck::central_differences(eval, net.parameters);
    CHECK(gradcheck::relative_error(analytic, numeric) < 1e-4);
  }
}

TEST_CASE("backward also produces the input gradient") {
  nn::Mlp net = random_small_net(55);
  Rng rng(56);
  gradcheck::jitter(net.parameters, rng);
  Eigen::VectorXd input = rng.normal_vector(net.spec.input_dim());
  const Eigen::VectorXd probe = rng.normal_vector(net.spec.output_dim());
  Eigen::MatrixXd input_grad;
  nn::backward(net, input, probe, &input_grad);

  const auto eval = [&]() { return probe.dot(nn::forward(net, input).col(0)); };
  const Eigen::VectorXd numeric = gradcheck::central_differences(eval, input);
  CHECK(gradcheck::relative_error(input_grad.col(0), numeric) < 1e-4);
}

TEST_CASE("adam leaves parameters alone on zero gradient") {
  nn::Mlp net = random_small_net(8);
  const Eigen::VectorXd before = net.parameters;
  nn::AdamState state = nn::AdamState::init(net.spec.parameter_count());
  nn::adam_step(net, Eigen::VectorXd::Zero(net.parameters.size()), state);
  CHECK(net.parameters == before);
  CHECK(state.step_count == 1);
}

TEST_CASE("first adam step moves a scalar parameter by about lr") {
  nn::Mlp net = nn::Mlp::init(nn::MlpSpec::make({1, 1}, Activation::identity,
                                                Activation::identity, 1));
  net.parameters << 0.7, 0.2;
  nn::AdamState state = nn::AdamState::init(2, 0.1);
  Eigen::VectorXd grads(2);
  grads << 1.0, 0.0;
  nn::adam_step(net, grads, state);
  CHECK(net.parameters[0] == doctest::Approx(0.7 - 0.1).epsilon(1e-6));
  CHECK(net.parameters[1] == 0.2);  // zero gradient, zero update
}

TEST_CASE("adam trajectories are bit-identical across runs") {
  const auto run = [] {
    nn::Mlp net = nn::Mlp::init(nn::MlpSpec::make({3, 5, 2}, Activation::relu,
                                                  Activation::identity, 77));
    nn::AdamState state = nn::AdamState::init(net.spec.parameter_count(), 1e-3);
    Rng rng(21);
    for (int step = 0; step < 50; ++step) {
      const Eigen::VectorXd input = rng.normal_vector(3);
      const Eigen::VectorXd probe = rng.normal_vector(2);
      nn::adam_step(net, nn::backward(net, input, probe), state);
    }
    return net.parameters;
  };
  const Eigen::VectorXd a = run();
  const Eigen::VectorXd b = run();
  CHECK(a == b);
}

TEST_CASE("adam rejects non-finite gradients naming the layer") {
  nn::Mlp net = nn::Mlp::init(nn::MlpSpec::make({2, 3, 1}, Activation::relu,
                                                Activation::identity, 4));
  nn::AdamState state = nn::AdamState::init(net.spec.parameter_count());
  Eigen::VectorXd grads = Eigen::VectorXd::Zero(net.parameters.size());
  grads[net.parameters.size() - 1] = std::numeric_limits<double>::quiet_NaN();  // bias of layer 1
  try {
    nn::adam_step(net, grads, state);
    FAIL("expected an exception");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("layer 1") != std::string::npos);
  }
}

TEST_CASE("checkpoint round-trip is bit-exact") {
  nn::Mlp net = random_small_net(31);
  std::stringstream buffer;
  nn::save_mlp(net, buffer);
  const nn::Mlp loaded = nn::load_mlp(buffer);
  CHECK(loaded.spec == net.spec);
  CHECK(loaded.parameters == net.parameters);
}

TEST_CASE("truncated checkpoint is rejected") {
  nn::Mlp net = random_small_net(32);
  std::stringstream buffer;
  nn::save_mlp(net, buffer);
  const std::string bytes = buffer.str();
  std::stringstream truncated(bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS(nn::load_mlp(truncated));
}
