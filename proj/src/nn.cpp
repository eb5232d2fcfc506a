#include "aorl/nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace aorl::nn {

namespace {

std::size_t layer_param_count(const MlpSpec& spec, int layer) {
  return static_cast<std::size_t>(spec.layer_sizes[layer] + 1) * spec.layer_sizes[layer + 1];
}

std::size_t layer_offset(const MlpSpec& spec, int layer) {
  std::size_t off = 0;
  for (int l = 0; l < layer; ++l) off += layer_param_count(spec, l);
  return off;
}

void apply_activation(Activation act, Eigen::MatrixXd& z) {
  switch (act) {
    case Activation::relu:
      z = z.cwiseMax(0.0);
      break;
    case Activation::tanh:
      z = z.array().tanh();
      break;
    case Activation::identity:
      break;
  }
}

// derivative expressed through the post-activation value
Eigen::MatrixXd activation_grad(Activation act, const Eigen::MatrixXd& post) {
  switch (act) {
    case Activation::relu:
      return (post.array() > 0.0).cast<double>();
    case Activation::tanh:
      return 1.0 - post.array().square();
    case Activation::identity:
      return Eigen::MatrixXd::Ones(post.rows(), post.cols());
  }
  throw std::logic_error("unknown activation");
}

}  // namespace

MlpSpec MlpSpec::make(std::vector<int> sizes, Activation hidden_act,
                      Activation output_act, std::uint64_t seed) {
  MlpSpec spec;
  spec.layer_sizes = std::move(sizes);
  spec.seed = seed;
  const int n_layers = static_cast<int>(spec.layer_sizes.size()) - 1;
  spec.activations.assign(static_cast<std::size_t>(std::max(n_layers, 0)), hidden_act);
  if (n_layers >= 1) spec.activations.back() = output_act;
  spec.validate();
  return spec;
}

std::size_t MlpSpec::parameter_count() const {
  std::size_t total = 0;
  for (int l = 0; l < num_layers(); ++l) total += layer_param_count(*this, l);
  return total;
}

void MlpSpec::validate() const {
  if (layer_sizes.size() < 2)
    throw std::invalid_argument("MlpSpec: need at least input and output sizes");
  for (int s : layer_sizes)
    if (s <= 0) throw std::invalid_argument("MlpSpec: layer sizes must be positive");
  if (activations.size() != static_cast<std::size_t>(num_layers()))
    throw std::invalid_argument("MlpSpec: one activation required per affine layer");
}

Mlp Mlp::init(const MlpSpec& spec) {
  spec.validate();
  Mlp net;
  net.spec = spec;
  net.parameters = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.parameter_count()));
  Rng rng(spec.seed);
  for (int l = 0; l < spec.num_layers(); ++l) {
    const int n_in = spec.layer_sizes[l];
    const double bound = std::sqrt(6.0 / n_in);
    auto w = net.weights(l);
    for (Eigen::Index j = 0; j < w.size(); ++j)
      w.data()[j] = rng.uniform(-bound, bound);
    // biases stay zero
  }
  return net;
}

Eigen::Map<const Eigen::MatrixXd> Mlp::weights(int layer) const {
  const int n_in = spec.layer_sizes[layer];
  const int n_out = spec.layer_sizes[layer + 1];
  return {parameters.data() + layer_offset(spec, layer), n_out, n_in};
}

Eigen::Map<const Eigen::VectorXd> Mlp::biases(int layer) const {
  const int n_in = spec.layer_sizes[layer];
  const int n_out = spec.layer_sizes[layer + 1];
  return {parameters.data() + layer_offset(spec, layer) +
              static_cast<std::size_t>(n_in) * n_out,
          n_out};
}

Eigen::Map<Eigen::MatrixXd> Mlp::weights(int layer) {
  const int n_in = spec.layer_sizes[layer];
  const int n_out = spec.layer_sizes[layer + 1];
  return {parameters.data() + layer_offset(spec, layer), n_out, n_in};
}

Eigen::Map<Eigen::VectorXd> Mlp::biases(int layer) {
  const int n_in = spec.layer_sizes[layer];
  const int n_out = spec.layer_sizes[layer + 1];
  return {parameters.data() + layer_offset(spec, layer) +
              static_cast<std::size_t>(n_in) * n_out,
          n_out};
}

Eigen::MatrixXd forward(const Mlp& net, const Eigen::MatrixXd& input) {
  ForwardTrace trace;
  return forward(net, input, trace);
}

Eigen::MatrixXd forward(const Mlp& net, const Eigen::MatrixXd& input, ForwardTrace& trace) {
  if (input.rows() != net.spec.input_dim()) {
    std::ostringstream msg;
    msg << "mlp forward: input size " << input.rows() << " does not match first layer size "
        << net.spec.input_dim();
    throw std::invalid_argument(msg.str());
  }
  trace.activations.clear();
  trace.activations.reserve(static_cast<std::size_t>(net.spec.num_layers()) + 1);
  trace.activations.push_back(input);
  for (int l = 0; l < net.spec.num_layers(); ++l) {
    Eigen::MatrixXd z = net.weights(l) * trace.activations.back();
    z.colwise() += net.biases(l);
    apply_activation(net.spec.activations[static_cast<std::size_t>(l)], z);
    trace.activations.push_back(std::move(z));
  }
  return trace.activations.back();
}

Eigen::VectorXd backward(const Mlp& net, const ForwardTrace& trace,
                         const Eigen::MatrixXd& output_gradient,
                         Eigen::MatrixXd* input_gradient) {
  const int n_layers = net.spec.num_layers();
  if (trace.activations.size() != static_cast<std::size_t>(n_layers) + 1)
    throw std::invalid_argument("mlp backward: trace does not match network");
  if (output_gradient.rows() != net.spec.output_dim() ||
      output_gradient.cols() != trace.activations.back().cols()) {
    std::ostringstream msg;
    msg << "mlp backward: output gradient is " << output_gradient.rows() << "x"
        << output_gradient.cols() << ", expected " << net.spec.output_dim() << "x"
        << trace.activations.back().cols();
    throw std::invalid_argument(msg.str());
  }

  Eigen::VectorXd grads = Eigen::VectorXd::Zero(net.parameters.size());
  Eigen::MatrixXd delta = output_gradient;
  for (int l = n_layers - 1; l >= 0; --l) {
    const Eigen::MatrixXd& post = trace.activations[static_cast<std::size_t>(l) + 1];
    delta.array() *= activation_grad(net.spec.activations[static_cast<std::size_t>(l)], post).array();

    const int n_in = net.spec.layer_sizes[l];
    const int n_out = net.spec.layer_sizes[l + 1];
    const std::size_t off = layer_offset(net.spec, l);
    Eigen::Map<Eigen::MatrixXd> dw(grads.data() + off, n_out, n_in);
    Eigen::Map<Eigen::VectorXd> db(grads.data() + off + static_cast<std::size_t>(n_in) * n_out, n_out);
    dw.noalias() = delta * trace.activations[static_cast<std::size_t>(l)].transpose();
    db = delta.rowwise().sum();

    if (l > 0 || input_gradient != nullptr) {
      Eigen::MatrixXd prev = net.weights(l).transpose() * delta;
      if (l == 0) {
        *input_gradient = std::move(prev);
      } else {
        delta = std::move(prev);
      }
    }
  }
  return grads;
}

Eigen::VectorXd backward(const Mlp& net, const Eigen::MatrixXd& input,
                         const Eigen::MatrixXd& output_gradient,
                         Eigen::MatrixXd* input_gradient) {
  ForwardTrace trace;
  forward(net, input, trace);
  return backward(net, trace, output_gradient, input_gradient);
}

AdamState AdamState::init(std::size_t parameter_count, double lr) {
  AdamState s;
  s.m = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(parameter_count));
  s.v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(parameter_count));
  s.lr = lr;
  return s;
}

void adam_step(Mlp& net, const Eigen::VectorXd& grads, AdamState& state) {
  if (grads.size() != net.parameters.size() || state.m.size() != grads.size() ||
      state.v.size() != grads.size())
    throw std::invalid_argument("adam_step: gradient/state size mismatch");
  if (!grads.allFinite()) {
    for (int l = 0; l < net.spec.num_layers(); ++l) {
      const std::size_t off = layer_offset(net.spec, l);
      const std::size_t count = layer_param_count(net.spec, l);
      if (!grads.segment(static_cast<Eigen::Index>(off), static_cast<Eigen::Index>(count)).allFinite()) {
        std::ostringstream msg;
        msg << "adam_step: non-finite gradient in layer " << l;
        throw std::runtime_error(msg.str());
      }
    }
    throw std::runtime_error("adam_step: non-finite gradient");
  }
  state.step_count += 1;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads.array().square().matrix();
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  net.parameters.array() -=
      state.lr * (state.m.array() / bc1) / ((state.v.array() / bc2).sqrt() + state.eps);
}

namespace {

constexpr char kMagic[4] = {'A', 'O', 'R', 'L'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_le(std::ostream& out, T value) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  // this codebase targets little-endian hosts; memcpy preserves the layout
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  unsigned char buf[sizeof(T)];
  in.read(reinterpret_cast<char*>(buf), sizeof(T));
  if (!in) throw std::runtime_error("mlp checkpoint: unexpected end of stream");
  T value;
  std::memcpy(&value, buf, sizeof(T));
  return value;
}

}  // namespace

void save_mlp(const Mlp& net, std::ostream& out) {
  out.write(kMagic, 4);
  write_le<std::uint32_t>(out, kVersion);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(net.spec.layer_sizes.size()));
  for (int s : net.spec.layer_sizes) write_le<std::uint32_t>(out, static_cast<std::uint32_t>(s));
  for (Activation a : net.spec.activations) write_le<std::uint8_t>(out, static_cast<std::uint8_t>(a));
  write_le<std::uint64_t>(out, net.spec.seed);
  write_le<std::uint64_t>(out, static_cast<std::uint64_t>(net.parameters.size()));
  for (Eigen::Index i = 0; i < net.parameters.size(); ++i) write_le<double>(out, net.parameters[i]);
  if (!out) throw std::runtime_error("mlp checkpoint: write failed");
}

Mlp load_mlp(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("mlp checkpoint: bad magic");
  const auto version = read_le<std::uint32_t>(in);
  if (version != kVersion)
    throw std::runtime_error("mlp checkpoint: unsupported version " + std::to_string(version));
  MlpSpec spec;
  const auto n_sizes = read_le<std::uint32_t>(in);
  if (n_sizes < 2 || n_sizes > 64) throw std::runtime_error("mlp checkpoint: corrupt layer count");
  spec.layer_sizes.resize(n_sizes);
  for (auto& s : spec.layer_sizes) s = static_cast<int>(read_le<std::uint32_t>(in));
  spec.activations.resize(n_sizes - 1);
  for (auto& a : spec.activations) {
    const auto raw = read_le<std::uint8_t>(in);
    if (raw > 2) throw std::runtime_error("mlp checkpoint: corrupt activation");
    a = static_cast<Activation>(raw);
  }
  spec.seed = read_le<std::uint64_t>(in);
  spec.validate();
  const auto count = read_le<std::uint64_t>(in);
  if (count != spec.parameter_count())
    throw std::runtime_error("mlp checkpoint: parameter count does not match spec");
  Mlp net;
  net.spec = std::move(spec);
  net.parameters.resize(static_cast<Eigen::Index>(count));
  for (Eigen::Index i = 0; i < net.parameters.size(); ++i) net.parameters[i] = read_le<double>(in);
  return net;
}

void save_mlp_file(const Mlp& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  save_mlp(net, out);
}

Mlp load_mlp_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  return load_mlp(in);
}

}  // namespace aorl::nn
