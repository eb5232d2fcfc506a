#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "aorl/rng.hpp"

namespace aorl::nn {

enum class Activation : std::uint8_t { relu = 0, tanh = 1, identity = 2 };

// Architecture of a fully connected network. layer_sizes runs input -> output;
// activations has one entry per affine layer (hidden layers and the output).
struct MlpSpec {
  std::vector<int> layer_sizes;
  std::vector<Activation> activations;
  std::uint64_t seed = 0;

  // All hidden layers use hidden_act, the output layer uses output_act.
  static MlpSpec make(std::vector<int> sizes, Activation hidden_act,
                      Activation output_act, std::uint64_t seed);

  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }
  int num_layers() const { return static_cast<int>(layer_sizes.size()) - 1; }
  std::size_t parameter_count() const;
  void validate() const;

  bool operator==(const MlpSpec&) const = default;
};

// Feed-forward net with a flat parameter vector. Layout per layer: the
// (n_out x n_in) weight matrix column-major, then the n_out bias.
struct Mlp {
  MlpSpec spec;
  Eigen::VectorXd parameters;

  // Weights ~ U(+-sqrt(6/n_in)), biases zero; identical spec (incl. seed)
  // reproduces identical parameters bit for bit.
  static Mlp init(const MlpSpec& spec);

  Eigen::Map<const Eigen::MatrixXd> weights(int layer) const;
  Eigen::Map<const Eigen::VectorXd> biases(int layer) const;
  Eigen::Map<Eigen::MatrixXd> weights(int layer);
  Eigen::Map<Eigen::VectorXd> biases(int layer);
};

// Post-activation values per layer from a forward pass; activations[0] is the
// input batch itself. Feeds backward() so the forward work is not redone.
struct ForwardTrace {
  std::vector<Eigen::MatrixXd> activations;
};

// Batched forward: each column of input is one sample.
Eigen::MatrixXd forward(const Mlp& net, const Eigen::MatrixXd& input);
Eigen::MatrixXd forward(const Mlp& net, const Eigen::MatrixXd& input, ForwardTrace& trace);

// Parameter gradient (summed over the batch) for d(loss)/d(output) in
// output_gradient. input_gradient, when non-null, receives d(loss)/d(input).
Eigen::VectorXd backward(const Mlp& net, const ForwardTrace& trace,
                         const Eigen::MatrixXd& output_gradient,
                         Eigen::MatrixXd* input_gradient = nullptr);

// Convenience single-pass variant that recomputes the forward internally.
Eigen::VectorXd backward(const Mlp& net, const Eigen::MatrixXd& input,
                         const Eigen::MatrixXd& output_gradient,
                         Eigen::MatrixXd* input_gradient = nullptr);

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  std::int64_t step_count = 0;
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState init(std::size_t parameter_count, double lr = 3e-4);
};

// One bias-corrected Adam update in place. Rejects non-finite gradients,
// reporting the offending layer.
void adam_step(Mlp& net, const Eigen::VectorXd& grads, AdamState& state);

// Checkpoint format: magic "AORL", u32 version, spec, little-endian f64
// parameters. Round-trips bit-exactly.
void save_mlp(const Mlp& net, std::ostream& out);
Mlp load_mlp(std::istream& in);
void save_mlp_file(const Mlp& net, const std::string& path);
Mlp load_mlp_file(const std::string& path);

}  // namespace aorl::nn
