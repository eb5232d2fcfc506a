#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace aorl {

// Deterministic random stream (xoshiro256** seeded through splitmix64).
// Every stochastic component of the toolkit draws from one of these; streams
// for distinct components are derived from a master seed plus a stable label
// so adding a consumer never perturbs the others.
// Stable (seed, label) -> seed mixing for per-component streams.
std::uint64_t derive_seed(std::uint64_t master_seed, std::string_view label);

class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Stream derived from (master seed, label), e.g. derive(7, "env/reset").
  static Rng derive(std::uint64_t master_seed, std::string_view label);

  std::uint64_t next_u64();

  // Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);

  // Unbiased integer in [0, n); n must be >= 1.
  std::uint64_t uniform_int(std::uint64_t n);

  // Standard normal via Box-Muller; second value of each pair is cached.
  double normal();
  Eigen::VectorXd normal_vector(int n);

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      std::size_t j = uniform_int(i + 1);
      std::swap(v[i], v[j]);
    }
  }

  // k distinct indices drawn uniformly from [0, n), in draw order. k <= n.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

 private:
  std::uint64_t state_[4];
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace aorl
