#pragma once

// Test-only finite-difference oracle. Kept independent of the analytic
// backward paths it is used to check: it only ever calls the loss through the
// supplied evaluation closure.

#include <functional>

#include <Eigen/Core>

#include "aorl/rng.hpp"

namespace gradcheck {

// Fresh nets carry exactly-zero biases, so a sample can land precisely on a
// relu kink (every unit of a layer dead makes the next pre-activation exactly
// zero). Differences straddle the kink there while the subgradient does not;
// a small jitter moves the check to a generic, differentiable point.
inline void jitter(Eigen::VectorXd& params, aorl::Rng& rng, double scale = 0.05) {
  for (Eigen::Index i = 0; i < params.size(); ++i)
    params[i] += scale * rng.uniform(-1.0, 1.0);
}

// Central differences of eval() with respect to params, h = 1e-5.
inline Eigen::VectorXd central_differences(const std::function<double()>& eval,
                                           Eigen::VectorXd& params, double h = 1e-5) {
  Eigen::VectorXd grad(params.size());
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double original = params[i];
    params[i] = original + h;
    const double up = eval();
    params[i] = original - h;
    const double down = eval();
    params[i] = original;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

inline double relative_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric) {
  const double scale = std::max(numeric.norm(), 1e-12);
  return (analytic - numeric).norm() / scale;
}

}  // namespace gradcheck
