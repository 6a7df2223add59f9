#pragma once

#include <functional>

#include "amsim/geometry.hpp"

namespace amsim::testutil {

/// Central-difference Jacobian of a residual with respect to `dims` local
/// coordinates. `eval(k, step)` returns the residual with coordinate k
/// perturbed by `step` through the proper retraction.
inline MatX fd_jacobian(int dims, double eps,
                        const std::function<VecX(int, double)>& eval) {
  const VecX r0 = eval(0, 0.0);
  MatX J(r0.size(), dims);
  for (int k = 0; k < dims; ++k) {
    const VecX rp = eval(k, eps);
    const VecX rm = eval(k, -eps);
    J.col(k) = (rp - rm) / (2.0 * eps);
  }
  return J;
}

/// Relative Frobenius discrepancy between analytic and finite-difference
/// Jacobians, floored so exactly-zero blocks compare cleanly.
inline double rel_jacobian_error(const MatX& analytic, const MatX& fd) {
  const double scale = std::max({analytic.norm(), fd.norm(), 1e-9});
  return (analytic - fd).norm() / scale;
}

}  // namespace amsim::testutil
