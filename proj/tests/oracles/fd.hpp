#pragma once

// Central finite-difference gradients. Deliberately independent of the
// production backward passes: the only shared code is the data types.

#include <functional>

#include "flashsac/common.hpp"

namespace flashsac::oracles {

struct FdSpec {
  double step = 1e-4;
};

inline Vector fd_gradient(const std::function<double(const Vector&)>& loss_fn,
                          const Vector& params, FdSpec spec = {}) {
  Vector grad(params.size());
  Vector x = params;
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double h = spec.step;
    x[i] = params[i] + h;
    const double fp = loss_fn(x);
    x[i] = params[i] - h;
    const double fm = loss_fn(x);
    x[i] = params[i];
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

// Relative error with an absolute floor: central differences at step h carry
// O(h^2 * f''') truncation noise (~5e-7 absolute for these losses), so
// coordinates below the floor are effectively compared at floor * rtol
// absolute tolerance, the tightest bound the oracle itself supports.
inline double max_rel_error(const Vector& analytic, const Vector& reference,
                            double floor = 5e-3) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    double denom = std::max({std::abs(analytic[i]), std::abs(reference[i]), floor});
    worst = std::max(worst, std::abs(analytic[i] - reference[i]) / denom);
  }
  return worst;
}

}  // namespace flashsac::oracles
