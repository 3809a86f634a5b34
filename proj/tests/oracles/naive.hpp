#pragma once

// Naive reference kernels for the linear layer and the squashed-Gaussian
// log density.

#include <cmath>

#include "flashsac/common.hpp"

namespace flashsac::oracles {

// y = x * W^T + b via explicit triple loop.
inline Matrix naive_linear(const Matrix& x, const Matrix& w, const Vector& b) {
  Matrix y(x.rows(), w.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < w.rows(); ++j) {
      double acc = b[j];
      for (Eigen::Index k = 0; k < x.cols(); ++k) acc += x(i, k) * w(j, k);
      y(i, j) = acc;
    }
  }
  return y;
}

// Per-dimension log density of a tanh-squashed diagonal Gaussian sample,
// accumulated term by term.
inline double naive_squashed_log_prob(const Vector& mean, const Vector& log_std,
                                      const Vector& eps, double squash_eps) {
  double lp = 0.0;
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    double std = std::exp(log_std[i]);
    double u = mean[i] + std * eps[i];
    double gauss = -0.5 * std::log(2.0 * 3.14159265358979323846) - log_std[i] -
                   0.5 * eps[i] * eps[i];
    double t = std::tanh(u);
    lp += gauss - std::log(1.0 - t * t + squash_eps);
  }
  return lp;
}

}  // namespace flashsac::oracles
