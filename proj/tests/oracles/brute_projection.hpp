#pragma once

// Deliberately naive categorical projection: scalar loop per value, bracketing
// atoms located by linear scan. Reference for the production projection.

#include "flashsac/distributional.hpp"

namespace flashsac::oracles {

inline Matrix brute_projection(const AtomGrid& grid, const Matrix& values,
                               const Matrix& masses) {
  Matrix out = Matrix::Zero(values.rows(), grid.n_atoms);
  for (Eigen::Index b = 0; b < values.rows(); ++b) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      double mass = masses(b, j);
      double v = values(b, j);
      if (v <= grid.g_min) {
        out(b, 0) += mass;
        continue;
      }
      if (v >= grid.g_max) {
        out(b, grid.n_atoms - 1) += mass;
        continue;
      }
      int hi = 1;
      while (grid.atoms[hi] < v) ++hi;  // linear scan for the bracket
      int lo = hi - 1;
      double span = grid.atoms[hi] - grid.atoms[lo];
      double w_hi = (v - grid.atoms[lo]) / span;
      out(b, lo) += mass * (1.0 - w_hi);
      out(b, hi) += mass * w_hi;
    }
  }
  return out;
}

}  // namespace flashsac::oracles
