#pragma once

#include "flashsac/common.hpp"

namespace flashsac {

// Fixed categorical support. atoms[i] = g_min + i * delta.
struct AtomGrid {
  double g_min = -5.0;
  double g_max = 5.0;
  int n_atoms = 101;
  double delta = 0.1;
  Vector atoms;
};

AtomGrid make_grid(double g_min, double g_max, int n_atoms);

// Categorical projection: each target value (clipped to the support) splits
// its mass linearly between the two bracketing atoms. Rows of the output sum
// to one and preserve the mean of the clipped values.
Matrix project_target(const AtomGrid& grid, const Matrix& target_values,
                      const Matrix& source_probs);

// Scalar value of a categorical distribution, per batch row.
Vector categorical_mean(const AtomGrid& grid, const Matrix& probs);

Matrix softmax_rows(const Matrix& logits);
Matrix log_softmax_rows(const Matrix& logits);

// Mean over rows of -sum_i target[i] * log softmax(logits)[i].
double cross_entropy(const Matrix& pred_logits, const Matrix& target_probs);

// d(cross_entropy)/d(logits) = (softmax(logits) - target) / B.
Matrix cross_entropy_grad(const Matrix& pred_logits, const Matrix& target_probs);

}  // namespace flashsac
