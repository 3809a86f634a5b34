#include "flashsac/distributional.hpp"

#include <algorithm>
#include <cmath>

namespace flashsac {

AtomGrid make_grid(double g_min, double g_max, int n_atoms) {
  if (!(g_min < g_max)) throw ConfigError("make_grid: g_min must be < g_max");
  if (n_atoms < 2) throw ConfigError("make_grid: n_atoms must be >= 2");
  AtomGrid g;
  g.g_min = g_min;
  g.g_max = g_max;
  g.n_atoms = n_atoms;
  g.delta = (g_max - g_min) / (n_atoms - 1);
  g.atoms.resize(n_atoms);
  for (int i = 0; i < n_atoms; ++i) g.atoms[i] = g_min + i * g.delta;
  g.atoms[n_atoms - 1] = g_max;  // pin the endpoint against accumulation error
  return g;
}

Matrix project_target(const AtomGrid& grid, const Matrix& target_values,
                      const Matrix& source_probs) {
  if (target_values.rows() != source_probs.rows() ||
      target_values.cols() != source_probs.cols()) {
    throw ShapeError("project_target: values/probs shape mismatch");
  }
  const int batch = static_cast<int>(target_values.rows());
  const int n = grid.n_atoms;
  Matrix out = Matrix::Zero(batch, n);
  for (int b = 0; b < batch; ++b) {
    for (int j = 0; j < static_cast<int>(target_values.cols()); ++j) {
      const double mass = source_probs(b, j);
      if (mass == 0.0) continue;
      double v = std::clamp(target_values(b, j), grid.g_min, grid.g_max);
      double pos = (v - grid.g_min) / grid.delta;
      int lo = static_cast<int>(std::floor(pos));
      if (lo >= n - 1) {  // clamp puts v exactly on the top atom
        out(b, n - 1) += mass;
        continue;
      }
      double frac = pos - lo;
      out(b, lo) += mass * (1.0 - frac);
      out(b, lo + 1) += mass * frac;
    }
  }
  return out;
}

Vector categorical_mean(const AtomGrid& grid, const Matrix& probs) {
  if (probs.cols() != grid.n_atoms)
    throw ShapeError("categorical_mean: column count != n_atoms");
  return probs * grid.atoms;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index b = 0; b < logits.rows(); ++b) {
    double m = logits.row(b).maxCoeff();
    Eigen::ArrayXd e = (logits.row(b).array() - m).exp();
    out.row(b) = (e / e.sum()).matrix();
  }
  return out;
}

Matrix log_softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index b = 0; b < logits.rows(); ++b) {
    double m = logits.row(b).maxCoeff();
    Eigen::ArrayXd shifted = logits.row(b).array() - m;
    double lse = std::log(shifted.exp().sum());
    out.row(b) = (shifted - lse).matrix();
  }
  return out;
}

double cross_entropy(const Matrix& pred_logits, const Matrix& target_probs) {
  if (pred_logits.rows() != target_probs.rows() ||
      pred_logits.cols() != target_probs.cols()) {
    throw ShapeError("cross_entropy: logits/target shape mismatch");
  }
  Matrix logp = log_softmax_rows(pred_logits);
  double total = -(target_probs.array() * logp.array()).sum();
  return total / static_cast<double>(pred_logits.rows());
}

Matrix cross_entropy_grad(const Matrix& pred_logits, const Matrix& target_probs) {
  Matrix g = softmax_rows(pred_logits) - target_probs;
  g /= static_cast<double>(pred_logits.rows());
  return g;
}

}  // namespace flashsac
