#include "flashsac/policy.hpp"

#include <cmath>
#include <numbers>

namespace flashsac {

namespace {
constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 * ln(2*pi)
}

HeadSplit split_actor_head(const Matrix& head_out) {
  if (head_out.cols() % 2 != 0)
    throw ShapeError("split_actor_head: head width must be 2*action_dim");
  const Eigen::Index a = head_out.cols() / 2;
  HeadSplit s;
  s.head.mean = head_out.leftCols(a);
  Matrix raw = head_out.rightCols(a);
  s.head.log_std = raw.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
  s.clamp_mask = ((raw.array() > kLogStdMin) && (raw.array() < kLogStdMax))
                     .cast<double>()
                     .matrix();
  return s;
}

Matrix merge_head_grad(const HeadSplit& split, const Matrix& d_mean,
                       const Matrix& d_log_std) {
  Matrix g(d_mean.rows(), d_mean.cols() * 2);
  g.leftCols(d_mean.cols()) = d_mean;
  g.rightCols(d_mean.cols()) =
      (d_log_std.array() * split.clamp_mask.array()).matrix();
  return g;
}

SampleResult sample_action(const GaussianHead& head, const Matrix& eps) {
  if (eps.rows() != head.mean.rows() || eps.cols() != head.mean.cols())
    throw ShapeError("sample_action: eps shape mismatch");
  if (!eps.allFinite()) throw NumericalError("sample_action: non-finite eps");
  SampleResult s;
  s.std = head.log_std.array().exp();
  s.eps = eps;
  Matrix u = head.mean + s.std.cwiseProduct(eps);
  s.tanh_u = u.array().tanh();
  // tanh saturates to exactly +/-1 in doubles for |u| > ~19; keep the action
  // strictly interior
  constexpr double kBound = 1.0 - 1e-12;
  s.action = s.tanh_u.cwiseMax(-kBound).cwiseMin(kBound);
  // log N(u; mean, std) - log(1 - tanh(u)^2 + eps), summed over dimensions
  Matrix per_dim = (-kHalfLog2Pi - head.log_std.array() -
                    0.5 * eps.array().square() -
                    (1.0 - s.tanh_u.array().square() + kSquashEps).log())
                       .matrix();
  s.log_prob = per_dim.rowwise().sum();
  return s;
}

void sample_action_backward(const SampleResult& s, const Matrix& d_action,
                            const Vector& d_logprob, Matrix& d_mean,
                            Matrix& d_log_std) {
  // d(action)/du = 1 - tanh(u)^2
  // d(log_prob)/du = 2*tanh(u)*(1 - tanh(u)^2) / (1 - tanh(u)^2 + eps)
  Eigen::ArrayXXd one_m_t2 = 1.0 - s.tanh_u.array().square();
  Eigen::ArrayXXd dlp_du =
      2.0 * s.tanh_u.array() * one_m_t2 / (one_m_t2 + kSquashEps);
  Eigen::ArrayXXd du = d_action.array() * one_m_t2 +
                       (dlp_du.colwise() * d_logprob.array());
  // u = mean + exp(log_std) * eps
  d_mean = du.matrix();
  // log_prob also depends on log_std directly through the -log_std term.
  Eigen::ArrayXXd direct = (-1.0) * (Eigen::ArrayXXd::Ones(s.eps.rows(), s.eps.cols())
                                         .colwise() *
                                     d_logprob.array());
  d_log_std = (du * s.std.array() * s.eps.array() + direct).matrix();
}

double entropy_target(int action_dim, double sigma_tgt) {
  if (sigma_tgt <= 0.0) throw ConfigError("entropy_target: sigma_tgt must be > 0");
  return 0.5 * static_cast<double>(action_dim) *
         std::log(2.0 * std::numbers::pi * std::numbers::e * sigma_tgt * sigma_tgt);
}

void temperature_update(Temperature& t, const Vector& log_probs,
                        double entropy_target_value, double lr) {
  const double grad = -(log_probs.array() + entropy_target_value).mean();
  t.opt.update(t.log_alpha, grad, lr);
}

}  // namespace flashsac
