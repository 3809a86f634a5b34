#pragma once

#include "flashsac/common.hpp"
#include "flashsac/nn.hpp"

namespace flashsac {

constexpr double kLogStdMin = -10.0;
constexpr double kLogStdMax = 2.0;
constexpr double kSquashEps = 1e-6;

struct GaussianHead {
  Matrix mean;     // [B x A]
  Matrix log_std;  // [B x A], clamped to [kLogStdMin, kLogStdMax]
};

// Splits an actor head output [B x 2A] into (mean, clamped log_std) and
// remembers where the clamp was active so gradients can be masked.
struct HeadSplit {
  GaussianHead head;
  Matrix clamp_mask;  // 1 where log_std was inside the clamp range
};
HeadSplit split_actor_head(const Matrix& head_out);
Matrix merge_head_grad(const HeadSplit& split, const Matrix& d_mean,
                       const Matrix& d_log_std);

struct SampleResult {
  Matrix action;    // tanh-squashed, strictly inside (-1, 1)
  Vector log_prob;  // [B]
  // caches for the backward pass
  Matrix tanh_u;
  Matrix std;
  Matrix eps;
};

// Reparameterized sample: u = mean + std*eps, action = tanh(u).
// log_prob sums the diagonal Gaussian density and the tanh change of
// variables, per row.
SampleResult sample_action(const GaussianHead& head, const Matrix& eps);

// Gradients of (action, log_prob) w.r.t. head outputs, given upstream
// d_action [B x A] and d_logprob [B].
void sample_action_backward(const SampleResult& s, const Matrix& d_action,
                            const Vector& d_logprob, Matrix& d_mean,
                            Matrix& d_log_std);

// Target entropy for a diagonal Gaussian with per-dimension std sigma_tgt:
// 0.5 * A * log(2*pi*e*sigma_tgt^2). Linear in the action dimension.
double entropy_target(int action_dim, double sigma_tgt);

struct Temperature {
  double log_alpha = std::log(0.01);
  ScalarAdam opt;
  double alpha() const { return std::exp(log_alpha); }
};

// One gradient step on L(log_alpha) = -log_alpha * mean(log_probs + H_target).
void temperature_update(Temperature& t, const Vector& log_probs,
                        double entropy_target_value, double lr);

}  // namespace flashsac
