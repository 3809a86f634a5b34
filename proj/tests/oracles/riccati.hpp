#pragma once

// Scalar discrete-time Riccati fixed point and Monte-Carlo policy evaluation
// for the linear-quadratic environment.

#include <cmath>
#include <stdexcept>

#include "flashsac/common.hpp"
#include "flashsac/envs.hpp"

namespace flashsac::oracles {

struct RiccatiSolution {
  double P = 0.0;
  double K = 0.0;
};

inline RiccatiSolution riccati_scalar(double a, double b, double q, double r,
                                      double tol = 1e-12) {
  if (q <= 0.0 || r <= 0.0)
    throw std::invalid_argument("riccati_scalar: q and r must be positive");
  double P = q;
  for (long long it = 0; it < 1'000'000; ++it) {
    double next = q + a * a * P - (a * b * P) * (a * b * P) / (r + b * b * P);
    if (std::abs(next - P) < tol) {
      P = next;
      return {P, a * b * P / (r + b * b * P)};
    }
    P = next;
  }
  throw std::runtime_error("riccati_scalar: no convergence");
}

// Mean undiscounted episode return of the linear policy u = -K x, estimated
// by stepping the real environment.
inline double lqr_policy_mc_return(double K, long long total_steps,
                                   std::uint64_t seed) {
  VecEnv env("lqr", 1);
  Matrix obs = env.reset(seed);
  double episode_return = 0.0;
  std::vector<double> returns;
  for (long long t = 0; t < total_steps; ++t) {
    Matrix action(1, 1);
    // environment scales actions by 2, so command u/2
    action(0, 0) = std::clamp(-K * obs(0, 0) / 2.0, -1.0, 1.0);
    StepResult sr = env.step(action);
    episode_return += sr.reward[0];
    obs = sr.obs;
    if (sr.terminated[0] || sr.truncated[0]) {
      returns.push_back(episode_return);
      episode_return = 0.0;
    }
  }
  double sum = 0.0;
  for (double r : returns) sum += r;
  return returns.empty() ? episode_return : sum / static_cast<double>(returns.size());
}

}  // namespace flashsac::oracles
