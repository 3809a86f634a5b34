#include "flashsac/reward_norm.hpp"

#include <cmath>

namespace flashsac {

ReturnTracker::ReturnTracker(double gamma, int n_envs, double g_max_support)
    : gamma_(gamma),
      g_max_support_(g_max_support),
      per_env_g_(Vector::Zero(n_envs)) {
  if (n_envs <= 0) throw ConfigError("ReturnTracker: n_envs must be positive");
  if (g_max_support <= 0.0)
    throw ConfigError("ReturnTracker: support bound must be positive");
}

void ReturnTracker::update(const Vector& rewards, const BoolVec& terminated,
                           const BoolVec& truncated) {
  const int n = static_cast<int>(per_env_g_.size());
  if (rewards.size() != n || static_cast<int>(terminated.size()) != n ||
      static_cast<int>(truncated.size()) != n) {
    throw ShapeError("ReturnTracker::update: vector length mismatch");
  }
  for (int e = 0; e < n; ++e) {
    double g = rewards[e] + gamma_ * per_env_g_[e];
    per_env_g_[e] = g;
    count_ += 1;
    double delta = g - mean_g_;
    mean_g_ += delta / static_cast<double>(count_);
    m2_ += delta * (g - mean_g_);
    g_abs_max_ = std::max(g_abs_max_, std::abs(g));
    if (terminated[e] || truncated[e]) per_env_g_[e] = 0.0;
  }
}

double ReturnTracker::denom() const {
  return std::max(std::sqrt(variance() + kEps), g_abs_max_ / g_max_support_);
}

Vector ReturnTracker::scale(const Vector& rewards) const {
  return rewards / denom();
}

}  // namespace flashsac
