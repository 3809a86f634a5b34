#pragma once

#include "flashsac/common.hpp"

namespace flashsac {

// Adaptive reward scaling. Tracks the running discounted return G per
// environment, pools every observed G into Welford variance statistics plus a
// running |G| maximum, and divides rewards by
//   max(sqrt(var_G + eps), G_abs_max / G_max).
class ReturnTracker {
 public:
  ReturnTracker(double gamma, int n_envs, double g_max_support);

  void update(const Vector& rewards, const BoolVec& terminated,
              const BoolVec& truncated);

  Vector scale(const Vector& rewards) const;

  double variance() const {
    return count_ > 0 ? m2_ / static_cast<double>(count_) : 0.0;
  }
  double denom() const;
  double g_abs_max() const { return g_abs_max_; }
  long long count() const { return count_; }
  const Vector& per_env_returns() const { return per_env_g_; }

 private:
  double gamma_;
  double g_max_support_;
  Vector per_env_g_;
  long long count_ = 0;
  double mean_g_ = 0.0;
  double m2_ = 0.0;
  double g_abs_max_ = 0.0;
  static constexpr double kEps = 1e-8;
};

}  // namespace flashsac
