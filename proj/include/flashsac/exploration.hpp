#pragma once

#include "flashsac/common.hpp"

namespace flashsac {

// Truncated Zeta distribution over repeat lengths: P(k) = k^-s / sum_j j^-s,
// k in [1, k_max]. Sampled by inverse CDF on one uniform draw.
struct ZetaSampler {
  double s = 2.0;
  int k_max = 16;
  std::vector<double> cdf;  // cdf[k-1] = P(length <= k); last entry 1
};

ZetaSampler make_zeta_sampler(double s, int k_max);
int sample_repeat_length(const ZetaSampler& z, Rng& rng);
double zeta_pmf(const ZetaSampler& z, int k);

// Per-environment held noise vector with a countdown.
struct NoiseRepeatState {
  Vector eps;
  int remaining = 0;
};

// Returns the noise vector for this step. While `remaining > 0` the held
// vector is returned unchanged; otherwise a fresh N(0, I) draw is made and a
// new repeat length sampled.
Vector next_noise(NoiseRepeatState& state, const ZetaSampler& z, int action_dim,
                  Rng& rng);

}  // namespace flashsac
