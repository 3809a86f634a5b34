#include "flashsac/exploration.hpp"

#include <algorithm>
#include <cmath>

namespace flashsac {

ZetaSampler make_zeta_sampler(double s, int k_max) {
  if (k_max < 1) throw ConfigError("make_zeta_sampler: k_max must be >= 1");
  if (s <= 0.0) throw ConfigError("make_zeta_sampler: s must be > 0");
  ZetaSampler z;
  z.s = s;
  z.k_max = k_max;
  z.cdf.resize(static_cast<size_t>(k_max));
  double total = 0.0;
  for (int k = 1; k <= k_max; ++k) total += std::pow(k, -s);
  double acc = 0.0;
  for (int k = 1; k <= k_max; ++k) {
    acc += std::pow(k, -s) / total;
    z.cdf[static_cast<size_t>(k - 1)] = acc;
  }
  z.cdf.back() = 1.0;
  return z;
}

double zeta_pmf(const ZetaSampler& z, int k) {
  if (k < 1 || k > z.k_max) return 0.0;
  double prev = (k == 1) ? 0.0 : z.cdf[static_cast<size_t>(k - 2)];
  return z.cdf[static_cast<size_t>(k - 1)] - prev;
}

int sample_repeat_length(const ZetaSampler& z, Rng& rng) {
  double u = rng.uniform();
  auto it = std::upper_bound(z.cdf.begin(), z.cdf.end(), u);
  if (it == z.cdf.end()) return z.k_max;
  return static_cast<int>(it - z.cdf.begin()) + 1;
}

Vector next_noise(NoiseRepeatState& state, const ZetaSampler& z, int action_dim,
                  Rng& rng) {
  if (state.remaining > 0) {
    state.remaining -= 1;
    return state.eps;
  }
  state.eps = rng.normal_vector(action_dim);
  int k = sample_repeat_length(z, rng);
  state.remaining = k - 1;
  return state.eps;
}

}  // namespace flashsac
