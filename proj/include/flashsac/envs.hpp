#pragma once

#include <memory>
#include <string>

#include "flashsac/common.hpp"

namespace flashsac {

// Step output. `obs` is the observation to act on next (fresh episode start
// where an episode ended); `final_obs` is the pre-reset observation of this
// step and is what belongs in a stored transition's next_state.
struct StepResult {
  Matrix obs;
  Matrix final_obs;
  Vector reward;
  BoolVec terminated;
  BoolVec truncated;
};

// Vectorized analytic control environments, deterministic given a reset seed.
// Actions live in [-1, 1]^A; each environment applies its own physical
// scaling internally.
class VecEnv {
 public:
  VecEnv(const std::string& name, int n_envs);

  Matrix reset(std::uint64_t seed);
  StepResult step(const Matrix& actions);

  int n_envs() const { return n_envs_; }
  int state_dim() const { return state_dim_; }
  int action_dim() const { return action_dim_; }
  int episode_limit() const { return episode_limit_; }
  const std::string& name() const { return name_; }

  static bool is_known_env(const std::string& name);

 private:
  enum class Kind { Pendulum, Cartpole, Reacher, Lqr };

  void reset_env(int e);
  Vector observe(int e) const;
  // steps env e with the given action row; returns (reward, terminated)
  std::pair<double, bool> step_env(int e, const Eigen::Ref<const Vector>& action);

  Kind kind_;
  std::string name_;
  int n_envs_, state_dim_, action_dim_, episode_limit_;
  int phys_dim_;
  std::vector<Vector> phys_;  // per-env physical state
  std::vector<int> steps_;
  std::vector<Rng> rng_;
};

}  // namespace flashsac
