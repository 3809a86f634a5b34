#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>

#include "flashsac/checkpoint.hpp"
#include "flashsac/common.hpp"
#include "flashsac/distributional.hpp"
#include "flashsac/envs.hpp"
#include "flashsac/exploration.hpp"
#include "flashsac/metrics.hpp"
#include "flashsac/nn.hpp"
#include "flashsac/policy.hpp"
#include "flashsac/replay.hpp"
#include "flashsac/reward_norm.hpp"

namespace flashsac {

struct TrainerConfig {
  double gamma = 0.99;
  int n_envs = 16;
  long long buffer_capacity = 1'000'000;
  int batch_size = 2048;
  long long utd_updates = 2;
  long long utd_per_transitions = 1024;
  int actor_update_delay = 2;
  double tau = 0.01;
  double lr_init = 3e-4;
  double lr_end = 1.5e-4;
  long long total_env_steps = 150'000;
  // 0 means "resolve to 10 * batch_size".
  long long warmup_transitions = 0;
  double sigma_tgt = 0.15;
  double zeta_s = 2.0;
  int zeta_kmax = 16;
  double g_min = -5.0;
  double g_max = 5.0;
  int n_atoms = 101;
  int actor_width = 128;
  int actor_blocks = 2;
  int critic_width = 256;
  int critic_blocks = 2;
  std::uint64_t seed = 1;
  bool use_weight_projection = true;
  bool use_batch_norm = true;
  double reward_multiplier = 1.0;
  std::string env = "pendulum";

  long long resolved_warmup() const {
    return warmup_transitions > 0 ? warmup_transitions
                                  : 10LL * static_cast<long long>(batch_size);
  }
  void validate() const;  // throws ConfigError naming the offending field
};

constexpr double kAlphaInit = 0.01;
constexpr int kBlockExpansion = 4;
// The temperature must traverse several nats of log-alpha within the few
// thousand actor updates a desk-scale run performs; it follows the network
// schedule at a fixed multiple.
constexpr double kTemperatureLrMult = 10.0;

struct AgentState {
  NetworkParams actor;
  std::array<NetworkParams, 2> critics;
  std::array<NetworkParams, 2> target_critics;
  Temperature temperature;
  AdamState actor_opt;
  std::array<AdamState, 2> critic_opt;
  long long update_counter = 0;
  long long env_step = 0;
  int state_dim = 0;
  int action_dim = 0;
};

AgentState make_agent(const TrainerConfig& cfg, int state_dim, int action_dim);

struct UpdateMetrics {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double grad_norm_critic = 0.0;
  double grad_norm_actor = 0.0;
  double feature_norm_critic = 0.0;
  double policy_entropy = 0.0;
  double q_mean = 0.0;
  double target_mean = 0.0;
  double alpha = 0.0;
};

// One distributional Bellman step on both critics (cross-batch forward,
// per-sample min target selection, C51 projection, cross-entropy), followed
// by Adam, weight projection and the target EMA.
UpdateMetrics critic_update(AgentState& agent, const ReplayBuffer::Batch& batch,
                            const ReturnTracker& tracker, const AtomGrid& grid,
                            const TrainerConfig& cfg, double lr, Rng& rng);

// Reparameterized policy-gradient step against the min of the two online
// critics (eval-mode statistics), followed by the temperature update.
UpdateMetrics actor_update(AgentState& agent, const ReplayBuffer::Batch& batch,
                           const AtomGrid& grid, const TrainerConfig& cfg,
                           double lr, Rng& rng);

double lr_at(const TrainerConfig& cfg, long long env_step);

struct EvalResult {
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<double> returns;
};

EvalResult evaluate(const AgentState& agent, const std::string& env_name,
                    int episodes, std::uint64_t seed,
                    double reward_multiplier = 1.0);

struct Diagnostics {
  double param_norm_actor = 0.0;
  double param_norm_critic = 0.0;  // over both online critics
  double feature_norm = 0.0;       // post-RMSNorm batch mean, critic 0
  double grad_norm_actor = 0.0;
  double grad_norm_critic = 0.0;
  double alpha = 0.0;
  double policy_entropy = 0.0;
};

Diagnostics diagnostics(const AgentState& agent, const ReplayBuffer::Batch& batch,
                        const ReturnTracker& tracker, const AtomGrid& grid,
                        const TrainerConfig& cfg, Rng& rng);

struct TrainHooks {
  // After every critic or actor update (is_actor distinguishes them).
  std::function<void(const AgentState&, const UpdateMetrics&, bool is_actor)>
      post_update;
  // At every metrics row emission.
  std::function<void(const AgentState&, const MetricsRow&)> on_log;
  // After every evaluation pass.
  std::function<void(const AgentState&, long long env_step, const EvalResult&)>
      on_eval;
};

struct TrainOptions {
  long long log_interval = 1000;
  long long eval_interval = 5000;
  int eval_episodes = 10;
};

struct TrainResult {
  std::vector<MetricsRow> metrics;
  long long critic_updates = 0;
  long long actor_updates = 0;
  long long episodes_done = 0;
  double final_eval_mean = 0.0;
  double final_eval_std = 0.0;
};

// Full training loop: vectorized collection with noise repetition, adaptive
// reward scaling, UTD-scheduled updates and cosine learning-rate decay.
// The returned agent is moved into *out_agent when non-null.
TrainResult train(const TrainerConfig& cfg, const TrainOptions& opts,
                  const TrainHooks* hooks = nullptr,
                  AgentState* out_agent = nullptr);

// Checkpoint container round trip for a whole agent (networks + temperature).
std::vector<NamedTensor> agent_to_tensors(const AgentState& agent);
AgentState agent_from_tensors(const std::vector<NamedTensor>& tensors);
void save_agent(const AgentState& agent, const std::string& path);
AgentState load_agent(const std::string& path);

}  // namespace flashsac
