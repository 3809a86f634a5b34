#include "flashsac/trainer.hpp"

#include <algorithm>
#include <cstdlib>
#include <malloc.h>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace flashsac {

namespace {

// rng stream tags
constexpr std::uint64_t kTagActorInit = 0xA0;
constexpr std::uint64_t kTagCriticInit = 0xC0;  // +i
constexpr std::uint64_t kTagEnv = 0xE0;
constexpr std::uint64_t kTagWarmup = 0x10;
constexpr std::uint64_t kTagNoise = 0x20;  // +env index
constexpr std::uint64_t kTagReplay = 0x30;
constexpr std::uint64_t kTagTargetEps = 0x40;
constexpr std::uint64_t kTagActorEps = 0x50;
constexpr std::uint64_t kTagEval = 0x60;

std::string dump_norms(const AgentState& agent) {
  std::ostringstream os;
  os << "param_norm_actor=" << param_norm(agent.actor)
     << " param_norm_critic0=" << param_norm(agent.critics[0])
     << " param_norm_critic1=" << param_norm(agent.critics[1])
     << " alpha=" << agent.temperature.alpha();
  return os.str();
}

Matrix concat_state_action(const Matrix& s, const Matrix& a) {
  Matrix x(s.rows(), s.cols() + a.cols());
  x.leftCols(s.cols()) = s;
  x.rightCols(a.cols()) = a;
  return x;
}

double mean_row_norm(const Matrix& m) {
  return m.rowwise().norm().mean();
}

}  // namespace

void TrainerConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0))
      throw ConfigError(std::string(name) + " must be positive, got " +
                        std::to_string(v));
  };
  if (!(gamma > 0.0 && gamma < 1.0))
    throw ConfigError("gamma must lie in (0,1), got " + std::to_string(gamma));
  positive(n_envs, "n_envs");
  positive(static_cast<double>(buffer_capacity), "buffer_capacity");
  positive(batch_size, "batch_size");
  if (batch_size > buffer_capacity)
    throw ConfigError("batch_size must be <= buffer_capacity");
  positive(static_cast<double>(utd_updates), "utd_updates");
  positive(static_cast<double>(utd_per_transitions), "utd_per_transitions");
  positive(actor_update_delay, "actor_update_delay");
  if (!(tau > 0.0 && tau <= 1.0))
    throw ConfigError("tau must lie in (0,1], got " + std::to_string(tau));
  positive(lr_init, "lr_init");
  positive(lr_end, "lr_end");
  positive(static_cast<double>(total_env_steps), "total_env_steps");
  if (warmup_transitions < 0)
    throw ConfigError("warmup_transitions must be >= 0");
  positive(sigma_tgt, "sigma_tgt");
  positive(zeta_s, "zeta_s");
  positive(zeta_kmax, "zeta_kmax");
  if (!(g_min < g_max)) throw ConfigError("g_min must be < g_max");
  if (n_atoms < 2) throw ConfigError("n_atoms must be >= 2");
  positive(actor_width, "actor_width");
  if (actor_blocks < 0) throw ConfigError("actor_blocks must be >= 0");
  positive(critic_width, "critic_width");
  if (critic_blocks < 0) throw ConfigError("critic_blocks must be >= 0");
  positive(reward_multiplier, "reward_multiplier");
  if (!VecEnv::is_known_env(env))
    throw ConfigError("unknown environment '" + env + "'");
}

AgentState make_agent(const TrainerConfig& cfg, int state_dim, int action_dim) {
  AgentState agent;
  agent.state_dim = state_dim;
  agent.action_dim = action_dim;
  NetworkConfig actor_cfg{state_dim, cfg.actor_width, cfg.actor_blocks,
                          2 * action_dim, kBlockExpansion, cfg.use_batch_norm};
  agent.actor = init_params(actor_cfg, stream_seed(cfg.seed, kTagActorInit));
  NetworkConfig critic_cfg{state_dim + action_dim, cfg.critic_width,
                           cfg.critic_blocks, cfg.n_atoms, kBlockExpansion,
                           cfg.use_batch_norm};
  for (int i = 0; i < 2; ++i) {
    agent.critics[static_cast<size_t>(i)] = init_params(
        critic_cfg, stream_seed(cfg.seed, kTagCriticInit + static_cast<std::uint64_t>(i)));
    agent.target_critics[static_cast<size_t>(i)] = agent.critics[static_cast<size_t>(i)];
  }
  agent.temperature.log_alpha = std::log(kAlphaInit);
  agent.actor_opt = make_adam_state(agent.actor);
  agent.critic_opt[0] = make_adam_state(agent.critics[0]);
  agent.critic_opt[1] = make_adam_state(agent.critics[1]);
  return agent;
}

double lr_at(const TrainerConfig& cfg, long long env_step) {
  double t = std::clamp(static_cast<double>(env_step) /
                            static_cast<double>(cfg.total_env_steps),
                        0.0, 1.0);
  return cfg.lr_end + (cfg.lr_init - cfg.lr_end) * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

UpdateMetrics critic_update(AgentState& agent, const ReplayBuffer::Batch& batch,
                            const ReturnTracker& tracker, const AtomGrid& grid,
                            const TrainerConfig& cfg, double lr, Rng& rng) {
  const int B = static_cast<int>(batch.states.rows());
  const double alpha = agent.temperature.alpha();

  Vector r_scaled = tracker.scale(batch.rewards_raw);

  // a' ~ pi(.|s') with fresh noise; action selection statistics (eval mode)
  ForwardResult actor_out = network_forward(batch.next_states, agent.actor, Mode::Eval);
  HeadSplit split = split_actor_head(actor_out.head_out);
  Matrix eps(B, agent.action_dim);
  for (int r = 0; r < B; ++r)
    for (int c = 0; c < agent.action_dim; ++c) eps(r, c) = rng.normal();
  SampleResult next_sample = sample_action(split.head, eps);

  // Both halves of the Bellman update share one batch-normalized forward.
  Matrix x_cat(2 * B, agent.state_dim + agent.action_dim);
  x_cat.topRows(B) = concat_state_action(batch.states, batch.actions);
  x_cat.bottomRows(B) = concat_state_action(batch.next_states, next_sample.action);

  // Target distribution: per-sample pick of the lower-mean target critic.
  std::array<Matrix, 2> target_probs_half;
  std::array<Vector, 2> target_means;
  for (int j = 0; j < 2; ++j) {
    ForwardResult out = network_forward(x_cat, agent.target_critics[static_cast<size_t>(j)],
                                        Mode::Train);
    Matrix probs = softmax_rows(out.head_out.bottomRows(B));
    target_means[static_cast<size_t>(j)] = categorical_mean(grid, probs);
    target_probs_half[static_cast<size_t>(j)] = std::move(probs);
  }
  Matrix source_probs(B, grid.n_atoms);
  for (int b = 0; b < B; ++b) {
    int pick = target_means[0][b] <= target_means[1][b] ? 0 : 1;
    source_probs.row(b) = target_probs_half[static_cast<size_t>(pick)].row(b);
  }

  // Tz_i = r + gamma * (1 - terminated) * (z_i - alpha * log pi(a'|s'))
  Matrix target_values(B, grid.n_atoms);
  for (int b = 0; b < B; ++b) {
    double mask = batch.terminated[static_cast<size_t>(b)] ? 0.0 : 1.0;
    double shift = r_scaled[b];
    double scale = cfg.gamma * mask;
    double ent = alpha * next_sample.log_prob[b];
    for (int i = 0; i < grid.n_atoms; ++i)
      target_values(b, i) = shift + scale * (grid.atoms[i] - ent);
  }
  Matrix target_probs = project_target(grid, target_values, source_probs);

  UpdateMetrics m;
  m.target_mean = (target_probs * grid.atoms).mean();

  double grad_sq = 0.0;
  std::array<NetworkGrads, 2> grads;
  std::array<double, 2> losses{};
  for (int i = 0; i < 2; ++i) {
    NetworkTape tape;
    ForwardResult out =
        network_forward_train(x_cat, agent.critics[static_cast<size_t>(i)], &tape);
    Matrix logits_top = out.head_out.topRows(B);
    losses[static_cast<size_t>(i)] = cross_entropy(logits_top, target_probs);
    if (i == 0) {
      m.feature_norm_critic = mean_row_norm(tape.features.topRows(B));
      m.q_mean = categorical_mean(grid, softmax_rows(logits_top)).mean();
    }
    Matrix head_grad = Matrix::Zero(2 * B, grid.n_atoms);
    head_grad.topRows(B) = cross_entropy_grad(logits_top, target_probs);
    grads[static_cast<size_t>(i)] = zero_grads(agent.critics[static_cast<size_t>(i)]);
    network_backward(agent.critics[static_cast<size_t>(i)], tape, head_grad,
                     &grads[static_cast<size_t>(i)]);
    grad_sq += grads_to_vector(agent.critics[static_cast<size_t>(i)],
                               grads[static_cast<size_t>(i)])
                   .squaredNorm();
  }
  m.critic_loss = losses[0] + losses[1];
  m.grad_norm_critic = std::sqrt(grad_sq);
  m.alpha = alpha;
  if (!std::isfinite(m.critic_loss)) {
    throw NumericalError("critic loss is not finite; " + dump_norms(agent));
  }

  for (int i = 0; i < 2; ++i) {
    adam_step(agent.critics[static_cast<size_t>(i)], grads[static_cast<size_t>(i)],
              agent.critic_opt[static_cast<size_t>(i)], lr);
    if (cfg.use_weight_projection) project_weights(agent.critics[static_cast<size_t>(i)]);
    ema_update(agent.target_critics[static_cast<size_t>(i)],
               agent.critics[static_cast<size_t>(i)], cfg.tau);
  }
  return m;
}

UpdateMetrics actor_update(AgentState& agent, const ReplayBuffer::Batch& batch,
                           const AtomGrid& grid, const TrainerConfig& cfg,
                           double lr, Rng& rng) {
  const int B = static_cast<int>(batch.states.rows());
  const double alpha = agent.temperature.alpha();
  const double inv_b = 1.0 / static_cast<double>(B);

  NetworkTape actor_tape;
  ForwardResult actor_out =
      network_forward_train(batch.states, agent.actor, &actor_tape);
  HeadSplit split = split_actor_head(actor_out.head_out);
  Matrix eps(B, agent.action_dim);
  for (int r = 0; r < B; ++r)
    for (int c = 0; c < agent.action_dim; ++c) eps(r, c) = rng.normal();
  SampleResult sample = sample_action(split.head, eps);

  // Q estimate: min over the two online critics of the categorical mean,
  // evaluated with running statistics so the actor batch does not perturb
  // the critics' normalizers.
  Matrix x = concat_state_action(batch.states, sample.action);
  std::array<NetworkTape, 2> critic_tapes;
  std::array<Matrix, 2> critic_probs;
  std::array<Vector, 2> q;
  for (int i = 0; i < 2; ++i) {
    ForwardResult out = network_forward(x, agent.critics[static_cast<size_t>(i)],
                                        Mode::Eval, &critic_tapes[static_cast<size_t>(i)]);
    critic_probs[static_cast<size_t>(i)] = softmax_rows(out.head_out);
    q[static_cast<size_t>(i)] =
        categorical_mean(grid, critic_probs[static_cast<size_t>(i)]);
  }
  Vector q_min(B);
  std::vector<int> pick(static_cast<size_t>(B));
  for (int b = 0; b < B; ++b) {
    pick[static_cast<size_t>(b)] = q[0][b] <= q[1][b] ? 0 : 1;
    q_min[b] = q[static_cast<size_t>(pick[static_cast<size_t>(b)])][b];
  }

  UpdateMetrics m;
  m.actor_loss = (alpha * sample.log_prob.array() - q_min.array()).mean();
  if (!std::isfinite(m.actor_loss)) {
    throw NumericalError("actor loss is not finite; " + dump_norms(agent));
  }

  // d(loss)/d(action) through the selected critic's categorical mean
  Matrix d_action = Matrix::Zero(B, agent.action_dim);
  for (int i = 0; i < 2; ++i) {
    Matrix head_grad = Matrix::Zero(B, grid.n_atoms);
    bool any = false;
    for (int b = 0; b < B; ++b) {
      if (pick[static_cast<size_t>(b)] != i) continue;
      any = true;
      // d(meanQ)/d(logit_k) = p_k * (z_k - meanQ); d(loss)/d(meanQ) = -1/B
      double mq = q[static_cast<size_t>(i)][b];
      for (int k = 0; k < grid.n_atoms; ++k)
        head_grad(b, k) = -inv_b * critic_probs[static_cast<size_t>(i)](b, k) *
                          (grid.atoms[k] - mq);
    }
    if (!any) continue;
    Matrix d_input = network_backward(agent.critics[static_cast<size_t>(i)],
                                      critic_tapes[static_cast<size_t>(i)],
                                      head_grad, nullptr);
    d_action += d_input.rightCols(agent.action_dim);
  }

  // d(loss)/d(log pi) = alpha / B per sample
  Vector d_logprob = Vector::Constant(B, alpha * inv_b);
  Matrix d_mean, d_log_std;
  sample_action_backward(sample, d_action, d_logprob, d_mean, d_log_std);
  Matrix head_grad = merge_head_grad(split, d_mean, d_log_std);

  NetworkGrads grads = zero_grads(agent.actor);
  network_backward(agent.actor, actor_tape, head_grad, &grads);
  m.grad_norm_actor = grads_to_vector(agent.actor, grads).norm();

  adam_step(agent.actor, grads, agent.actor_opt, lr);
  if (cfg.use_weight_projection) project_weights(agent.actor);

  double h_target = entropy_target(agent.action_dim, cfg.sigma_tgt);
  temperature_update(agent.temperature, sample.log_prob, h_target,
                     kTemperatureLrMult * lr);

  m.policy_entropy = -sample.log_prob.mean();
  m.alpha = agent.temperature.alpha();
  return m;
}

EvalResult evaluate(const AgentState& agent, const std::string& env_name,
                    int episodes, std::uint64_t seed, double reward_multiplier) {
  VecEnv env(env_name, 1);
  EvalResult res;
  res.returns.reserve(static_cast<size_t>(episodes));
  for (int ep = 0; ep < episodes; ++ep) {
    Matrix obs = env.reset(stream_seed(seed, kTagEval + static_cast<std::uint64_t>(ep)));
    double ret = 0.0;
    for (;;) {
      ForwardResult out = network_forward(obs, agent.actor, Mode::Eval);
      HeadSplit split = split_actor_head(out.head_out);
      Matrix action = split.head.mean.array().tanh();
      StepResult sr = env.step(action);
      ret += reward_multiplier * sr.reward[0];
      obs = sr.obs;
      if (sr.terminated[0] || sr.truncated[0]) break;
    }
    res.returns.push_back(ret);
  }
  double n = static_cast<double>(episodes);
  res.mean = std::accumulate(res.returns.begin(), res.returns.end(), 0.0) / n;
  double sq = 0.0;
  for (double r : res.returns) sq += (r - res.mean) * (r - res.mean);
  res.stddev = std::sqrt(sq / n);
  return res;
}

Diagnostics diagnostics(const AgentState& agent, const ReplayBuffer::Batch& batch,
                        const ReturnTracker& tracker, const AtomGrid& grid,
                        const TrainerConfig& cfg, Rng& rng) {
  if (batch.states.rows() < 1)
    throw UsageError("diagnostics: batch must be nonempty");
  Diagnostics d;
  d.param_norm_actor = param_norm(agent.actor);
  d.param_norm_critic = std::sqrt(
      std::pow(param_norm(agent.critics[0]), 2) +
      std::pow(param_norm(agent.critics[1]), 2));
  d.alpha = agent.temperature.alpha();
  // Norm probes run on copies so the agent itself is untouched.
  AgentState probe = agent;
  UpdateMetrics cm = critic_update(probe, batch, tracker, grid, cfg, 0.0, rng);
  d.grad_norm_critic = cm.grad_norm_critic;
  d.feature_norm = cm.feature_norm_critic;
  UpdateMetrics am = actor_update(probe, batch, grid, cfg, 0.0, rng);
  d.grad_norm_actor = am.grad_norm_actor;
  d.policy_entropy = am.policy_entropy;
  return d;
}

TrainResult train(const TrainerConfig& cfg, const TrainOptions& opts,
                  const TrainHooks* hooks, AgentState* out_agent) {
  cfg.validate();
#if defined(__GLIBC__)
  // large activation buffers churn every update; keep them in the arena
  // instead of handing them back to the kernel
  mallopt(M_MMAP_THRESHOLD, 512 * 1024 * 1024);
  mallopt(M_TRIM_THRESHOLD, 512 * 1024 * 1024);
#endif
  if (const char* threads = std::getenv("FLASHSAC_THREADS")) {
    Eigen::setNbThreads(std::max(1, std::atoi(threads)));
  }
  if (opts.log_interval <= 0 || opts.eval_interval <= 0 || opts.eval_episodes <= 0)
    throw ConfigError("log_interval, eval_interval and eval_episodes must be positive");

  VecEnv env(cfg.env, cfg.n_envs);
  const int S = env.state_dim();
  const int A = env.action_dim();
  AtomGrid grid = make_grid(cfg.g_min, cfg.g_max, cfg.n_atoms);
  ZetaSampler zeta = make_zeta_sampler(cfg.zeta_s, cfg.zeta_kmax);
  ReturnTracker tracker(cfg.gamma, cfg.n_envs, cfg.g_max);
  ReplayBuffer buffer(cfg.buffer_capacity, S, A);
  AgentState agent = make_agent(cfg, S, A);

  Rng warmup_rng(stream_seed(cfg.seed, kTagWarmup));
  Rng replay_rng(stream_seed(cfg.seed, kTagReplay));
  Rng target_rng(stream_seed(cfg.seed, kTagTargetEps));
  Rng actor_rng(stream_seed(cfg.seed, kTagActorEps));
  std::vector<Rng> noise_rng;
  std::vector<NoiseRepeatState> noise_state(static_cast<size_t>(cfg.n_envs));
  for (int e = 0; e < cfg.n_envs; ++e)
    noise_rng.emplace_back(stream_seed(cfg.seed, kTagNoise + static_cast<std::uint64_t>(e)));

  Matrix obs = env.reset(stream_seed(cfg.seed, kTagEnv));
  const long long warmup = cfg.resolved_warmup();
  const double h_target = entropy_target(A, cfg.sigma_tgt);
  const std::uint64_t eval_seed = stream_seed(cfg.seed, 0xEEE);

  TrainResult result;
  long long env_step = 0;      // vectorized steps: one advances all n_envs envs
  long long transitions = 0;   // env_step * n_envs
  long long pending_numer = 0;
  long long episodes_done = 0;
  Vector ep_return = Vector::Zero(cfg.n_envs);
  std::vector<double> window_returns;
  double last_train_return = 0.0;
  UpdateMetrics last_critic, last_actor;
  EvalResult last_eval = evaluate(agent, cfg.env, opts.eval_episodes, eval_seed,
                                  cfg.reward_multiplier);
  if (hooks && hooks->on_eval) hooks->on_eval(agent, 0, last_eval);

  auto emit_row = [&](long long step_now) {
    MetricsRow row;
    row.env_step = step_now;
    // Deterministic progress clock (nominal 10k transitions/s) so identical
    // runs produce identical files; real timing goes to stdout summaries.
    row.wall_time_s = static_cast<double>(step_now) / 10000.0;
    row.episodes_done = episodes_done;
    if (!window_returns.empty()) {
      last_train_return =
          std::accumulate(window_returns.begin(), window_returns.end(), 0.0) /
          static_cast<double>(window_returns.size());
      window_returns.clear();
    }
    row.train_return_mean = last_train_return;
    row.eval_return_mean = last_eval.mean;
    row.eval_return_std = last_eval.stddev;
    row.critic_loss = last_critic.critic_loss;
    row.actor_loss = last_actor.actor_loss;
    row.alpha = agent.temperature.alpha();
    row.policy_entropy = last_actor.policy_entropy;
    row.entropy_target = h_target;
    row.lr = lr_at(cfg, step_now);
    row.param_norm_actor = param_norm(agent.actor);
    row.param_norm_critic = std::sqrt(std::pow(param_norm(agent.critics[0]), 2) +
                                      std::pow(param_norm(agent.critics[1]), 2));
    row.grad_norm_critic = last_critic.grad_norm_critic;
    row.feature_norm_critic = last_critic.feature_norm_critic;
    row.reward_scale_denom = tracker.denom();
    result.metrics.push_back(row);
    if (hooks && hooks->on_log) hooks->on_log(agent, row);
  };

  emit_row(0);

  while (env_step < cfg.total_env_steps) {
    // --- act
    Matrix actions(cfg.n_envs, A);
    if (transitions < warmup) {
      for (int e = 0; e < cfg.n_envs; ++e) {
        for (int c = 0; c < A; ++c) actions(e, c) = warmup_rng.uniform(-1.0, 1.0);
        // the repeat process ticks from step 0 even while actions are random
        next_noise(noise_state[static_cast<size_t>(e)], zeta, A,
                   noise_rng[static_cast<size_t>(e)]);
      }
    } else {
      ForwardResult out = network_forward(obs, agent.actor, Mode::Eval);
      HeadSplit split = split_actor_head(out.head_out);
      Matrix eps(cfg.n_envs, A);
      for (int e = 0; e < cfg.n_envs; ++e)
        eps.row(e) = next_noise(noise_state[static_cast<size_t>(e)], zeta, A,
                                noise_rng[static_cast<size_t>(e)]);
      SampleResult sample = sample_action(split.head, eps);
      actions = sample.action;
    }

    // --- step
    StepResult sr = env.step(actions);
    Vector rewards = cfg.reward_multiplier * sr.reward;
    tracker.update(rewards, sr.terminated, sr.truncated);
    buffer.push_batch(obs, actions, rewards, sr.final_obs, sr.terminated,
                      sr.truncated);
    for (int e = 0; e < cfg.n_envs; ++e) {
      ep_return[e] += rewards[e];
      if (sr.terminated[static_cast<size_t>(e)] || sr.truncated[static_cast<size_t>(e)]) {
        episodes_done += 1;
        window_returns.push_back(ep_return[e]);
        ep_return[e] = 0.0;
        noise_state[static_cast<size_t>(e)].remaining = 0;  // fresh noise next episode
      }
    }
    long long prev_step = env_step;
    env_step += 1;
    transitions += cfg.n_envs;
    agent.env_step = env_step;
    obs = sr.obs;

    // --- updates (UTD with integer carry over post-warmup transitions)
    long long eligible = std::clamp(transitions - warmup, 0LL,
                                    static_cast<long long>(cfg.n_envs));
    pending_numer += eligible * cfg.utd_updates;
    while (pending_numer >= cfg.utd_per_transitions) {
      pending_numer -= cfg.utd_per_transitions;
      double lr = lr_at(cfg, env_step);
      ReplayBuffer::Batch batch = buffer.sample(cfg.batch_size, replay_rng);
      last_critic = critic_update(agent, batch, tracker, grid, cfg, lr, target_rng);
      agent.update_counter += 1;
      result.critic_updates += 1;
      if (hooks && hooks->post_update) hooks->post_update(agent, last_critic, false);
      if (agent.update_counter % cfg.actor_update_delay == 0) {
        last_actor = actor_update(agent, batch, grid, cfg, lr, actor_rng);
        result.actor_updates += 1;
        if (hooks && hooks->post_update) hooks->post_update(agent, last_actor, true);
      }
    }

    // --- periodic eval and logging
    if (env_step / opts.eval_interval > prev_step / opts.eval_interval) {
      last_eval = evaluate(agent, cfg.env, opts.eval_episodes, eval_seed,
                           cfg.reward_multiplier);
      if (hooks && hooks->on_eval) hooks->on_eval(agent, env_step, last_eval);
    }
    if (env_step / opts.log_interval > prev_step / opts.log_interval) {
      emit_row(env_step);
    }
  }

  last_eval = evaluate(agent, cfg.env, opts.eval_episodes, eval_seed,
                       cfg.reward_multiplier);
  if (hooks && hooks->on_eval) hooks->on_eval(agent, env_step, last_eval);
  if (result.metrics.empty() || result.metrics.back().env_step != env_step) {
    emit_row(env_step);
  } else {
    result.metrics.back().eval_return_mean = last_eval.mean;
    result.metrics.back().eval_return_std = last_eval.stddev;
  }
  result.episodes_done = episodes_done;
  result.final_eval_mean = last_eval.mean;
  result.final_eval_std = last_eval.stddev;
  if (out_agent) *out_agent = std::move(agent);
  return result;
}

// ---- checkpoint serialization ----------------------------------------------

namespace {

void push_network(std::vector<NamedTensor>& out, const std::string& prefix,
                  const NetworkParams& p) {
  out.push_back(NamedTensor::from_matrix(prefix + ".embed.weight", p.embed.weight));
  out.push_back(NamedTensor::from_vector(prefix + ".embed.bias", p.embed.bias));
  for (size_t i = 0; i < p.blocks.size(); ++i) {
    std::string bp = prefix + ".blocks." + std::to_string(i);
    const BlockParams& b = p.blocks[i];
    out.push_back(NamedTensor::from_matrix(bp + ".expand.weight", b.expand.weight));
    out.push_back(NamedTensor::from_vector(bp + ".expand.bias", b.expand.bias));
    out.push_back(NamedTensor::from_vector(bp + ".bn.gamma", b.bn.gamma));
    out.push_back(NamedTensor::from_vector(bp + ".bn.beta", b.bn.beta));
    out.push_back(NamedTensor::from_vector(bp + ".bn.running_mean", b.bn.running_mean));
    out.push_back(NamedTensor::from_vector(bp + ".bn.running_var", b.bn.running_var));
    out.push_back(NamedTensor::from_matrix(bp + ".project.weight", b.project.weight));
    out.push_back(NamedTensor::from_vector(bp + ".project.bias", b.project.bias));
  }
  out.push_back(NamedTensor::from_vector(prefix + ".final_norm.gamma",
                                         p.final_norm.gamma));
  out.push_back(NamedTensor::from_matrix(prefix + ".head.weight", p.head.weight));
  out.push_back(NamedTensor::from_vector(prefix + ".head.bias", p.head.bias));
}

const NamedTensor& find_tensor(const std::vector<NamedTensor>& ts,
                               const std::string& name) {
  for (const auto& t : ts)
    if (t.name == name) return t;
  throw IoError("checkpoint is missing tensor '" + name + "'");
}

bool has_tensor(const std::vector<NamedTensor>& ts, const std::string& name) {
  for (const auto& t : ts)
    if (t.name == name) return true;
  return false;
}

NetworkParams read_network(const std::vector<NamedTensor>& ts,
                           const std::string& prefix, bool use_batch_norm) {
  NetworkParams p;
  p.embed.weight = find_tensor(ts, prefix + ".embed.weight").to_matrix();
  p.embed.bias = find_tensor(ts, prefix + ".embed.bias").to_vector();
  int n_blocks = 0;
  while (has_tensor(ts, prefix + ".blocks." + std::to_string(n_blocks) +
                            ".expand.weight"))
    ++n_blocks;
  p.blocks.resize(static_cast<size_t>(n_blocks));
  for (int i = 0; i < n_blocks; ++i) {
    std::string bp = prefix + ".blocks." + std::to_string(i);
    BlockParams& b = p.blocks[static_cast<size_t>(i)];
    b.expand.weight = find_tensor(ts, bp + ".expand.weight").to_matrix();
    b.expand.bias = find_tensor(ts, bp + ".expand.bias").to_vector();
    b.bn.gamma = find_tensor(ts, bp + ".bn.gamma").to_vector();
    b.bn.beta = find_tensor(ts, bp + ".bn.beta").to_vector();
    b.bn.running_mean = find_tensor(ts, bp + ".bn.running_mean").to_vector();
    b.bn.running_var = find_tensor(ts, bp + ".bn.running_var").to_vector();
    b.project.weight = find_tensor(ts, bp + ".project.weight").to_matrix();
    b.project.bias = find_tensor(ts, bp + ".project.bias").to_vector();
    b.expansion = static_cast<int>(b.expand.weight.rows() / b.project.weight.rows());
  }
  p.final_norm.gamma = find_tensor(ts, prefix + ".final_norm.gamma").to_vector();
  p.final_norm.beta = Vector::Zero(p.final_norm.gamma.size());
  p.head.weight = find_tensor(ts, prefix + ".head.weight").to_matrix();
  p.head.bias = find_tensor(ts, prefix + ".head.bias").to_vector();
  p.config.input_dim = p.embed.in_dim();
  p.config.hidden = p.embed.out_dim();
  p.config.blocks = n_blocks;
  p.config.head_dim = p.head.out_dim();
  p.config.expansion = n_blocks > 0 ? p.blocks[0].expansion : kBlockExpansion;
  p.config.use_batch_norm = use_batch_norm;
  return p;
}

}  // namespace

std::vector<NamedTensor> agent_to_tensors(const AgentState& agent) {
  std::vector<NamedTensor> out;
  push_network(out, "actor", agent.actor);
  push_network(out, "critic.0", agent.critics[0]);
  push_network(out, "critic.1", agent.critics[1]);
  push_network(out, "target_critic.0", agent.target_critics[0]);
  push_network(out, "target_critic.1", agent.target_critics[1]);
  out.push_back(NamedTensor::scalar("temperature.log_alpha",
                                    agent.temperature.log_alpha));
  out.push_back(NamedTensor::scalar("meta.use_batch_norm",
                                    agent.actor.config.use_batch_norm ? 1.0 : 0.0));
  out.push_back(NamedTensor::scalar("meta.action_dim",
                                    static_cast<double>(agent.action_dim)));
  return out;
}

AgentState agent_from_tensors(const std::vector<NamedTensor>& tensors) {
  AgentState agent;
  bool use_bn = find_tensor(tensors, "meta.use_batch_norm").to_scalar() != 0.0;
  agent.actor = read_network(tensors, "actor", use_bn);
  agent.critics[0] = read_network(tensors, "critic.0", use_bn);
  agent.critics[1] = read_network(tensors, "critic.1", use_bn);
  agent.target_critics[0] = read_network(tensors, "target_critic.0", use_bn);
  agent.target_critics[1] = read_network(tensors, "target_critic.1", use_bn);
  agent.temperature.log_alpha =
      find_tensor(tensors, "temperature.log_alpha").to_scalar();
  agent.action_dim =
      static_cast<int>(find_tensor(tensors, "meta.action_dim").to_scalar());
  agent.state_dim = agent.actor.config.input_dim;
  agent.actor_opt = make_adam_state(agent.actor);
  agent.critic_opt[0] = make_adam_state(agent.critics[0]);
  agent.critic_opt[1] = make_adam_state(agent.critics[1]);
  return agent;
}

void save_agent(const AgentState& agent, const std::string& path) {
  write_tensor_file(path, agent_to_tensors(agent));
}

AgentState load_agent(const std::string& path) {
  return agent_from_tensors(read_tensor_file(path));
}

}  // namespace flashsac
