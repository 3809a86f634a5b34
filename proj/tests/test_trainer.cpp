#include <limits>
#include <cmath>

#include "doctest.h"
#include "flashsac/trainer.hpp"
#include "gradient_suites.hpp"

using namespace flashsac;

namespace {

TrainerConfig tiny_config() {
  TrainerConfig cfg;
  cfg.n_envs = 4;
  cfg.buffer_capacity = 5000;
  cfg.batch_size = 32;
  cfg.utd_updates = 1;
  cfg.utd_per_transitions = 16;
  cfg.actor_update_delay = 2;
  cfg.total_env_steps = 2000;
  cfg.warmup_transitions = 256;
  cfg.actor_width = 8;
  cfg.actor_blocks = 1;
  cfg.critic_width = 8;
  cfg.critic_blocks = 1;
  cfg.n_atoms = 11;
  cfg.seed = 1;
  return cfg;
}

ReplayBuffer::Batch single_transition_batch(double s, double a, double r,
                                            double s2, bool term) {
  ReplayBuffer::Batch b;
  b.states = Matrix::Constant(1, 1, s);
  b.actions = Matrix::Constant(1, 1, a);
  b.rewards_raw = Vector::Constant(1, r);
  b.next_states = Matrix::Constant(1, 1, s2);
  b.terminated = BoolVec{static_cast<std::uint8_t>(term)};
  b.truncated = BoolVec{0};
  return b;
}

// independent scalar evaluation of a zero-block network: embed -> rms -> head
Vector tiny_network_eval(const NetworkParams& p, const Vector& x) {
  Vector h = p.embed.weight * x + p.embed.bias;
  double rms = std::sqrt(h.squaredNorm() / static_cast<double>(h.size()) + 1e-8);
  Vector f(h.size());
  for (Eigen::Index i = 0; i < h.size(); ++i) f[i] = p.final_norm.gamma[i] * h[i] / rms;
  return p.head.weight * f + p.head.bias;
}

}  // namespace

TEST_CASE("cosine learning rate schedule endpoints and midpoint") {
  TrainerConfig cfg;
  cfg.lr_init = 3e-4;
  cfg.lr_end = 1.5e-4;
  cfg.total_env_steps = 100000;
  CHECK(lr_at(cfg, 0) == doctest::Approx(3e-4).epsilon(1e-12));
  CHECK(lr_at(cfg, 50000) == doctest::Approx(2.25e-4).epsilon(1e-9));
  CHECK(lr_at(cfg, 100000) == doctest::Approx(1.5e-4).epsilon(1e-12));
}

TEST_CASE("critic update reproduces a hand-computed minimal instance") {
  // one transition, two atoms, zero blocks: every stage is hand-checkable
  TrainerConfig cfg = tiny_config();
  cfg.actor_blocks = 0;
  cfg.critic_blocks = 0;
  cfg.actor_width = 2;
  cfg.critic_width = 2;
  cfg.n_atoms = 2;
  cfg.g_min = -1.0;
  cfg.g_max = 1.0;
  cfg.gamma = 0.9;
  AtomGrid grid = make_grid(cfg.g_min, cfg.g_max, cfg.n_atoms);
  AgentState agent = make_agent(cfg, 1, 1);
  ReturnTracker tracker(cfg.gamma, 1, cfg.g_max);
  tracker.update(Vector::Constant(1, 0.8), BoolVec{0}, BoolVec{0});
  tracker.update(Vector::Constant(1, -0.3), BoolVec{0}, BoolVec{0});

  auto batch = single_transition_batch(0.3, 0.2, 0.7, -0.4, false);
  const double alpha = agent.temperature.alpha();

  // --- independent reconstruction
  Rng oracle_rng(12345);
  double eps = oracle_rng.normal();
  Vector actor_out =
      tiny_network_eval(agent.actor, Vector::Constant(1, -0.4));
  double mean = actor_out[0];
  double log_std = std::clamp(actor_out[1], -10.0, 2.0);
  double u = mean + std::exp(log_std) * eps;
  double a_next = std::tanh(u);
  double log_prob = -0.5 * std::log(2.0 * 3.14159265358979323846) - log_std -
                    0.5 * eps * eps -
                    std::log(1.0 - a_next * a_next + 1e-6);

  double r_scaled = 0.7 / tracker.denom();
  // target critics on the (s', a') half (no batch norm at zero blocks, so the
  // concatenated forward equals a plain forward)
  Vector in_next(2);
  in_next << -0.4, a_next;
  std::array<Vector, 2> logits_next;
  std::array<double, 2> means_next;
  for (int j = 0; j < 2; ++j) {
    logits_next[j] = tiny_network_eval(agent.target_critics[j], in_next);
    double m = std::max(logits_next[j][0], logits_next[j][1]);
    double e0 = std::exp(logits_next[j][0] - m), e1 = std::exp(logits_next[j][1] - m);
    double p1 = e1 / (e0 + e1);
    means_next[j] = grid.atoms[0] * (1.0 - p1) + grid.atoms[1] * p1;
  }
  int pick = means_next[0] <= means_next[1] ? 0 : 1;
  Vector lp = logits_next[pick];
  double mx = std::max(lp[0], lp[1]);
  double e0 = std::exp(lp[0] - mx), e1 = std::exp(lp[1] - mx);
  Vector source(2);
  source << e0 / (e0 + e1), e1 / (e0 + e1);

  // shift atoms and project on the two-atom grid
  Vector want_target = Vector::Zero(2);
  for (int i = 0; i < 2; ++i) {
    double tz = r_scaled + cfg.gamma * (grid.atoms[i] - alpha * log_prob);
    tz = std::clamp(tz, grid.g_min, grid.g_max);
    double pos = (tz - grid.g_min) / grid.delta;
    int lo = std::min(static_cast<int>(std::floor(pos)), 0);
    double frac = pos - lo;
    want_target[lo] += source[i] * (1.0 - frac);
    if (lo + 1 < 2) want_target[lo + 1] += source[i] * frac;
  }

  // cross-entropy of both online critics on the (s, a) half
  Vector in_cur(2);
  in_cur << 0.3, 0.2;
  double want_loss = 0.0;
  for (int i = 0; i < 2; ++i) {
    Vector logits = tiny_network_eval(agent.critics[i], in_cur);
    double m = std::max(logits[0], logits[1]);
    double lse = m + std::log(std::exp(logits[0] - m) + std::exp(logits[1] - m));
    want_loss -= want_target[0] * (logits[0] - lse) + want_target[1] * (logits[1] - lse);
  }

  // --- production path
  Rng rng(12345);
  UpdateMetrics got = critic_update(agent, batch, tracker, grid, cfg, 1e-4, rng);
  CHECK(got.critic_loss == doctest::Approx(want_loss).epsilon(1e-10));
  CHECK(got.target_mean ==
        doctest::Approx(want_target[0] * grid.atoms[0] +
                        want_target[1] * grid.atoms[1])
            .epsilon(1e-10));
}

TEST_CASE("terminated transitions bootstrap to the projected point reward") {
  TrainerConfig cfg = tiny_config();
  AtomGrid grid = make_grid(cfg.g_min, cfg.g_max, cfg.n_atoms);
  AgentState agent = make_agent(cfg, 1, 1);
  ReturnTracker tracker(cfg.gamma, 1, cfg.g_max);
  tracker.update(Vector::Constant(1, 1.0), BoolVec{0}, BoolVec{0});

  ReplayBuffer::Batch batch;
  const int B = 4;
  batch.states = Matrix::Random(B, 1);
  batch.actions = Matrix::Random(B, 1);
  batch.rewards_raw = (Vector(B) << 0.5, -0.25, 1.0, 0.0).finished();
  batch.next_states = Matrix::Random(B, 1);
  batch.terminated = BoolVec{1, 1, 1, 1};
  batch.truncated = BoolVec{0, 0, 0, 0};

  Rng rng(3);
  UpdateMetrics m = critic_update(agent, batch, tracker, grid, cfg, 1e-4, rng);
  // with every sample terminated, the target collapses to the scaled reward
  Vector scaled = tracker.scale(batch.rewards_raw);
  double want = scaled.array().max(cfg.g_min).min(cfg.g_max).mean();
  CHECK(m.target_mean == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("truncated transitions still bootstrap") {
  // identical batches except for the done flavor must produce different
  // targets: truncation keeps the bootstrap term, termination masks it
  TrainerConfig cfg = tiny_config();
  AtomGrid grid = make_grid(cfg.g_min, cfg.g_max, cfg.n_atoms);
  ReturnTracker tracker(cfg.gamma, 1, cfg.g_max);
  tracker.update(Vector::Constant(1, 1.0), BoolVec{0}, BoolVec{0});

  auto run = [&](bool terminated, bool truncated) {
    AgentState agent = make_agent(cfg, 1, 1);
    ReplayBuffer::Batch b = single_transition_batch(0.3, 0.1, 0.5, -0.2, false);
    b.terminated[0] = terminated;
    b.truncated[0] = truncated;
    Rng rng(9);
    return critic_update(agent, b, tracker, grid, cfg, 1e-4, rng).target_mean;
  };
  double bootstrap_mean = run(false, true);
  double masked_mean = run(true, false);
  double plain_mean = run(false, false);
  CHECK(bootstrap_mean == doctest::Approx(plain_mean).epsilon(1e-12));
  CHECK(std::abs(bootstrap_mean - masked_mean) > 1e-6);
}

TEST_CASE("tau = 1 makes targets equal online critics after one update") {
  TrainerConfig cfg = tiny_config();
  cfg.tau = 1.0;
  AtomGrid grid = make_grid(cfg.g_min, cfg.g_max, cfg.n_atoms);
  AgentState agent = make_agent(cfg, 1, 1);
  ReturnTracker tracker(cfg.gamma, 1, cfg.g_max);
  tracker.update(Vector::Constant(1, 1.0), BoolVec{0}, BoolVec{0});
  auto batch = single_transition_batch(0.1, 0.0, 0.4, 0.2, false);
  Rng rng(2);
  critic_update(agent, batch, tracker, grid, cfg, 3e-4, rng);
  for (int i = 0; i < 2; ++i) {
    CHECK((params_to_vector(agent.target_critics[i]) -
           params_to_vector(agent.critics[i]))
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }
}

TEST_CASE("identical critics make the min selection irrelevant") {
  TrainerConfig cfg = tiny_config();
  AtomGrid grid = make_grid(cfg.g_min, cfg.g_max, cfg.n_atoms);
  AgentState agent = make_agent(cfg, 1, 1);
  agent.critics[1] = agent.critics[0];
  agent.target_critics[0] = agent.critics[0];
  agent.target_critics[1] = agent.critics[0];
  AgentState mirrored = agent;
  std::swap(mirrored.target_critics[0], mirrored.target_critics[1]);

  ReturnTracker tracker(cfg.gamma, 1, cfg.g_max);
  tracker.update(Vector::Constant(1, 1.0), BoolVec{0}, BoolVec{0});
  auto batch = single_transition_batch(0.1, 0.0, 0.4, 0.2, false);
  Rng r1(2), r2(2);
  UpdateMetrics a = critic_update(agent, batch, tracker, grid, cfg, 1e-4, r1);
  UpdateMetrics b = critic_update(mirrored, batch, tracker, grid, cfg, 1e-4, r2);
  CHECK(a.critic_loss == doctest::Approx(b.critic_loss).epsilon(1e-14));
}

TEST_CASE("flat critics give the actor no action gradient") {
  TrainerConfig cfg = tiny_config();
  AtomGrid grid = make_grid(cfg.g_min, cfg.g_max, cfg.n_atoms);
  AgentState agent = make_agent(cfg, 1, 1);
  // constant categorical output: zero head weight and bias
  for (int i = 0; i < 2; ++i) {
    agent.critics[i].head.weight.setZero();
    agent.critics[i].head.bias.setZero();
  }
  agent.temperature.log_alpha = -60.0;  // alpha ~ 1e-26
  ReplayBuffer::Batch batch;
  batch.states = Matrix::Random(8, 1);
  batch.actions = Matrix::Random(8, 1);
  batch.rewards_raw = Vector::Zero(8);
  batch.next_states = Matrix::Random(8, 1);
  batch.terminated = BoolVec(8, 0);
  batch.truncated = BoolVec(8, 0);
  Rng rng(4);
  UpdateMetrics m = actor_update(agent, batch, grid, cfg, 1e-4, rng);
  CHECK(m.grad_norm_actor < 1e-12);
}

TEST_CASE("actor update gradient matches finite differences end to end") {
  CHECK(suites::suite_actor_loss(3, 909) < 1e-4);
}

TEST_CASE("bandit regression: actor mean converges to the reward argmax") {
  // gamma-masked single-state problem: reward = -|a - 0.3|, fixed state.
  // The kink makes the optimum sharp at the categorical critic's resolution.
  TrainerConfig cfg = tiny_config();
  cfg.batch_size = 256;
  cfg.actor_width = 16;
  cfg.critic_width = 64;
  cfg.actor_blocks = 1;
  cfg.critic_blocks = 1;
  cfg.n_atoms = 101;
  cfg.lr_init = 1e-3;
  cfg.lr_end = 1e-4;
  cfg.total_env_steps = 4000;  // drives the cosine schedule below
  cfg.sigma_tgt = 0.05;  // keep the entropy bonus from biasing the argmax
  AtomGrid grid = make_grid(cfg.g_min, cfg.g_max, cfg.n_atoms);
  AgentState agent = make_agent(cfg, 1, 1);
  ReturnTracker tracker(cfg.gamma, 1, cfg.g_max);
  Rng data_rng(7), update_rng(8), actor_rng(9);

  const double best_action = 0.1;
  for (int step = 0; step < 4000; ++step) {
    const int B = cfg.batch_size;
    ReplayBuffer::Batch batch;
    batch.states = Matrix::Zero(B, 1);
    batch.actions.resize(B, 1);
    batch.rewards_raw.resize(B);
    batch.next_states = Matrix::Zero(B, 1);
    batch.terminated = BoolVec(B, 1);  // masks the bootstrap term
    batch.truncated = BoolVec(B, 0);
    for (int b = 0; b < B; ++b) {
      double a = data_rng.uniform(-1.0, 1.0);
      batch.actions(b, 0) = a;
      double r = -std::abs(a - best_action);
      batch.rewards_raw[b] = r;
      tracker.update(Vector::Constant(1, r), BoolVec{1}, BoolVec{0});
    }
    double lr = lr_at(cfg, step);
    critic_update(agent, batch, tracker, grid, cfg, lr, update_rng);
    if (step % 2 == 1) actor_update(agent, batch, grid, cfg, lr, actor_rng);
  }
  ForwardResult out = network_forward(Matrix::Zero(1, 1), agent.actor, Mode::Eval);
  HeadSplit split = split_actor_head(out.head_out);
  double learned = std::tanh(split.head.mean(0, 0));
  CHECK(std::abs(learned - best_action) < 0.05);
}

TEST_CASE("utd accounting yields exact update counts") {
  // env_step counts vectorized steps; transitions = env_step * n_envs
  SUBCASE("nominal ratio over a short run") {
    TrainerConfig cfg = tiny_config();
    cfg.utd_updates = 2;
    cfg.utd_per_transitions = 1024;
    cfg.n_envs = 16;
    cfg.total_env_steps = 512;  // 8192 transitions
    cfg.warmup_transitions = 512;
    cfg.batch_size = 32;
    TrainResult r = train(cfg, TrainOptions{128, 512, 2});
    CHECK(r.critic_updates == (512 * 16 - 512) * 2 / 1024);
  }
  SUBCASE("many envs give the documented updates per vectorized step") {
    TrainerConfig cfg = tiny_config();
    cfg.utd_updates = 2;
    cfg.utd_per_transitions = 1024;
    cfg.n_envs = 1024;
    cfg.total_env_steps = 3;
    cfg.warmup_transitions = 1024;
    cfg.batch_size = 64;
    cfg.buffer_capacity = 8192;
    TrainResult r = train(cfg, TrainOptions{1, 3, 1});
    CHECK(r.critic_updates == 4);  // 2 per step after the warmup step
  }
  SUBCASE("one update per transition with a single environment") {
    TrainerConfig cfg = tiny_config();
    cfg.utd_updates = 1;
    cfg.utd_per_transitions = 1;
    cfg.n_envs = 1;
    cfg.total_env_steps = 600;
    cfg.warmup_transitions = 100;
    cfg.batch_size = 16;
    TrainResult r = train(cfg, TrainOptions{200, 600, 2});
    CHECK(r.critic_updates == 500);
  }
  SUBCASE("actor updates lag by exactly the configured delay") {
    TrainerConfig cfg = tiny_config();
    cfg.total_env_steps = 256;
    cfg.warmup_transitions = 128;
    TrainResult r = train(cfg, TrainOptions{128, 256, 2});
    CHECK(r.actor_updates == r.critic_updates / cfg.actor_update_delay);
  }
}

TEST_CASE("training runs are bit-reproducible") {
  TrainerConfig cfg = tiny_config();
  cfg.total_env_steps = 256;
  TrainOptions opts{64, 128, 2};
  TrainResult a = train(cfg, opts);
  TrainResult b = train(cfg, opts);
  REQUIRE(a.metrics.size() == b.metrics.size());
  for (size_t i = 0; i < a.metrics.size(); ++i) {
    CHECK(metrics_row_to_csv(a.metrics[i]) == metrics_row_to_csv(b.metrics[i]));
  }
  TrainerConfig cfg2 = cfg;
  cfg2.seed = 2;
  TrainResult c = train(cfg2, opts);
  bool any_diff = false;
  for (size_t i = 0; i < a.metrics.size() && i < c.metrics.size(); ++i)
    any_diff |= metrics_row_to_csv(a.metrics[i]) != metrics_row_to_csv(c.metrics[i]);
  CHECK(any_diff);
}

TEST_CASE("metrics env_step column is strictly increasing and finite") {
  TrainerConfig cfg = tiny_config();
  cfg.total_env_steps = 400;
  TrainResult r = train(cfg, TrainOptions{80, 160, 2});
  REQUIRE(r.metrics.size() > 2);
  for (size_t i = 1; i < r.metrics.size(); ++i)
    CHECK(r.metrics[i].env_step > r.metrics[i - 1].env_step);
  for (const auto& row : r.metrics) {
    CHECK(std::isfinite(row.critic_loss));
    CHECK(std::isfinite(row.eval_return_mean));
    CHECK(std::isfinite(row.param_norm_critic));
    CHECK(std::isfinite(row.reward_scale_denom));
  }
}

TEST_CASE("a random agent on pendulum evaluates in the reward-bounded range") {
  TrainerConfig cfg = tiny_config();
  AgentState agent = make_agent(cfg, 3, 1);
  EvalResult res = evaluate(agent, "pendulum", 10, 7);
  CHECK(res.mean <= 0.0);
  CHECK(res.mean >= -2000.0);
  EvalResult res2 = evaluate(agent, "pendulum", 10, 7);
  CHECK(res.mean == res2.mean);
  CHECK(res.stddev == res2.stddev);
}

TEST_CASE("projection invariants hold after every update in a short run") {
  TrainerConfig cfg = tiny_config();
  cfg.total_env_steps = 128;
  cfg.warmup_transitions = 128;
  long long checked = 0;
  TrainHooks hooks;
  hooks.post_update = [&](const AgentState& agent, const UpdateMetrics&, bool) {
    for (const auto* net :
         {&agent.actor, &agent.critics[0], &agent.critics[1]}) {
      for (Eigen::Index r = 0; r < net->embed.weight.rows(); ++r)
        CHECK(net->embed.weight.row(r).norm() == doctest::Approx(1.0).epsilon(1e-6));
      for (const auto& b : net->blocks) {
        CHECK(b.bn.gamma.norm() ==
              doctest::Approx(std::sqrt(double(b.bn.dim()))).epsilon(1e-6));
        CHECK((b.bn.running_var.array() >= 0.0).all());
      }
      CHECK(net->final_norm.gamma.norm() ==
            doctest::Approx(std::sqrt(double(net->config.hidden))).epsilon(1e-6));
    }
    ++checked;
  };
  train(cfg, TrainOptions{64, 128, 2}, &hooks);
  CHECK(checked > 0);
}

TEST_CASE("non-finite parameters abort with a numerical error") {
  TrainerConfig cfg = tiny_config();
  AtomGrid grid = make_grid(cfg.g_min, cfg.g_max, cfg.n_atoms);
  AgentState agent = make_agent(cfg, 1, 1);
  agent.actor.embed.weight(0, 0) = std::numeric_limits<double>::infinity();
  ReturnTracker tracker(cfg.gamma, 1, cfg.g_max);
  tracker.update(Vector::Constant(1, 1.0), BoolVec{0}, BoolVec{0});
  auto batch = single_transition_batch(0.1, 0.0, 0.4, 0.2, false);
  Rng rng(2);
  CHECK_THROWS_AS(critic_update(agent, batch, tracker, grid, cfg, 1e-4, rng),
                  NumericalError);
}

TEST_CASE("diagnostics report the closed-form parameter norm at init") {
  TrainerConfig cfg = tiny_config();
  cfg.critic_width = 8;
  cfg.critic_blocks = 2;
  cfg.n_atoms = 11;
  AgentState agent = make_agent(cfg, 3, 1);
  // per critic: unit rows (embed 8 + blocks 2*(32+8) + head 11) and
  // gamma norms sqrt(d): bn d=32 twice, final rms d=8
  double rows = 8 + 2 * (32 + 8) + 11;
  double gammas = 32 + 32 + 8;
  double per_critic = std::sqrt(rows + gammas);
  CHECK(param_norm(agent.critics[0]) == doctest::Approx(per_critic).epsilon(1e-12));

  ReplayBuffer::Batch batch;
  batch.states = Matrix::Random(16, 3);
  batch.actions = Matrix::Random(16, 1);
  batch.rewards_raw = Vector::Zero(16);
  batch.next_states = Matrix::Random(16, 3);
  batch.terminated = BoolVec(16, 0);
  batch.truncated = BoolVec(16, 0);
  ReturnTracker tracker(cfg.gamma, 1, cfg.g_max);
  tracker.update(Vector::Constant(1, 1.0), BoolVec{0}, BoolVec{0});
  AtomGrid grid = make_grid(cfg.g_min, cfg.g_max, cfg.n_atoms);
  Rng rng(3);
  Diagnostics d = diagnostics(agent, batch, tracker, grid, cfg, rng);
  CHECK(d.param_norm_critic ==
        doctest::Approx(std::sqrt(2.0) * per_critic).epsilon(1e-12));
  // uniform gamma at init: post-RMSNorm rows have norm sqrt(hidden)
  CHECK(d.feature_norm == doctest::Approx(std::sqrt(8.0)).epsilon(1e-5));
  CHECK(d.alpha == doctest::Approx(0.01));
  CHECK(std::isfinite(d.grad_norm_critic));
  CHECK(std::isfinite(d.policy_entropy));
}
