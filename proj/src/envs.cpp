#include "flashsac/envs.hpp"

#include <cmath>

namespace flashsac {

namespace {

constexpr double kPi = 3.14159265358979323846;

double wrap_angle(double theta) {
  double w = std::fmod(theta + kPi, 2.0 * kPi);
  if (w < 0) w += 2.0 * kPi;
  return w - kPi;
}

// pendulum
constexpr double kPendG = 9.81, kPendM = 1.0, kPendL = 1.0, kPendDt = 0.05;
constexpr double kPendMaxSpeed = 8.0, kPendMaxTorque = 2.0;

// cartpole
constexpr double kCartMass = 1.0, kPoleMass = 0.1, kPoleHalfLen = 0.5;
constexpr double kCartG = 9.81, kCartDt = 0.02, kCartForce = 10.0;
constexpr double kCartThetaLimit = 0.21, kCartXLimit = 2.4;

// reacher
constexpr double kLink = 0.1, kReacherDt = 0.02, kReacherVelScale = 4.0;

// lqr
constexpr double kLqrA = 1.0, kLqrB = 1.0, kLqrU = 2.0, kLqrNoise = 0.01;
constexpr double kLqrQ = 1.0, kLqrR = 1.0, kLqrBound = 10.0;

}  // namespace

bool VecEnv::is_known_env(const std::string& name) {
  return name == "pendulum" || name == "cartpole" || name == "reacher" ||
         name == "lqr";
}

VecEnv::VecEnv(const std::string& name, int n_envs) : name_(name), n_envs_(n_envs) {
  if (n_envs <= 0) throw ConfigError("VecEnv: n_envs must be positive");
  if (name == "pendulum") {
    kind_ = Kind::Pendulum;
    state_dim_ = 3;
    action_dim_ = 1;
    episode_limit_ = 200;
    phys_dim_ = 2;  // theta, theta_dot
  } else if (name == "cartpole") {
    kind_ = Kind::Cartpole;
    state_dim_ = 4;
    action_dim_ = 1;
    episode_limit_ = 500;
    phys_dim_ = 4;  // x, x_dot, theta, theta_dot
  } else if (name == "reacher") {
    kind_ = Kind::Reacher;
    state_dim_ = 10;
    action_dim_ = 2;
    episode_limit_ = 150;
    phys_dim_ = 6;  // theta1, theta2, v1, v2, target_x, target_y
  } else if (name == "lqr") {
    kind_ = Kind::Lqr;
    state_dim_ = 1;
    action_dim_ = 1;
    episode_limit_ = 100;
    phys_dim_ = 1;  // x
  } else {
    throw ConfigError("unknown environment '" + name + "'");
  }
  phys_.assign(static_cast<size_t>(n_envs_), Vector::Zero(phys_dim_));
  steps_.assign(static_cast<size_t>(n_envs_), 0);
  rng_.assign(static_cast<size_t>(n_envs_), Rng(0));
}

void VecEnv::reset_env(int e) {
  Rng& r = rng_[static_cast<size_t>(e)];
  Vector& p = phys_[static_cast<size_t>(e)];
  steps_[static_cast<size_t>(e)] = 0;
  switch (kind_) {
    case Kind::Pendulum:
      p[0] = r.uniform(-kPi, kPi);
      p[1] = r.uniform(-1.0, 1.0);
      break;
    case Kind::Cartpole:
      for (int i = 0; i < 4; ++i) p[i] = r.uniform(-0.05, 0.05);
      break;
    case Kind::Reacher: {
      p[0] = r.uniform(-kPi, kPi);
      p[1] = r.uniform(-kPi, kPi);
      p[2] = 0.0;
      p[3] = 0.0;
      // target uniform by area over the reachable annulus
      double r2 = r.uniform(0.05 * 0.05, 0.2 * 0.2);
      double rad = std::sqrt(r2);
      double phi = r.uniform(-kPi, kPi);
      p[4] = rad * std::cos(phi);
      p[5] = rad * std::sin(phi);
      break;
    }
    case Kind::Lqr:
      p[0] = r.uniform(-1.0, 1.0);
      break;
  }
}

Vector VecEnv::observe(int e) const {
  const Vector& p = phys_[static_cast<size_t>(e)];
  Vector obs(state_dim_);
  switch (kind_) {
    case Kind::Pendulum:
      obs << std::cos(p[0]), std::sin(p[0]), p[1];
      break;
    case Kind::Cartpole:
      obs = p;
      break;
    case Kind::Reacher: {
      double fx = kLink * std::cos(p[0]) + kLink * std::cos(p[0] + p[1]);
      double fy = kLink * std::sin(p[0]) + kLink * std::sin(p[0] + p[1]);
      obs << std::cos(p[0]), std::sin(p[0]), std::cos(p[1]), std::sin(p[1]),
          p[2], p[3], p[4], p[5], fx - p[4], fy - p[5];
      break;
    }
    case Kind::Lqr:
      obs << p[0];
      break;
  }
  return obs;
}

std::pair<double, bool> VecEnv::step_env(int e,
                                         const Eigen::Ref<const Vector>& action) {
  Vector& p = phys_[static_cast<size_t>(e)];
  Rng& r = rng_[static_cast<size_t>(e)];
  switch (kind_) {
    case Kind::Pendulum: {
      double u = kPendMaxTorque * std::clamp(action[0], -1.0, 1.0);
      double theta = p[0], theta_dot = p[1];
      double reward = -(wrap_angle(theta) * wrap_angle(theta) +
                        0.1 * theta_dot * theta_dot + 0.001 * u * u);
      // semi-implicit Euler: velocity first
      double acc = 3.0 * kPendG / (2.0 * kPendL) * std::sin(theta) +
                   3.0 * u / (kPendM * kPendL * kPendL);
      theta_dot = std::clamp(theta_dot + acc * kPendDt, -kPendMaxSpeed,
                             kPendMaxSpeed);
      theta += theta_dot * kPendDt;
      p[0] = theta;
      p[1] = theta_dot;
      return {reward, false};
    }
    case Kind::Cartpole: {
      double f = kCartForce * std::clamp(action[0], -1.0, 1.0);
      double x = p[0], x_dot = p[1], theta = p[2], theta_dot = p[3];
      double cos_t = std::cos(theta), sin_t = std::sin(theta);
      double total_mass = kCartMass + kPoleMass;
      double temp =
          (f + kPoleMass * kPoleHalfLen * theta_dot * theta_dot * sin_t) /
          total_mass;
      double theta_acc =
          (kCartG * sin_t - cos_t * temp) /
          (kPoleHalfLen * (4.0 / 3.0 - kPoleMass * cos_t * cos_t / total_mass));
      double x_acc = temp - kPoleMass * kPoleHalfLen * theta_acc * cos_t / total_mass;
      p[0] = x + kCartDt * x_dot;
      p[1] = x_dot + kCartDt * x_acc;
      p[2] = theta + kCartDt * theta_dot;
      p[3] = theta_dot + kCartDt * theta_acc;
      bool dead = std::abs(p[2]) >= kCartThetaLimit || std::abs(p[0]) >= kCartXLimit;
      return {1.0, dead};
    }
    case Kind::Reacher: {
      Vector a = action.cwiseMax(-1.0).cwiseMin(1.0);
      p[2] = kReacherVelScale * a[0];
      p[3] = kReacherVelScale * a[1];
      p[0] += kReacherDt * p[2];
      p[1] += kReacherDt * p[3];
      double fx = kLink * std::cos(p[0]) + kLink * std::cos(p[0] + p[1]);
      double fy = kLink * std::sin(p[0]) + kLink * std::sin(p[0] + p[1]);
      double dist = std::hypot(fx - p[4], fy - p[5]);
      double reward = -dist - 0.01 * a.squaredNorm();
      return {reward, false};
    }
    case Kind::Lqr: {
      double u = kLqrU * std::clamp(action[0], -1.0, 1.0);
      double x = p[0];
      double reward = -(kLqrQ * x * x + kLqrR * u * u);
      p[0] = kLqrA * x + kLqrB * u + kLqrNoise * r.normal();
      return {reward, std::abs(p[0]) > kLqrBound};
    }
  }
  throw UsageError("unreachable env kind");
}

Matrix VecEnv::reset(std::uint64_t seed) {
  for (int e = 0; e < n_envs_; ++e) {
    rng_[static_cast<size_t>(e)] =
        Rng(stream_seed(seed, 0xE401 + static_cast<std::uint64_t>(e)));
    reset_env(e);
  }
  Matrix obs(n_envs_, state_dim_);
  for (int e = 0; e < n_envs_; ++e) obs.row(e) = observe(e);
  return obs;
}

StepResult VecEnv::step(const Matrix& actions) {
  if (actions.rows() != n_envs_ || actions.cols() != action_dim_)
    throw ShapeError("VecEnv::step: action matrix shape mismatch");
  StepResult res;
  res.obs.resize(n_envs_, state_dim_);
  res.final_obs.resize(n_envs_, state_dim_);
  res.reward.resize(n_envs_);
  res.terminated.assign(static_cast<size_t>(n_envs_), 0);
  res.truncated.assign(static_cast<size_t>(n_envs_), 0);
  for (int e = 0; e < n_envs_; ++e) {
    auto [reward, terminated] = step_env(e, actions.row(e).transpose());
    steps_[static_cast<size_t>(e)] += 1;
    bool truncated = !terminated && steps_[static_cast<size_t>(e)] >= episode_limit_;
    res.reward[e] = reward;
    res.terminated[static_cast<size_t>(e)] = terminated ? 1 : 0;
    res.truncated[static_cast<size_t>(e)] = truncated ? 1 : 0;
    res.final_obs.row(e) = observe(e);
    if (terminated || truncated) {
      reset_env(e);
      res.obs.row(e) = observe(e);
    } else {
      res.obs.row(e) = res.final_obs.row(e);
    }
  }
  return res;
}

}  // namespace flashsac
