#include <cmath>

#include "doctest.h"
#include "flashsac/policy.hpp"
#include "gradient_suites.hpp"
#include "oracles/fd.hpp"
#include "oracles/naive.hpp"

using namespace flashsac;

TEST_CASE("sample at the mean of a unit gaussian") {
  GaussianHead head{Matrix::Zero(1, 1), Matrix::Zero(1, 1)};
  SampleResult s = sample_action(head, Matrix::Zero(1, 1));
  CHECK(s.action(0, 0) == doctest::Approx(0.0));
  // squash correction log(1 - 0 + eps) is ~1e-6, not exactly zero
  CHECK(s.log_prob[0] == doctest::Approx(-0.918939).epsilon(1e-5));
}

TEST_CASE("zero eps gives tanh(mean)") {
  Rng rng(1);
  GaussianHead head{suites::random_matrix(4, 3, rng),
                    suites::random_matrix(4, 3, rng, 0.3)};
  SampleResult s = sample_action(head, Matrix::Zero(4, 3));
  CHECK((s.action - head.mean.array().tanh().matrix()).cwiseAbs().maxCoeff() <
        1e-15);
}

TEST_CASE("log prob matches the per-dimension oracle") {
  Rng rng(2);
  const int B = 5, A = 3;
  GaussianHead head{suites::random_matrix(B, A, rng),
                    suites::random_matrix(B, A, rng, 0.5)};
  Matrix eps = suites::random_matrix(B, A, rng);
  SampleResult s = sample_action(head, eps);
  for (int b = 0; b < B; ++b) {
    double want = oracles::naive_squashed_log_prob(
        head.mean.row(b), head.log_std.row(b), eps.row(b), kSquashEps);
    CHECK(s.log_prob[b] == doctest::Approx(want).epsilon(1e-10));
  }
}

TEST_CASE("actions stay strictly inside the unit box") {
  Rng rng(3);
  GaussianHead head{suites::random_matrix(64, 2, rng, 30.0),
                    Matrix::Constant(64, 2, 2.0)};
  SampleResult s = sample_action(head, suites::random_matrix(64, 2, rng, 3.0));
  CHECK((s.action.array().abs() < 1.0).all());
}

TEST_CASE("sample gradients match finite differences") {
  Rng rng(4);
  const int B = 3, A = 2;
  Matrix mean = suites::random_matrix(B, A, rng);
  Matrix log_std = suites::random_matrix(B, A, rng, 0.4);
  Matrix eps = suites::random_matrix(B, A, rng);
  Matrix ra = suites::random_matrix(B, A, rng);
  Vector rl = suites::random_vector(B, rng);

  GaussianHead head{mean, log_std};
  SampleResult s = sample_action(head, eps);
  Matrix d_mean, d_log_std;
  sample_action_backward(s, ra, rl, d_mean, d_log_std);

  Vector packed(2 * B * A);
  Eigen::Index at = 0;
  for (int b = 0; b < B; ++b)
    for (int a = 0; a < A; ++a) packed[at++] = mean(b, a);
  for (int b = 0; b < B; ++b)
    for (int a = 0; a < A; ++a) packed[at++] = log_std(b, a);
  auto loss = [&](const Vector& v) {
    GaussianHead h2{mean, log_std};
    Eigen::Index k = 0;
    for (int b = 0; b < B; ++b)
      for (int a = 0; a < A; ++a) h2.mean(b, a) = v[k++];
    for (int b = 0; b < B; ++b)
      for (int a = 0; a < A; ++a) h2.log_std(b, a) = v[k++];
    SampleResult ss = sample_action(h2, eps);
    return (ss.action.array() * ra.array()).sum() +
           (ss.log_prob.array() * rl.array()).sum();
  };
  Vector fd = oracles::fd_gradient(loss, packed);
  Vector analytic(2 * B * A);
  at = 0;
  for (int b = 0; b < B; ++b)
    for (int a = 0; a < A; ++a) analytic[at++] = d_mean(b, a);
  for (int b = 0; b < B; ++b)
    for (int a = 0; a < A; ++a) analytic[at++] = d_log_std(b, a);
  CHECK(oracles::max_rel_error(analytic, fd) < 1e-4);
}

TEST_CASE("head split clamps log std and masks its gradient") {
  Matrix head_out(1, 4);
  head_out << 0.3, -0.7, 5.0, -12.0;  // log_std raw outside both bounds
  HeadSplit s = split_actor_head(head_out);
  CHECK(s.head.log_std(0, 0) == kLogStdMax);
  CHECK(s.head.log_std(0, 1) == kLogStdMin);
  Matrix d_mean = Matrix::Ones(1, 2), d_log_std = Matrix::Ones(1, 2);
  Matrix g = merge_head_grad(s, d_mean, d_log_std);
  CHECK(g(0, 2) == 0.0);
  CHECK(g(0, 3) == 0.0);
  CHECK(g(0, 0) == 1.0);
}

TEST_CASE("entropy target closed form and linearity") {
  CHECK(entropy_target(1, 0.15) == doctest::Approx(-0.47814).epsilon(1e-4));
  CHECK(entropy_target(2, 0.15) == doctest::Approx(-0.95628).epsilon(1e-4));
  CHECK(entropy_target(20, 0.15) == doctest::Approx(-9.5628).epsilon(1e-4));
  for (int k : {1, 2, 5, 9}) {
    CHECK(entropy_target(2 * k, 0.3) ==
          doctest::Approx(2.0 * entropy_target(k, 0.3)).epsilon(1e-15));
  }
  CHECK_THROWS_AS(entropy_target(1, 0.0), ConfigError);
}

TEST_CASE("temperature equilibrium and adaptation directions") {
  const double h_target = entropy_target(1, 0.15);

  SUBCASE("zero gradient at equilibrium") {
    Temperature t;
    double before = t.log_alpha;
    Vector logp = Vector::Constant(8, -h_target);
    temperature_update(t, logp, h_target, 1e-3);
    CHECK(t.log_alpha == doctest::Approx(before).epsilon(1e-12));
  }

  SUBCASE("less stochastic than target raises alpha") {
    Temperature t;
    double before = t.alpha();
    Vector logp = Vector::Constant(8, -h_target + 1.0);
    temperature_update(t, logp, h_target, 1e-3);
    CHECK(t.alpha() > before);
  }

  SUBCASE("more stochastic than target lowers alpha") {
    Temperature t;
    double before = t.alpha();
    Vector logp = Vector::Constant(8, -h_target - 1.0);
    temperature_update(t, logp, h_target, 1e-3);
    CHECK(t.alpha() < before);
  }

  SUBCASE("iterates approach equilibrium monotonically from one side") {
    Temperature t;
    Vector logp = Vector::Constant(8, -h_target + 0.5);
    double prev = t.alpha();
    for (int i = 0; i < 50; ++i) {
      temperature_update(t, logp, h_target, 1e-2);
      CHECK(t.alpha() >= prev);
      prev = t.alpha();
    }
  }

  SUBCASE("alpha stays positive") {
    Temperature t;
    Vector logp = Vector::Constant(4, -h_target - 50.0);
    for (int i = 0; i < 200; ++i) temperature_update(t, logp, h_target, 0.1);
    CHECK(t.alpha() > 0.0);
  }
}
