#include <cmath>

#include "doctest.h"
#include "flashsac/distributional.hpp"
#include "gradient_suites.hpp"
#include "oracles/brute_projection.hpp"
#include "oracles/fd.hpp"

using namespace flashsac;

TEST_CASE("make_grid layouts") {
  AtomGrid g = make_grid(-5, 5, 101);
  CHECK(g.delta == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(g.atoms[50] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(g.atoms[0] == -5.0);
  CHECK(g.atoms[100] == 5.0);

  AtomGrid two = make_grid(0, 1, 2);
  CHECK(two.atoms[0] == 0.0);
  CHECK(two.atoms[1] == 1.0);

  AtomGrid five = make_grid(-1, 1, 5);
  for (int i = 0; i < 5; ++i)
    CHECK(five.atoms[i] == doctest::Approx(-1.0 + 0.5 * i));
}

TEST_CASE("make_grid validates inputs") {
  CHECK_THROWS_AS(make_grid(1, 1, 5), ConfigError);
  CHECK_THROWS_AS(make_grid(2, 1, 5), ConfigError);
  CHECK_THROWS_AS(make_grid(0, 1, 1), ConfigError);
}

TEST_CASE("projection splits a midpoint value between neighbors") {
  AtomGrid g = make_grid(-5, 5, 101);
  Matrix values(1, 1), masses(1, 1);
  values << 0.05;
  masses << 1.0;
  Matrix probs = project_target(g, values, masses);
  CHECK(probs(0, 50) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(probs(0, 51) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(probs.row(0).sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("projection puts lattice values on a single atom") {
  AtomGrid g = make_grid(-1, 1, 5);
  Matrix values(1, 1), masses(1, 1);
  values << 0.5;
  masses << 1.0;
  Matrix probs = project_target(g, values, masses);
  CHECK(probs(0, 3) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("projection clips out-of-support mass to the boundary") {
  AtomGrid g = make_grid(-1, 1, 5);
  Matrix values(1, 2), masses(1, 2);
  values << 7.0, -3.0;
  masses << 0.25, 0.75;
  Matrix probs = project_target(g, values, masses);
  CHECK(probs(0, 4) == doctest::Approx(0.25));
  CHECK(probs(0, 0) == doctest::Approx(0.75));
}

TEST_CASE("projection agrees with the brute-force oracle") {
  Rng rng(77);
  AtomGrid g = make_grid(-1, 1, 5);
  for (int trial = 0; trial < 200; ++trial) {
    const int cols = 5;
    Matrix values(3, cols), masses(3, cols);
    for (int b = 0; b < 3; ++b) {
      Vector w = suites::random_vector(cols, rng).array().abs() + 0.05;
      masses.row(b) = (w / w.sum()).transpose();
      for (int j = 0; j < cols; ++j) values(b, j) = 2.5 * rng.normal();
    }
    Matrix got = project_target(g, values, masses);
    Matrix want = oracles::brute_projection(g, values, masses);
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
    // mass and mean conservation
    for (int b = 0; b < 3; ++b) {
      CHECK(got.row(b).sum() == doctest::Approx(1.0).epsilon(1e-9));
      double want_mean = 0.0;
      for (int j = 0; j < cols; ++j)
        want_mean += masses(b, j) * std::clamp(values(b, j), g.g_min, g.g_max);
      CHECK((got.row(b) * g.atoms)(0, 0) ==
            doctest::Approx(want_mean).epsilon(1e-9));
    }
  }
}

TEST_CASE("projection shift by one atom spacing moves mass one index") {
  AtomGrid g = make_grid(-5, 5, 101);
  Rng rng(5);
  Matrix values(1, g.n_atoms), masses(1, g.n_atoms);
  Vector w = suites::random_vector(g.n_atoms, rng).array().abs() + 0.01;
  masses.row(0) = (w / w.sum()).transpose();
  for (int j = 0; j < g.n_atoms; ++j)
    values(0, j) = rng.uniform(-4.0, 3.8);  // keep interior after the shift
  Matrix base = project_target(g, values, masses);
  Matrix shifted = project_target(
      g, (values.array() + g.delta).matrix(), masses);
  for (int i = 0; i + 1 < g.n_atoms; ++i)
    CHECK(shifted(0, i + 1) == doctest::Approx(base(0, i)).epsilon(1e-9));
}

TEST_CASE("categorical mean") {
  AtomGrid g = make_grid(-5, 5, 101);
  Matrix onehot = Matrix::Zero(1, 101);
  onehot(0, 50) = 1.0;
  CHECK(categorical_mean(g, onehot)[0] == doctest::Approx(0.0));

  Matrix uniform = Matrix::Constant(1, 101, 1.0 / 101.0);
  CHECK(categorical_mean(g, uniform)[0] == doctest::Approx(0.0).epsilon(1e-12));

  AtomGrid two = make_grid(0, 1, 2);
  Matrix p(1, 2);
  p << 0.25, 0.75;
  CHECK(categorical_mean(two, p)[0] == doctest::Approx(0.75));
}

TEST_CASE("cross entropy closed forms") {
  const int n = 101;
  Matrix logits = Matrix::Zero(1, n);
  Matrix target = Matrix::Zero(1, n);
  target(0, 13) = 1.0;
  CHECK(cross_entropy(logits, target) ==
        doctest::Approx(std::log(101.0)).epsilon(1e-12));
  CHECK(cross_entropy(logits, target) == doctest::Approx(4.61512).epsilon(1e-5));

  // target equal to softmax(logits) attains the entropy lower bound
  Rng rng(3);
  Matrix l2 = suites::random_matrix(1, 7, rng);
  Matrix p2 = softmax_rows(l2);
  double h = -(p2.array() * p2.array().log()).sum();
  CHECK(cross_entropy(l2, p2) == doctest::Approx(h).epsilon(1e-12));
}

TEST_CASE("cross entropy gradient equals softmax minus target") {
  Rng rng(4);
  const int B = 3, n = 6;
  Matrix logits = suites::random_matrix(B, n, rng);
  Matrix target(B, n);
  for (int b = 0; b < B; ++b) {
    Vector w = suites::random_vector(n, rng).array().abs() + 0.1;
    target.row(b) = (w / w.sum()).transpose();
  }
  Matrix g = cross_entropy_grad(logits, target);
  Matrix closed = (softmax_rows(logits) - target) / double(B);
  CHECK((g - closed).cwiseAbs().maxCoeff() < 1e-10);

  // against finite differences across all logits
  Vector packed(B * n);
  Eigen::Index at = 0;
  for (int b = 0; b < B; ++b)
    for (int j = 0; j < n; ++j) packed[at++] = logits(b, j);
  auto loss = [&](const Vector& v) {
    Matrix l = logits;
    Eigen::Index k = 0;
    for (int b = 0; b < B; ++b)
      for (int j = 0; j < n; ++j) l(b, j) = v[k++];
    return cross_entropy(l, target);
  };
  Vector fd = oracles::fd_gradient(loss, packed, {1e-5});
  Vector analytic(B * n);
  at = 0;
  for (int b = 0; b < B; ++b)
    for (int j = 0; j < n; ++j) analytic[at++] = g(b, j);
  CHECK(oracles::max_rel_error(analytic, fd) < 1e-6);
}
