#include <doctest.h>

#include "sddekit/problem.hpp"

#include <cmath>
#include <random>

using namespace sddekit;

namespace {
Vector scalar(double v) { return Vector::Constant(1, v); }
}  // namespace

TEST_CASE("make_linear builds the example problems") {
  const SddeProblem p = make_linear(example1_params(), 0.5, 1.0);
  CHECK(p.dim_state == 1);
  CHECK(p.dim_noise == 1);
  CHECK(p.horizon == 1.0);
  CHECK(p.delay(0.3) == 1.0);
  CHECK(p.delay_lower_bound == 1.0);
  CHECK(p.initial_at(-0.7)[0] == 0.5);
  // f = -2x + y, g = 0.5x + 0.5y
  CHECK(p.eval_drift(scalar(1.0), scalar(2.0))[0] == doctest::Approx(0.0));
  CHECK(p.eval_diffusion(scalar(1.0), scalar(2.0))(0, 0) == doctest::Approx(1.5));
  REQUIRE(p.gammas);
  CHECK(*p.gammas == OneSidedLipschitzData{-2.0, 1.0, 0.5, 0.5});
  REQUIRE(p.linear);
  CHECK(p.linear->lag == 1.0);
  CHECK_NOTHROW(p.validate());

  const SddeProblem ex3 = make_preset("example3");
  CHECK(ex3.horizon == 8.0);
  CHECK(ex3.linear->a == -20.0);
  CHECK(ex3.linear->b == 12.0);
  CHECK(ex3.linear->c == 2.0);
  CHECK(ex3.linear->d_coef == 1.0);
}

TEST_CASE("zero-coefficient linear problem has vanishing coefficients") {
  const SddeProblem p = make_linear({0, 0, 0, 0, 1.0}, 0.5, 1.0);
  CHECK(p.eval_drift(scalar(3.0), scalar(-1.0))[0] == 0.0);
  CHECK(p.eval_diffusion(scalar(3.0), scalar(-1.0))(0, 0) == 0.0);
}

TEST_CASE("make_linear rejects non-positive lag or horizon") {
  CHECK_THROWS_AS(make_linear({-1, 0, 0, 0, 0.0}, 0.5, 1.0), ConfigError);
  CHECK_THROWS_AS(make_linear({-1, 0, 0, 0, -1.0}, 0.5, 1.0), ConfigError);
  CHECK_THROWS_AS(make_linear({-1, 0, 0, 0, 1.0}, 0.5, 0.0), ConfigError);
}

TEST_CASE("gamma_map_linear") {
  CHECK(gamma_map_linear({-6, 3, 1, 1, 1}) == OneSidedLipschitzData{-6, 3, 2, 2});
  CHECK(gamma_map_linear({0, 0, 0, 0, 1}) == OneSidedLipschitzData{0, 0, 0, 0});
  CHECK(gamma_map_linear({-2, 1, 0.5, 0.5, 1}) == OneSidedLipschitzData{-2, 1, 0.5, 0.5});
  CHECK(gamma_map_linear({1, -4, -2, 3, 1}) == OneSidedLipschitzData{1, 4, 10, 15});
}

TEST_CASE("gamma_map_linear yields non-negative gamma2..gamma4 for random coefficients") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int i = 0; i < 10000; ++i) {
    const OneSidedLipschitzData g = gamma_map_linear({u(rng), u(rng), u(rng), u(rng), 1.0});
    REQUIRE(g.gamma2 >= 0.0);
    REQUIRE(g.gamma3 >= 0.0);
    REQUIRE(g.gamma4 >= 0.0);
  }
}

TEST_CASE("nonlinear example") {
  const SddeProblem p = make_nonlinear_example(5.0);
  CHECK(p.eval_drift(scalar(1.0), scalar(0.0))[0] == -7.0);
  CHECK(p.eval_diffusion(scalar(1.0), scalar(0.5))(0, 0) == 1.5);
  CHECK(p.delay(1.0) == 0.5);
  CHECK(p.delay(0.0) == 1.0);
  CHECK(p.initial_at(-1.0)[0] == 1.0);
  REQUIRE(p.gammas);
  CHECK(*p.gammas == OneSidedLipschitzData{-4, 1, 2, 2});
  CHECK_NOTHROW(p.validate());
}

TEST_CASE("pantograph delay") {
  const SddeProblem p = make_preset("pantograph");
  CHECK(2.0 - p.delay(2.0) == doctest::Approx(1.0));
  const SddeProblem q25 = make_linear_pantograph(0.25, example1_params(), 0.5, 4.0);
  CHECK(q25.delay(4.0) == 3.0);
  CHECK(4.0 - q25.delay(4.0) == 1.0);
  CHECK(q25.delay_lower_bound == 0.0);
  CHECK_THROWS_AS(make_linear_pantograph(1.0, example1_params(), 0.5, 1.0), ConfigError);
  CHECK_THROWS_AS(make_linear_pantograph(0.0, example1_params(), 0.5, 1.0), ConfigError);
  CHECK_THROWS_AS(make_linear_pantograph(1.5, example1_params(), 0.5, 1.0), ConfigError);
}

TEST_CASE("pantograph delayed argument is q t >= 0 on a sampled grid") {
  for (double q : {0.1, 0.5, 0.9}) {
    const SddeProblem p = make_linear_pantograph(q, example1_params(), 0.5, 10.0);
    for (int k = 0; k <= 1000; ++k) {
      const double t = 0.01 * k;
      REQUIRE(t - p.delay(t) == doctest::Approx(q * t).epsilon(1e-14));
      REQUIRE(t - p.delay(t) >= 0.0);
    }
    CHECK_NOTHROW(p.validate());
  }
}

TEST_CASE("every preset evaluates finitely at the initial point") {
  for (const std::string& name : preset_names()) {
    CAPTURE(name);
    const SddeProblem p = make_preset(name);
    CHECK(p.name == name);
    const Vector x0 = p.initial_at(0.0);
    CHECK(p.eval_drift(x0, x0).allFinite());
    CHECK(p.eval_diffusion(x0, x0).allFinite());
    CHECK_NOTHROW(p.validate());
  }
  CHECK_THROWS_AS(make_preset("example4"), ConfigError);
}

TEST_CASE("validate catches delay invariant violations") {
  SddeProblem p = make_linear(example1_params(), 0.5, 2.0);
  p.delay = [](double) { return -0.1; };
  CHECK_THROWS_AS(p.validate(), ConfigError);

  SddeProblem deep = make_linear(example1_params(), 0.5, 2.0);
  deep.delay = [](double) { return 1.5; };  // reaches t - tau = -1.5 < -tau_bar
  CHECK_THROWS_AS(deep.validate(), ConfigError);

  SddeProblem nan_drift = make_linear(example1_params(), 0.5, 2.0);
  nan_drift.drift = [](VecIn, VecIn, VecOut out) { out[0] = std::nan(""); };
  CHECK_THROWS_AS(nan_drift.validate(), ConfigError);

  OneSidedLipschitzData bad{0, -1, 0, 0};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("with_horizon copies the problem") {
  const SddeProblem p = make_preset("example2");
  const SddeProblem q = p.with_horizon(3.0);
  CHECK(q.horizon == 3.0);
  CHECK(p.horizon == 8.0);
  CHECK(q.eval_drift(scalar(1.0), scalar(1.0))[0] == -3.0);
  CHECK_THROWS_AS(p.with_horizon(-1.0), ConfigError);
}
