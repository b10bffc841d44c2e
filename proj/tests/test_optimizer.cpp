#include <doctest.h>

#include <cmath>
#include <limits>

#include "optimizer.hpp"

using namespace fairsync;

TEST_CASE("first adam step has magnitude eta with bias correction") {
  AdamState state(1, 0.01);
  const DualVector mu{0.0};
  const auto out = adam_step(state, mu, {1.0});
  // m_hat = v_hat = 1 on the first step, so the update is eta/(1 + eps).
  CHECK(out[0] == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(state.step_count == 1);
}

TEST_CASE("zero gradient leaves mu unchanged but decays moments") {
  AdamState state(2, 0.05);
  state.first_moment = {0.4, -0.2};
  state.second_moment = {0.3, 0.1};
  const auto out = adam_step(state, {1.0, -1.0}, {0.0, 0.0});
  CHECK(out[0] != 1.0);  // momentum still moves mu
  CHECK(state.first_moment[0] == doctest::Approx(0.36));
  CHECK(state.second_moment[0] == doctest::Approx(0.2997));

  AdamState fresh(2, 0.05);
  const auto still = adam_step(fresh, {1.0, -1.0}, {0.0, 0.0});
  CHECK(still[0] == 1.0);
  CHECK(still[1] == -1.0);
}

TEST_CASE("equal gradients get equal updates") {
  AdamState state(2, 0.01);
  const auto out = adam_step(state, {0.0, 0.0}, {0.7, 0.7});
  CHECK(out[0] == out[1]);
}

TEST_CASE("first step is bounded by eta and opposes the gradient sign") {
  Rng rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    AdamState state(3, 0.02);
    std::vector<double> grad(3);
    for (auto& g : grad) g = rng.uniform(-5, 5);
    const auto out = adam_step(state, {0, 0, 0}, grad);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(std::abs(out[i]) <= 0.02 * (1.0 + 1e-6));
      if (grad[i] != 0.0) CHECK(out[i] * grad[i] <= 0.0);
    }
  }
}

TEST_CASE("permuting coordinates permutes the update") {
  AdamState a(3, 0.01), b(3, 0.01);
  const DualVector mu{0.3, -0.2, 0.9};
  const std::vector<double> grad{2.0, -1.0, 0.5};
  const auto out_a = adam_step(a, mu, grad);

  const DualVector mu_p{0.9, 0.3, -0.2};
  const std::vector<double> grad_p{0.5, 2.0, -1.0};
  const auto out_b = adam_step(b, mu_p, grad_p);
  CHECK(out_b[0] == out_a[2]);
  CHECK(out_b[1] == out_a[0]);
  CHECK(out_b[2] == out_a[1]);
}

TEST_CASE("non-finite gradients are contract violations") {
  AdamState state(1, 0.01);
  CHECK_THROWS_AS(adam_step(state, {0.0}, {std::numeric_limits<double>::quiet_NaN()}),
                  std::invalid_argument);
  CHECK_THROWS_AS(sgd_step(0.01, {0.0}, {std::numeric_limits<double>::infinity()}),
                  std::invalid_argument);
}

TEST_CASE("sgd takes a plain descent step") {
  const auto out = sgd_step(0.1, {1.0, -1.0}, {2.0, -4.0});
  CHECK(out[0] == doctest::Approx(0.8));
  CHECK(out[1] == doctest::Approx(-0.6));
}

TEST_CASE("optimizer wrapper dispatches by kind") {
  DualOptimizer adam(OptimizerKind::Adam, 1, 0.01);
  CHECK(adam.step({0.0}, {1.0})[0] == doctest::Approx(-0.01).epsilon(1e-6));
  DualOptimizer sgd(OptimizerKind::Sgd, 1, 0.01);
  CHECK(sgd.step({0.0}, {1.0})[0] == doctest::Approx(-0.01));
}
