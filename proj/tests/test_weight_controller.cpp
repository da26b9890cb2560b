#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "mokd/weight_controller.hpp"

using namespace mokd;

namespace {

double grid_argmin_pi1(const GramMatrix2& g, std::size_t points) {
  double best = std::numeric_limits<double>::infinity();
  double arg = 0.0;
  for (std::size_t i = 0; i <= points; ++i) {
    const double p1 = static_cast<double>(i) / static_cast<double>(points);
    const double p2 = 1.0 - p1;
    const double f = 0.5 * (p1 * p1 * g.g11 + p2 * p2 * g.g22 + 2.0 * p1 * p2 * g.g12);
    if (f < best) {
      best = f;
      arg = p1;
    }
  }
  return arg;
}

}  // namespace

TEST_CASE("log_gradient examples") {
  Vector g = log_gradient(Vector{4, 0}, 2.0);
  CHECK(g[0] == 2.0);
  CHECK(g[1] == 0.0);
  g = log_gradient(Vector{1, 1}, 1.0);
  CHECK(g[0] == 1.0);
  g = log_gradient(Vector{0, 0}, 3.5);
  CHECK(g[0] == 0.0);
  CHECK_THROWS_AS((log_gradient(Vector{1, 0}, 0.0)), DomainError);
  CHECK_THROWS_AS((log_gradient(Vector{1, 0}, -1.0)), DomainError);
}

TEST_CASE("rates examples") {
  ImprovementRates r = rates(LossVector({2.0}), LossVector({1.0}));
  CHECK(r.values[0] == doctest::Approx(0.5).epsilon(1e-15));
  r = rates(LossVector({1.5, 0.7}), LossVector({1.5, 0.7}));
  CHECK(r.values[0] == 0.0);
  CHECK(r.values[1] == 0.0);
  r = rates(LossVector({1.0}), LossVector({1.5}));
  CHECK(r.values[0] == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK_THROWS_AS((rates(LossVector({1.0, 2.0}), LossVector({1.0}))), DimensionError);
}

TEST_CASE("step_exact examples") {
  ControllerState st(2);
  ExactStep s = step_exact(st, TaskJacobian({Vector{1, 0}, Vector{0, 1}}), LossVector({1, 1}));
  CHECK(s.pi[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s.update[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s.update[1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(st.step_count == 1);

  // losses (2,1) turn (2,0),(0,1) into unit log-gradients; grid oracle on
  // the resulting Gram confirms the symmetric optimum.
  s = step_exact(st, TaskJacobian({Vector{2, 0}, Vector{0, 1}}), LossVector({2, 1}));
  CHECK(s.pi[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(s.update[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(s.update[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::abs(grid_argmin_pi1(GramMatrix2{1, 1, 0}, 1000000) - 0.5) <= 2e-6);

  // Parallel unequal-norm gradients clamp to the vertex.
  s = step_exact(st, TaskJacobian({Vector{2, 0}, Vector{1, 0}}), LossVector({1, 1}));
  CHECK(s.pi[0] == 0.0);
  CHECK(s.pi[1] == 1.0);
  CHECK(s.update[0] == 1.0);
  CHECK(s.update[1] == 0.0);
  CHECK(std::abs(grid_argmin_pi1(GramMatrix2{4, 1, 2}, 1000000) - 0.0) <= 2e-6);
}

TEST_CASE("step_exact degenerate rule: identical log-gradients") {
  ControllerState st(2);
  const ExactStep s =
      step_exact(st, TaskJacobian({Vector{2, 4}, Vector{1, 2}}), LossVector({2, 1}));
  CHECK(s.pi[0] == 0.5);
  CHECK(s.pi[1] == 0.5);
  CHECK(s.update[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(s.update[1] == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("step_exact k=3 goes through the simplex QP") {
  ControllerState st(3);
  const ExactStep s = step_exact(
      st, TaskJacobian({Vector{1, 0, 0}, Vector{0, 1, 0}, Vector{0, 0, 1}}), LossVector({1, 1, 1}));
  for (int i = 0; i < 3; ++i) CHECK(s.pi[i] == doctest::Approx(1.0 / 3).epsilon(1e-9));
}

TEST_CASE("step_amortized examples") {
  ControllerConfig cfg;
  cfg.mode = ControllerMode::amortized;

  ControllerState st(2);
  cfg.eta_pi = 0.025;
  SimplexWeights pi = step_amortized(st, Vector{0, 0}, cfg);
  CHECK(pi[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(pi[1] == doctest::Approx(0.5).epsilon(1e-15));

  // Frozen by an independent high-precision evaluation of
  // softmax(0.5 - 1*0.2*0.4, 0.5) = softmax(0.42, 0.5).
  ControllerState st2(2);
  cfg.eta_pi = 1.0;
  pi = step_amortized(st2, Vector{0.4, 0.0}, cfg);
  CHECK(pi[0] == doctest::Approx(0.48001065984441821).epsilon(1e-13));
  CHECK(pi[1] == doctest::Approx(0.51998934015558179).epsilon(1e-13));
  // The 4-decimal rendering of the same values.
  CHECK(std::abs(pi[0] - 0.4800) < 5e-5);
  CHECK(std::abs(pi[1] - 0.5200) < 5e-5);

  // Constant signals shift both raw entries equally; softmax ignores that.
  Rng rng(400);
  for (int i = 0; i < 100; ++i) {
    ControllerState sta(2);
    const double c = rng.uniform(-3.0, 3.0);
    cfg.eta_pi = 0.5;
    pi = step_amortized(sta, Vector{c, c}, cfg);
    CHECK(pi[0] == doctest::Approx(0.5).epsilon(1e-12));
  }
}

TEST_CASE("step_amortized downweights the faster-improving task") {
  // From pi1 >= 1/2 the property is strict; starting below 1/2 the softmax
  // renormalization contracts toward the center and can mask one small
  // update, so random instances draw pi1 from [1/2, 1).
  ControllerConfig cfg;
  cfg.mode = ControllerMode::amortized;
  cfg.eta_pi = 0.025;
  Rng rng(401);
  for (int i = 0; i < 500; ++i) {
    const double pi1 = rng.uniform(0.5, 0.999);
    ControllerState st(2);
    st.pi = SimplexWeights({pi1, 1.0 - pi1});
    const double u2 = rng.uniform(0.01, 1.0);
    const double u1 = u2 + rng.uniform(0.01, 1.0);
    const SimplexWeights next = step_amortized(st, Vector{u1, u2}, cfg);
    CHECK(next[0] < pi1);
  }
}

TEST_CASE("step_amortized moves against the signal relative to the zero-signal point") {
  // For any starting pi, a positive faster-improving first task yields a
  // strictly smaller pi1 than renormalizing with no signal.
  ControllerConfig cfg;
  cfg.mode = ControllerMode::amortized;
  cfg.eta_pi = 0.1;
  Rng rng(402);
  for (int i = 0; i < 500; ++i) {
    const double pi1 = rng.uniform(0.001, 0.999);
    ControllerState a(2), b(2);
    a.pi = SimplexWeights({pi1, 1.0 - pi1});
    b.pi = SimplexWeights({pi1, 1.0 - pi1});
    const double u2 = rng.uniform(0.01, 1.0);
    const double u1 = u2 + rng.uniform(0.01, 1.0);
    const SimplexWeights with_signal = step_amortized(a, Vector{u1, u2}, cfg);
    const SimplexWeights no_signal = step_amortized(b, Vector{0.0, 0.0}, cfg);
    CHECK(with_signal[0] < no_signal[0]);
  }
}

TEST_CASE("step_fixed examples") {
  ControllerConfig cfg;
  cfg.mode = ControllerMode::fixed_weights;

  ControllerState st(2);
  cfg.fixed_alpha = BaselineWeights{0.5, 0.5};
  Vector g = step_fixed(st, TaskJacobian({Vector{1, 0}, Vector{0, 1}}), cfg);
  CHECK(g[0] == 0.5);
  CHECK(g[1] == 0.5);
  CHECK(st.pi[0] == doctest::Approx(0.5).epsilon(1e-15));

  cfg.fixed_alpha = BaselineWeights{1.0, 1.0};
  g = step_fixed(st, TaskJacobian({Vector{1, 0}, Vector{1, 0}}), cfg);
  CHECK(g[0] == 2.0);
  CHECK(g[1] == 0.0);

  cfg.fixed_alpha = BaselineWeights{2.0, 0.5};
  g = step_fixed(st, TaskJacobian({Vector{1, 0}, Vector{0, 2}}), cfg);
  CHECK(g[0] == 2.0);
  CHECK(g[1] == 1.0);
  CHECK(st.pi[0] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(st.pi[1] == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("pi stays on the simplex in every mode") {
  Rng rng(403);
  ControllerConfig amo;
  amo.mode = ControllerMode::amortized;
  amo.eta_pi = 0.25;
  for (int i = 0; i < 300; ++i) {
    ControllerState st(2);
    for (int t = 0; t < 5; ++t) {
      Vector g1 = Vector::zeros(4), g2 = Vector::zeros(4);
      for (int j = 0; j < 4; ++j) {
        g1[j] = rng.gaussian();
        g2[j] = rng.gaussian();
      }
      step_exact(st, TaskJacobian({g1, g2}),
                 LossVector({rng.uniform(0.1, 5.0), rng.uniform(0.1, 5.0)}));
      double sum = 0.0;
      for (std::size_t u = 0; u < 2; ++u) {
        CHECK(st.pi[u] >= 0.0);
        sum += st.pi[u];
      }
      CHECK(std::abs(sum - 1.0) <= 1e-12);
      step_amortized(st, Vector{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)}, amo);
      sum = st.pi[0] + st.pi[1];
      CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("exact update aligns with both log-gradients") {
  Rng rng(404);
  for (int i = 0; i < 500; ++i) {
    const std::size_t dim = 2 + rng.next_u64() % 20;
    Vector g1 = Vector::zeros(dim), g2 = Vector::zeros(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      g1[j] = rng.gaussian();
      g2[j] = rng.gaussian();
    }
    const LossVector losses({rng.uniform(0.2, 4.0), rng.uniform(0.2, 4.0)});
    ControllerState st(2);
    const ExactStep s = step_exact(st, TaskJacobian({g1, g2}), losses);
    const Vector lg1 = log_gradient(g1, losses[0]);
    const Vector lg2 = log_gradient(g2, losses[1]);
    const double scale = std::max(dot(lg1, lg1), dot(lg2, lg2));
    CHECK(dot(s.update, lg1) >= -1e-12 * scale);
    CHECK(dot(s.update, lg2) >= -1e-12 * scale);
  }
}

TEST_CASE("controller config validation") {
  ControllerConfig cfg;
  cfg.eta_pi = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.eta_pi = 0.025;
  cfg.gamma = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.gamma = 1.0;
  cfg.mode = ControllerMode::fixed_weights;
  cfg.fixed_alpha = BaselineWeights{0.0, 1.0};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("loss vector requires strictly positive entries") {
  CHECK_THROWS_AS((LossVector({1.0, 0.0})), DomainError);
  CHECK_THROWS_AS((LossVector({-1.0})), DomainError);
  CHECK_THROWS_AS((LossVector(std::vector<double>{})), DimensionError);
}
