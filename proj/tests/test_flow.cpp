#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "magsys/errors.hpp"
#include "magsys/flow.hpp"

using namespace magsys;

namespace {
IntegratorOptions tight() {
  IntegratorOptions o;
  o.rtol = 1e-12;
  o.atol = 1e-13;
  return o;
}
double state_gap(const Surface& s, const UnitTangentState& a, const UnitTangentState& b) {
  return phase_distance(s, a, b);
}
}  // namespace

TEST(Flow, FlatConstantFieldTurnsClockwise) {
  const Surface t = Surface::flat_torus();
  const auto d = magnetic_derivative(t, ScalarField::constant(3.0), {0.2, 0.4, 1.1, 0});
  EXPECT_DOUBLE_EQ(d[2], -3.0);
  EXPECT_NEAR(std::hypot(d[0], d[1]), 1.0, 1e-15);
}

TEST(Flow, ConstantRadiusCircles) {
  const Surface sphere = Surface::round_sphere(1.0);
  const UnitTangentState s0{0.3, -0.2, 0.9, 0};
  // Great circles close after 2 pi.
  auto g = integrate_dense(sphere, ScalarField::constant(0.0), s0, 2 * M_PI, tight());
  EXPECT_LT(state_gap(sphere, g.end(), s0), 1e-9);
  EXPECT_LT(g.max_speed_defect(), 1e-12);
  // f = 2 on the flat torus: circle of radius 1/2, period pi.
  const Surface torus = Surface::flat_torus();
  auto c = integrate_dense(torus, ScalarField::constant(2.0), {0.1, 0.2, 0.3, 0}, M_PI, tight());
  EXPECT_NEAR(c.end().x, 0.1, 1e-9);
  EXPECT_NEAR(c.end().y, 0.2, 1e-9);
  EXPECT_NEAR(wrap_angle(c.end().phi - 0.3), 0.0, 1e-9);
  // f = 1 on the unit sphere: circle of geodesic radius pi/4, length pi sqrt(2).
  const double T = M_PI * std::sqrt(2.0);
  auto d = integrate_dense(sphere, ScalarField::constant(1.0), s0, T, tight());
  EXPECT_LT(state_gap(sphere, d.end(), s0), 1e-9);
  const auto samples = d.sample(sphere, ScalarField::constant(1.0), 64);
  Vec3 c0{0, 0, 0};
  for (int i = 0; i < 64; ++i) c0 = c0 + sphere.unit_ambient(samples[static_cast<std::size_t>(i)].state.point());
  c0 = normalized(c0);
  for (const auto& smp : samples) EXPECT_NEAR(std::acos(dot(c0, sphere.unit_ambient(smp.state.point()))), M_PI / 4, 1e-9);
  // The chart orientation has normal -P, and the centre lies to the right of the velocity.
  const AmbientFrame fr = ambient_frame(sphere, s0);
  EXPECT_LT(dot(cross(-1.0 * fr.position, fr.velocity), c0), 0.0);
}

TEST(Flow, HyperbolicCircleRadius) {
  const Surface h = Surface::hyperbolic_chart(-1.0);
  const double T = 2 * M_PI / std::sqrt(3.0);  // 2 pi sinh(artanh(1/2))
  auto d = integrate_dense(h, ScalarField::constant(2.0), {0.1, 0.05, 0.4, 0}, T, tight());
  EXPECT_LT(state_gap(h, d.end(), d.start()), 1e-9);
  EXPECT_THROW(integrate_dense(h, ScalarField::constant(0.0), {1.2, 0.0, 0.0, 0}, 1.0), DomainError);
}

TEST(Flow, TimeReversal) {
  const Surface sphere = Surface::round_sphere(1.0);
  const ScalarField f = ScalarField::expression("1 + 0.4*z + 0.2*x*y");
  const UnitTangentState s0{0.5, 0.2, 2.0, 0};
  const auto fwd = integrate_dense(sphere, f, s0, 7.0, tight());
  UnitTangentState back = fwd.end();
  back.phi += M_PI;
  const auto bwd = integrate_dense(sphere, f.scaled(-1.0), back, 7.0, tight());
  UnitTangentState expect = s0;
  expect.phi += M_PI;
  EXPECT_LT(state_gap(sphere, bwd.end(), expect), 1e-8);
}

TEST(Flow, JacobianMatchesFiniteDifferences) {
  const Surface ct = Surface::conformal_torus(ScalarField::expression("0.2*cos(2*pi*x)*sin(2*pi*y)"));
  const ScalarField f = ScalarField::expression("2 + sin(2*pi*x) + 0.3*cos(2*pi*y)");
  const UnitTangentState s{0.3, 0.6, 1.7, 0};
  const Eigen::Matrix3d a = magnetic_jacobian(ct, f, s);
  const double h = 1e-6;
  for (int j = 0; j < 3; ++j) {
    UnitTangentState p = s, m = s;
    (j == 0 ? p.x : j == 1 ? p.y : p.phi) += h;
    (j == 0 ? m.x : j == 1 ? m.y : m.phi) -= h;
    const auto dp = magnetic_derivative(ct, f, p), dm = magnetic_derivative(ct, f, m);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(a(i, j), (dp[static_cast<std::size_t>(i)] - dm[static_cast<std::size_t>(i)]) / (2 * h), 1e-7);
  }
}

TEST(Flow, VariationalFlow) {
  const Surface torus = Surface::flat_torus();
  const auto j0 = integrate_with_variation(torus, ScalarField::constant(1.0), {0, 0, 0, 0}, 0.0);
  EXPECT_TRUE(j0.differential.isApprox(Eigen::Matrix3d::Identity(), 0.0));
  // Flat geodesics: unipotent shear.
  const auto j = integrate_with_variation(torus, ScalarField::constant(0.0), {0.1, 0.2, 0.7, 0}, 2.5, tight());
  const Eigen::Matrix3d n = j.differential - Eigen::Matrix3d::Identity();
  EXPECT_LT((n * n).norm(), 1e-10);
  EXPECT_NEAR(n(0, 2), -2.5 * std::sin(0.7), 1e-10);
  EXPECT_NEAR(n(1, 2), 2.5 * std::cos(0.7), 1e-10);

  // Across chart switches: compare with central differences of the endpoint.
  const Surface sphere = Surface::round_sphere(1.0);
  const ScalarField f = ScalarField::expression("1 + 0.3*z");
  const UnitTangentState s0{0.8, -0.3, 0.2, 0};
  const double T = 4.0;
  const auto fj = integrate_with_variation(sphere, f, s0, T, tight());
  const double h = 1e-6;
  for (int c = 0; c < 3; ++c) {
    UnitTangentState p = s0, m = s0;
    (c == 0 ? p.x : c == 1 ? p.y : p.phi) += h;
    (c == 0 ? m.x : c == 1 ? m.y : m.phi) -= h;
    const auto ep = to_chart(sphere, integrate_dense(sphere, f, p, T, tight()).end(), fj.state.chart);
    const auto em = to_chart(sphere, integrate_dense(sphere, f, m, T, tight()).end(), fj.state.chart);
    EXPECT_NEAR(fj.differential(0, c), (ep.x - em.x) / (2 * h), 1e-5);
    EXPECT_NEAR(fj.differential(1, c), (ep.y - em.y) / (2 * h), 1e-5);
    EXPECT_NEAR(fj.differential(2, c), wrap_angle(ep.phi - em.phi) / (2 * h), 1e-5);
  }
}

TEST(Flow, ChartSwitchConsistency) {
  const Surface sphere = Surface::round_sphere(1.0);
  const ScalarField f = ScalarField::expression("1 + 0.5*x - 0.2*z");
  const UnitTangentState a{0.9, 0.4, 1.0, 0};
  const UnitTangentState b = switch_chart(a);
  EXPECT_LT(state_gap(sphere, a, b), 1e-14);
  const auto ea = integrate_dense(sphere, f, a, 9.0, tight()).end();
  const auto eb = integrate_dense(sphere, f, b, 9.0, tight()).end();
  EXPECT_LT(state_gap(sphere, ea, eb), 1e-8);
  const Eigen::Matrix3d jj = chart_switch_jacobian(b) * chart_switch_jacobian(a);
  EXPECT_TRUE(jj.isApprox(Eigen::Matrix3d::Identity(), 1e-12));
}

TEST(Flow, FirstOrderGronwallBound) {
  const Surface sphere = Surface::round_sphere(1.0);
  const ScalarField f = ScalarField::expression("2 + 0.5*z");
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 10; ++i) {
    const UnitTangentState s0{u(rng), u(rng), M_PI * u(rng), 0};
    const auto traj = integrate_dense(sphere, f, s0, 1.0, tight());
    double amax = 0.0;
    for (int k = 0; k <= 200; ++k)
      amax = std::max(amax, magnetic_jacobian(sphere, f, traj.state_at(k / 200.0)).operatorNorm());
    const auto jet = integrate_with_variation(sphere, f, s0, 1.0, tight());
    // Norm in the chart where the linearisation was integrated.
    if (jet.state.chart == s0.chart) EXPECT_LE(jet.differential.operatorNorm(), std::exp(amax));
  }
}

TEST(Flow, InvalidInputs) {
  const Surface t = Surface::flat_torus();
  EXPECT_THROW(integrate(t, ScalarField::constant(1.0), {0, 0, 0, 0}, 0.0), PreconditionError);
  IntegratorOptions o;
  o.max_steps = 3;
  EXPECT_THROW(integrate(t, ScalarField::constant(1.0), {0, 0, 0, 0}, 100.0, o), IntegrationError);
}
