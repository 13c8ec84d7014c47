#include <gtest/gtest.h>

#include <cmath>

#include "magsys/errors.hpp"
#include "magsys/surface.hpp"

using namespace magsys;

TEST(Geom, ConstantCurvatureModels) {
  const Surface sphere = Surface::round_sphere(1.0), torus = Surface::flat_torus(), hyp = Surface::hyperbolic_chart(-4.0);
  EXPECT_DOUBLE_EQ(gaussian_curvature(sphere, {0.3, -2.0, 0}), 1.0);
  EXPECT_DOUBLE_EQ(gaussian_curvature(Surface::round_sphere(2.0), {0.3, -2.0, 1}), 0.25);
  EXPECT_DOUBLE_EQ(gaussian_curvature(torus, {0.3, 0.1, 0}), 0.0);
  EXPECT_DOUBLE_EQ(gaussian_curvature(hyp, {0.3, 0.1, 0}), -4.0);
  EXPECT_EQ(sphere.euler_characteristic(), 2);
  EXPECT_EQ(torus.euler_characteristic(), 0);
  EXPECT_NEAR(Surface::flat_torus(2.0, 0.5).area(), 1.0, 0.0);
  // Conformal factor of the chart reproduces curvature 1 via -e^{-2u} Laplace(u).
  const Jet<2> u = sphere.log_factor<2>({0.4, 0.7, 0});
  EXPECT_NEAR(-std::exp(-2 * u.value()) * (u.dxx() + u.dyy()), 1.0, 1e-13);
  const Jet<2> uh = hyp.log_factor<2>({0.4, 0.2, 0});
  EXPECT_NEAR(-std::exp(-2 * uh.value()) * (uh.dxx() + uh.dyy()), -4.0, 1e-12);
}

TEST(Geom, ConformalTorusCurvatureMatchesFiniteDifferences) {
  const Surface s = Surface::conformal_torus(ScalarField::expression("0.1*cos(2*pi*x)"));
  auto u = [](double x) { return 0.1 * std::cos(2 * M_PI * x); };
  for (double x : {0.05, 0.31, 0.77}) {
    const double h = 1e-4;
    const double lap = (u(x + h) - 2 * u(x) + u(x - h)) / (h * h);
    EXPECT_NEAR(gaussian_curvature(s, {x, 0.4, 0}), -std::exp(-2 * u(x)) * lap, 1e-6);
  }
}

TEST(Geom, HyperbolicChartDomain) {
  const Surface h = Surface::hyperbolic_chart(-1.0);
  EXPECT_THROW(gaussian_curvature(h, {0.8, 0.7, 0}), DomainError);
  EXPECT_THROW(h.log_factor_value({1.0, 0.0, 0}), DomainError);
  EXPECT_THROW(integrate_density(h, ScalarField::constant(1.0)), UnsupportedOperation);
  EXPECT_THROW(h.area(), UnsupportedOperation);
  EXPECT_THROW(Surface::hyperbolic_chart(1.0), PreconditionError);
}

TEST(Geom, IntegrationAndGaussBonnet) {
  const Surface sphere = Surface::round_sphere(1.0);
  EXPECT_NEAR(integrate_density(sphere, ScalarField::constant(1.0)), 4 * M_PI, 1e-11);
  EXPECT_NEAR(integrate_density(sphere, ScalarField::expression("z*z")), 4 * M_PI / 3, 1e-12);
  EXPECT_NEAR(integrate_density(Surface::flat_torus(), ScalarField::expression("sin(2*pi*x)")), 0.0, 1e-12);

  const Surface ct = Surface::conformal_torus(ScalarField::expression("0.2*cos(2*pi*x)*sin(2*pi*y) + 0.1*sin(4*pi*x)"));
  const double gb = integrate_function(ct, [&](const ChartPoint& p) { return gaussian_curvature(ct, p); });
  EXPECT_NEAR(gb, 0.0, 1e-8);
  const double gbs = integrate_function(sphere, [&](const ChartPoint& p) { return gaussian_curvature(sphere, p); });
  EXPECT_NEAR(gbs, 2 * M_PI * sphere.euler_characteristic(), 1e-11);

  const ScalarField f = ScalarField::expression("1 + 0.3*x*y + z");
  EXPECT_NEAR(average(sphere, f.scaled(3.5)), 3.5 * average(sphere, f), 1e-12);
}

TEST(Geom, CkNorms) {
  const Surface t = Surface::flat_torus();
  const ScalarField h = ScalarField::expression("2 + sin(2*pi*x)");
  EXPECT_NEAR(ck_norm(t, h, 0), 3.0, 1e-12);
  EXPECT_NEAR(ck_norm(t, h, 1), 3.0 + 2 * M_PI, 1e-9);
  double prev = 0;
  for (int k = 0; k <= 3; ++k) {
    const double c = ck_norm(t, h, k, 64);
    EXPECT_GE(c, prev);
    prev = c;
  }
  EXPECT_NEAR(ck_norm(t, ScalarField::constant(2.5), 0), 2.5, 0.0);
  EXPECT_DOUBLE_EQ(bracket(t, ScalarField::constant(2.5), 0), 1.0);
  for (int k = 0; k <= 3; ++k)
    EXPECT_NEAR(bracket(t, h.scaled(3.7), k, 64), bracket(t, h, k, 64), 1e-12 * bracket(t, h, k, 64));
  EXPECT_THROW(bracket(t, ScalarField::expression("sin(2*pi*x)"), 1, 32), PositivityError);
  EXPECT_THROW(ck_norm(t, h, 4), PreconditionError);
}

TEST(Geom, SphereNormsUseCovariantDerivatives) {
  // The height function z on the unit sphere has |grad z| = sqrt(1 - z^2) and Hess z = -z g,
  // so sup|grad| = 1 and sup|Hess|_Frobenius = sqrt(2).
  const Surface s = Surface::round_sphere(1.0);
  const FieldNorms n = field_norms(s, ScalarField::expression("z"), 64);
  EXPECT_NEAR(n.sup[1], 1.0, 1e-3);
  EXPECT_NEAR(n.sup[2], std::sqrt(2.0), 2e-3);
  const ChartPoint p{0.3, 0.2, 0};
  const auto v = covariant_norms_at(s, ScalarField::expression("z"), p);
  const double z = s.unit_ambient(p)[2];
  EXPECT_NEAR(v[1], std::sqrt(1 - z * z), 1e-13);
  EXPECT_NEAR(v[2], std::sqrt(2.0) * std::abs(z), 1e-13);
}

TEST(Geom, ChartsAgreeOnOverlap) {
  const Surface s = Surface::round_sphere(1.0);
  const ScalarField f = ScalarField::expression("x + 2*y*z");
  for (double th : {0.3, 1.2, 2.5}) {
    const Vec3 a{std::sin(th) * std::cos(1.1), std::sin(th) * std::sin(1.1), std::cos(th)};
    const ChartPoint p0 = {a[0] / (1 - a[2]), a[1] / (1 - a[2]), 0};
    const ChartPoint p1 = {a[0] / (1 + a[2]), -a[1] / (1 + a[2]), 1};
    for (int i = 0; i < 3; ++i) {
      EXPECT_NEAR(s.unit_ambient(p0)[i], a[i], 1e-14);
      EXPECT_NEAR(s.unit_ambient(p1)[i], a[i], 1e-14);
    }
    EXPECT_NEAR(s.field_value(f, p0), s.field_value(f, p1), 1e-14);
    EXPECT_NEAR(s.field_jet<2>(f, p1).value(), s.field_value(f, p1), 1e-14);
  }
}
