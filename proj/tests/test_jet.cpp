#include <gtest/gtest.h>

#include <cmath>

#include "magsys/jet.hpp"

using magsys::Jet;

TEST(Jet, ProductRuleAndQuotient) {
  const auto x = Jet<3>::variable_x(0.7), y = Jet<3>::variable_y(-0.3);
  const Jet<3> f = x * x * y / (1.0 + x * x + y * y);
  // Central differences of the value as an independent check.
  auto fv = [](double a, double b) { return a * a * b / (1.0 + a * a + b * b); };
  const double h = 1e-5;
  EXPECT_NEAR(f.dx(), (fv(0.7 + h, -0.3) - fv(0.7 - h, -0.3)) / (2 * h), 1e-9);
  EXPECT_NEAR(f.dy(), (fv(0.7, -0.3 + h) - fv(0.7, -0.3 - h)) / (2 * h), 1e-9);
  const double hh = 1e-4;
  EXPECT_NEAR(f.dxy(),
              (fv(0.7 + hh, -0.3 + hh) - fv(0.7 + hh, -0.3 - hh) - fv(0.7 - hh, -0.3 + hh) +
               fv(0.7 - hh, -0.3 - hh)) / (4 * hh * hh),
              1e-6);
}

TEST(Jet, ElementaryFunctionsMatchClosedForms) {
  const auto x = Jet<4>::variable_x(0.4);
  const Jet<4> s = sin(x), c = cos(x), e = exp(x), l = log(1.0 + x), r = sqrt(x);
  for (int k = 0; k <= 4; ++k) {
    EXPECT_NEAR(s.derivative(k, 0), std::sin(0.4 + k * M_PI / 2), 1e-13);
    EXPECT_NEAR(c.derivative(k, 0), std::cos(0.4 + k * M_PI / 2), 1e-13);
    EXPECT_NEAR(e.derivative(k, 0), std::exp(0.4), 1e-13);
  }
  EXPECT_NEAR(l.derivative(3, 0), 2.0 / std::pow(1.4, 3), 1e-12);
  EXPECT_NEAR(r.derivative(2, 0), -0.25 * std::pow(0.4, -1.5), 1e-12);
}

TEST(Jet, DifferentiationLowersOrder) {
  const auto x = Jet<3>::variable_x(1.0), y = Jet<3>::variable_y(2.0);
  const Jet<3> f = x * x * x * y;
  EXPECT_DOUBLE_EQ(f.d_dx().d_dy().value(), 3.0);
  EXPECT_DOUBLE_EQ(f.d_dx().dx(), 12.0);
}
