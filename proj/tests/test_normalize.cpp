#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "magsys/normalize.hpp"
#include "magsys/quadrature.hpp"

using namespace magsys;

namespace {

constexpr double kPi = std::numbers::pi;

// Mass of psi(R) under f_norm mu via Green's theorem along psi(boundary of R).
// G(x, y) = int_0^x f_norm e^{2u}(s, y) ds by Gauss-Legendre on [0, x].
double image_mass(const Surface& s, const ScalarField& fn, const MoserResult& m, double x0, double x1, double y0,
                  double y1) {
  const auto gl = gauss_legendre(16);
  auto G = [&](double x, double y) {
    double acc = 0.0;
    const int panels = std::max(1, static_cast<int>(std::ceil(std::abs(x) / 0.05)));
    for (int p = 0; p < panels; ++p) {
      const double a = x * p / panels, b = x * (p + 1) / panels;
      for (std::size_t k = 0; k < gl.nodes.size(); ++k) {
        const double t = 0.5 * (a + b) + 0.5 * (b - a) * gl.nodes[k];
        const ChartPoint cp{t, y, 0};
        acc += 0.5 * (b - a) * gl.weights[k] * s.field_value(fn, cp) * std::exp(2.0 * s.log_factor_value(cp));
      }
    }
    return acc;
  };
  // Counter-clockwise boundary as four segments.
  const std::array<std::array<double, 4>, 4> sides{{{x0, y0, x1, y0}, {x1, y0, x1, y1}, {x1, y1, x0, y1}, {x0, y1, x0, y0}}};
  double total = 0.0;
  for (const auto& sd : sides) {
    const int panels = 8;
    for (int p = 0; p < panels; ++p)
      for (std::size_t k = 0; k < gl.nodes.size(); ++k) {
        const double t = (p + 0.5 + 0.5 * gl.nodes[k]) / panels;
        const double x = sd[0] + t * (sd[2] - sd[0]), y = sd[1] + t * (sd[3] - sd[1]);
        const auto img = m.map_with_differential(x, y);
        const double ydot = img[4] * (sd[2] - sd[0]) + img[5] * (sd[3] - sd[1]);
        total += gl.weights[k] * 0.5 / panels * G(img[0], img[1]) * ydot;
      }
  }
  return total;
}

}  // namespace

TEST(Hodge, PrimitiveOfZeroMeanDensity) {
  const Surface t = Surface::flat_torus();
  const ScalarField h = ScalarField::expression("cos(2*pi*x) + 0.5*sin(2*pi*(x + 2*y))");
  const HodgePrimitive p = hodge_primitive(t, h);
  EXPECT_LT(p.residual, 1e-10);
  // zeta = -phi_y dx + phi_x dy with phi = -cos(2 pi x)/(4 pi^2) + ...
  const auto z = p.zeta.value(0.1, 0.3);
  const double expect_zy = std::sin(2 * kPi * 0.1) / (2 * kPi) + 0.5 * std::cos(2 * kPi * 0.7) * 2 * kPi / (20 * kPi * kPi) * -1.0;
  EXPECT_NEAR(z[1], expect_zy, 1e-12);
  for (double r : p.schauder_ratio) EXPECT_GT(r, 0.0);
}

TEST(Hodge, ConformalTorusAndPreconditions) {
  const Surface t = Surface::conformal_torus(ScalarField::expression("0.1*sin(2*pi*x)*cos(2*pi*y)"));
  // h e^{2u} must average to zero: take h = g e^{-2u} with g of zero mean.
  const ScalarField h = ScalarField::expression("cos(2*pi*y)*exp(-0.2*sin(2*pi*x)*cos(2*pi*y))");
  EXPECT_LT(hodge_primitive(t, h).residual, 1e-9);
  EXPECT_THROW(hodge_primitive(Surface::flat_torus(), ScalarField::constant(1.0)), PreconditionError);
  EXPECT_THROW(hodge_primitive(Surface::round_sphere(), ScalarField::constant(0.0)), UnsupportedOperation);
}

TEST(Moser, OneDimensionalFieldMatchesPrimitiveOracle) {
  const Surface t = Surface::flat_torus();
  const ScalarField f = ScalarField::expression("2*(1 + 0.2*cos(2*pi*x))");
  MoserOptions o;
  o.resolution = 32;
  const MoserResult m = moser_normalize(t, f, o);
  EXPECT_NEAR(m.f_avg, 2.0, 1e-12);
  EXPECT_LE(m.pullback_defect, 1e-6);
  // f_norm = 1 + 0.2 cos(2 pi x) depends on x only, so psi(x, y) = (X(x), y) and
  // F(X(b)) - F(X(a)) = b - a with F(x) = x + 0.2 sin(2 pi x)/(2 pi).
  auto F = [](double x) { return x + 0.2 * std::sin(2 * kPi * x) / (2 * kPi); };
  for (double a : {0.0, 0.13, 0.5}) {
    const double b = a + 0.31;
    const auto pa = m.map_with_differential(a, 0.4), pb = m.map_with_differential(b, 0.4);
    EXPECT_NEAR(pa[1], 0.4, 1e-12);
    EXPECT_NEAR(F(pb[0]) - F(pa[0]), b - a, 1e-9);
  }
}

TEST(Moser, ConformalTorusMassConservation) {
  const Surface t = Surface::conformal_torus(ScalarField::expression("0.1*cos(2*pi*(x - y))"));
  const ScalarField f = ScalarField::expression("1.5 + 0.3*sin(2*pi*x)*cos(2*pi*y)");
  MoserOptions o;
  o.resolution = 32;
  const MoserResult m = moser_normalize(t, f, o);
  EXPECT_LE(m.pullback_defect, 1e-6);
  const ScalarField fn = f.scaled(1.0 / m.f_avg);
  // mu(R) for the rectangle by tensor Gauss-Legendre.
  const double x0 = 0.1, x1 = 0.45, y0 = 0.2, y1 = 0.75;
  const auto gl = gauss_legendre(24);
  double mu_r = 0.0;
  for (std::size_t i = 0; i < gl.nodes.size(); ++i)
    for (std::size_t j = 0; j < gl.nodes.size(); ++j) {
      const double x = 0.5 * (x0 + x1) + 0.5 * (x1 - x0) * gl.nodes[i];
      const double y = 0.5 * (y0 + y1) + 0.5 * (y1 - y0) * gl.nodes[j];
      mu_r += 0.25 * (x1 - x0) * (y1 - y0) * gl.weights[i] * gl.weights[j] * std::exp(2.0 * t.log_factor_value({x, y, 0}));
    }
  EXPECT_NEAR(image_mass(t, fn, m, x0, x1, y0, y1), mu_r, 1e-8);
  // Monte Carlo estimate of the same pull-back mass.
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ux(x0, x1), uy(y0, y1);
  double acc = 0.0;
  const int n = 400;
  for (int k = 0; k < n; ++k) {
    const double x = ux(rng), y = uy(rng);
    const auto img = m.map_with_differential(x, y);
    acc += (pullback_defect_at(t, fn, x, y, img) + 1.0) * std::exp(2.0 * t.log_factor_value({x, y, 0}));
  }
  EXPECT_NEAR(acc / n * (x1 - x0) * (y1 - y0), mu_r, 0.05 * mu_r);
}

TEST(Moser, ConstantAndUnsupported) {
  const MoserResult m = moser_normalize(Surface::flat_torus(), ScalarField::constant(3.0));
  EXPECT_TRUE(m.identity);
  EXPECT_EQ(m.pullback_defect, 0.0);
  EXPECT_TRUE(moser_normalize(Surface::round_sphere(), ScalarField::constant(1.0)).identity);
  EXPECT_THROW(moser_normalize(Surface::round_sphere(), ScalarField::expression("1 + 0.1*z")), UnsupportedOperation);
  EXPECT_THROW(moser_normalize(Surface::flat_torus(), ScalarField::expression("sin(2*pi*x)")), PositivityError);
  EXPECT_THROW(moser_normalize(Surface::hyperbolic_chart(), ScalarField::constant(1.0)), UnsupportedOperation);
}

TEST(Strongness, ThresholdAndRescaling) {
  const StrongnessReport r = strongness(Surface::flat_torus(), ScalarField::constant(1.0), 0.0);
  for (double b : r.brackets) EXPECT_DOUBLE_EQ(b, 1.0);
  EXPECT_DOUBLE_EQ(r.threshold(), 2.0);
  EXPECT_FALSE(r.is_strong());
  EXPECT_DOUBLE_EQ(r.minimal_rescaling(), 2.0);
  EXPECT_TRUE(r.rescaled(2.0001).is_strong());
  EXPECT_FALSE(r.rescaled(1.9999).is_strong());
  EXPECT_NEAR(r.threshold(1.0), 2.0 * std::exp(1.0), 1e-12);

  const ScalarField f = ScalarField::expression("2 + sin(2*pi*x)");
  const StrongnessReport g = strongness(Surface::flat_torus(), f, 0.5, 128);
  // <f>_1 = (3 + 2 pi)/1, min f = 1.
  EXPECT_NEAR(g.brackets[0], 3.0 + 2.0 * kPi, 1e-9);
  EXPECT_NEAR(g.brackets[1], 3.0 + 2.0 * kPi + 4.0 * kPi * kPi, 1e-8);
  EXPECT_NEAR(g.minimal_rescaling() * g.f_avg, g.threshold(), 1e-9);
  EXPECT_THROW(strongness(Surface::flat_torus(), ScalarField::expression("sin(2*pi*x)"), 1.0), PositivityError);
}

TEST(IndexSets, CountsAndPolynomials) {
  EXPECT_TRUE(index_set(0, 0).empty());
  EXPECT_EQ(index_set(2, 2).size(), 10u);
  EXPECT_EQ(index_set(1, 0).size(), 1u);
  EXPECT_EQ(index_set(3, 0).size(), 3u);
  // Brute-force count for a few (h, k).
  for (int h = 0; h <= 3; ++h)
    for (int k = 0; k <= 2; ++k) {
      int count = 0;
      for (int a0 = 0; a0 <= h + k; ++a0)
        for (int a1 = 0; a1 <= (k >= 1 ? h + k : 0); ++a1)
          for (int a2 = 0; a2 <= (k >= 2 ? h + k : 0); ++a2) {
            const int w = a0 + 2 * a1 + 3 * a2;
            if (w > 0 && w <= h + k) ++count;
          }
      EXPECT_EQ(static_cast<int>(index_set(h, k).size()), count) << h << "," << k;
    }
  EXPECT_DOUBLE_EQ(bhk(1, 0, {2.0}), 2.0);
  EXPECT_DOUBLE_EQ(bhk(2, 0, {2.0}), 6.0);
  // I_{2,2} at x = (1, 1, 1) counts the indices.
  EXPECT_DOUBLE_EQ(bhk(2, 2, {1.0, 1.0, 1.0}), 10.0);
  EXPECT_DOUBLE_EQ(bhk(0, 0, {5.0}), 0.0);
  EXPECT_THROW(bhk(2, 2, {1.0, 1.0}), ArityError);
}

TEST(Gronwall, WitnessOnTorusAndSphere) {
  GronwallOptions o;
  o.samples = 20;
  o.trajectory_points = 50;
  const GronwallReport t = gronwall_witness(Surface::flat_torus(), ScalarField::expression("1 + 0.3*sin(2*pi*x)"), o);
  EXPECT_EQ(t.samples, 20);
  EXPECT_EQ(t.first_order_violations, 0);
  EXPECT_LE(t.worst_first_order_ratio, 1.0);
  EXPECT_GT(t.grad_x[0], 1.0);
  EXPECT_GE(t.lhs, 0.0);
  EXPECT_TRUE(std::isfinite(t.calibration));
  const GronwallReport s = gronwall_witness(Surface::round_sphere(), ScalarField::constant(1.0), o);
  EXPECT_EQ(s.first_order_violations, 0);
  EXPECT_EQ(s.skipped, 0);
  o.samples = 5;
  EXPECT_FALSE(gronwall_witness(Surface::flat_torus(), ScalarField::constant(1.0), o).warnings.empty());
}
