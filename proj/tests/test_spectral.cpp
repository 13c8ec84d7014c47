#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "magsys/errors.hpp"
#include "magsys/field.hpp"
#include "magsys/quadrature.hpp"
#include "magsys/spectral.hpp"

using namespace magsys;

namespace {
GridSamples sample(double lx, double ly, int nx, int ny, double (*h)(double, double)) {
  GridSamples g{nx, ny, lx, ly, {}};
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) g.values.push_back(h(g.x(i), g.y(j)));
  return g;
}
double smooth(double x, double y) { return 1.5 + std::sin(2 * M_PI * x) * std::cos(4 * M_PI * y / 2.0) + 0.3 * std::cos(2 * M_PI * (x + y)); }
}  // namespace

TEST(FourierSeries, InterpolatesBandLimitedData) {
  const FourierSeries s = FourierSeries::from_samples(sample(1.0, 2.0, 16, 12, smooth));
  EXPECT_NEAR(s.mean(), 1.5, 1e-14);
  for (double x : {0.013, 0.4, 0.77})
    for (double y : {0.1, 1.3})
      EXPECT_NEAR(s.value(x, y), smooth(x, y), 1e-13);
  const auto j = s.jet<2>(0.3, 0.7);
  const double h = 1e-5;
  EXPECT_NEAR(j.dx(), (smooth(0.3 + h, 0.7) - smooth(0.3 - h, 0.7)) / (2 * h), 1e-8);
}

TEST(FourierSeries, PoissonSolutionInvertsLaplacian) {
  const FourierSeries s = FourierSeries::from_samples(sample(1.0, 2.0, 16, 12, smooth));
  const FourierSeries phi = s.poisson_solution();
  const FourierSeries lap = phi.derivative(2, 0);
  const FourierSeries lap2 = phi.derivative(0, 2);
  for (double x : {0.2, 0.9}) EXPECT_NEAR(lap.value(x, 0.5) + lap2.value(x, 0.5), smooth(x, 0.5) - 1.5, 1e-12);
  EXPECT_NEAR(phi.mean(), 0.0, 0.0);
}

TEST(Quadrature, GaussLegendreIsExactForPolynomials) {
  const QuadratureRule r = gauss_legendre(8);
  double s = 0;
  for (std::size_t i = 0; i < 8; ++i) s += r.weights[i] * std::pow(r.nodes[i], 14);
  EXPECT_NEAR(s, 2.0 / 15.0, 1e-15);
  EXPECT_NEAR(composite_gauss([](double x) { return std::exp(x); }, 0.0, 3.0, 0.1, r), std::exp(3.0) - 1, 1e-12);
}

TEST(GridCsv, RoundTripAndDiagnostics) {
  const GridSamples g = sample(1.0, 1.0, 4, 3, smooth);
  std::stringstream ss;
  write_grid_csv(ss, g);
  const GridSamples back = read_grid_csv(ss, 1.0, 1.0);
  ASSERT_EQ(back.nx, 4);
  ASSERT_EQ(back.ny, 3);
  for (std::size_t i = 0; i < g.values.size(); ++i) EXPECT_DOUBLE_EQ(back.values[i], g.values[i]);

  std::stringstream bad_header("res,4,3\n");
  EXPECT_THROW(read_grid_csv(bad_header, 1, 1), ParseError);
  std::stringstream short_row("resolution,2,1\n1.0\n");
  EXPECT_THROW(read_grid_csv(short_row, 1, 1), ParseError);
  std::stringstream bad_value("resolution,2,1\n1.0,abc\n");
  EXPECT_THROW(read_grid_csv(bad_value, 1, 1), ParseError);
  std::stringstream missing_rows("resolution,1,2\n1.0\n");
  EXPECT_THROW(read_grid_csv(missing_rows, 1, 1), ParseError);
}
