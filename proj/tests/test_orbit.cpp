#include <gtest/gtest.h>

#include <chrono>
#include <cmath>

#include "magsys/errors.hpp"
#include "magsys/orbit.hpp"

using namespace magsys;

namespace {
const Surface kSphere = Surface::round_sphere(1.0);
const Surface kTorus = Surface::flat_torus();
}  // namespace

TEST(Orbit, ReturnResidual) {
  const auto r = return_residual(kTorus, ScalarField::constant(1.0), {0.3, 0.9, 2.0, 0}, 2 * M_PI);
  EXPECT_LT(r.r.norm(), 1e-9);
  // Off by delta in time: residual is delta in arc length (and delta in angle).
  const double delta = 1e-4;
  const auto rp = return_residual(kTorus, ScalarField::constant(1.0), {0.3, 0.9, 2.0, 0}, 2 * M_PI + delta);
  EXPECT_NEAR(rp.r.head<2>().norm(), delta, 1e-8);
  EXPECT_THROW(return_residual(kTorus, ScalarField::constant(1.0), {0, 0, 0, 0}, -1.0), PreconditionError);
}

TEST(Orbit, FindsConstantFieldOrbits) {
  const auto a = find_closed_orbit(kSphere, ScalarField::constant(1.0), {0.2, 0.4, 1.0, 0}, 4.0);
  ASSERT_TRUE(a.orbit) << a.diagnostic;
  EXPECT_NEAR(a.orbit->period, M_PI * std::sqrt(2.0), 1e-7);
  EXPECT_TRUE(a.orbit->prime);
  EXPECT_TRUE(a.orbit->degenerate);
  EXPECT_LE(a.orbit->closure_residual, 1e-8);

  const auto b = find_closed_orbit(kTorus, ScalarField::constant(2.0), {0.2, 0.4, 1.0, 0}, 3.0);
  ASSERT_TRUE(b.orbit);
  EXPECT_NEAR(b.orbit->period, M_PI, 1e-8);
  EXPECT_EQ(b.orbit->turning_number, -1);
  EXPECT_TRUE(b.orbit->in_h_infty);

  const auto c = find_closed_orbit(kSphere, ScalarField::constant(0.0), {1.3, -0.4, 0.3, 1}, 6.0);
  ASSERT_TRUE(c.orbit);
  EXPECT_NEAR(c.orbit->period, 2 * M_PI, 1e-8);
  EXPECT_EQ(std::abs(c.orbit->turning_number), 1);
  EXPECT_TRUE(c.orbit->in_h_infty);
}

TEST(Orbit, PrimeReductionFromIterateGuess) {
  // Starting near the triple period still yields the prime orbit.
  const auto a = find_closed_orbit(kTorus, ScalarField::constant(2.0), {0.2, 0.4, 1.0, 0}, 3 * M_PI + 0.01);
  ASSERT_TRUE(a.orbit);
  EXPECT_NEAR(a.orbit->period, M_PI, 1e-8);
  EXPECT_TRUE(a.orbit->prime);
}

TEST(Orbit, TurningNumbersOfIterates) {
  const auto a = find_closed_orbit(kTorus, ScalarField::constant(1.0), {0.2, 0.4, 1.0, 0}, 6.0);
  ASSERT_TRUE(a.orbit);
  EXPECT_EQ(a.orbit->turning_number, -1);
  const ClosedOrbit three = iterate(kTorus, ScalarField::constant(1.0), *a.orbit, 3);
  EXPECT_EQ(three.turning_number, -3);
  EXPECT_NEAR(three.period, 3 * a.orbit->period, 1e-12);
  EXPECT_FALSE(three.prime);
  EXPECT_FALSE(in_lambda_h_infty(kTorus, three));

  const auto s = find_closed_orbit(kSphere, ScalarField::constant(1.0), {0.2, 0.4, 1.0, 0}, 4.4);
  ASSERT_TRUE(s.orbit);
  const ClosedOrbit s2 = iterate(kSphere, ScalarField::constant(1.0), *s.orbit, 2);
  EXPECT_EQ(s2.turning_number, 2 * s.orbit->turning_number);
}

TEST(Orbit, TurningNumberIndependentOfPoleInComponent) {
  const auto s = find_closed_orbit(kSphere, ScalarField::constant(1.0), {0.2, 0.4, 1.0, 0}, 4.4);
  ASSERT_TRUE(s.orbit);
  Vec3 c{0, 0, 0};
  for (const auto& st : s.orbit->samples) c = c + kSphere.unit_ambient(st.point());
  c = normalized(c);
  // Poles in the component away from the orbit's centre.
  for (double t : {0.0, 0.2, 0.4}) {
    const Vec3 q = normalized(-1.0 * c + Vec3{t, -t, 0.5 * t});
    EXPECT_EQ(turning_number(kSphere, s.orbit->samples, q), -1);
  }
  // Poles inside the small disc see the reversed picture.
  EXPECT_EQ(turning_number(kSphere, s.orbit->samples, c), 1);
}

TEST(Orbit, ClassMembership) {
  // A closed straight geodesic on the torus is not contractible.
  const auto g = find_closed_orbit(kTorus, ScalarField::constant(0.0), {0.2, 0.4, 0.0, 0}, 1.0);
  ASSERT_TRUE(g.orbit) << g.diagnostic;
  EXPECT_FALSE(g.orbit->contractible);
  EXPECT_EQ(g.orbit->lattice_shift[0], 1);
  EXPECT_FALSE(g.orbit->in_h_infty);
  const auto s = find_closed_orbit(kSphere, ScalarField::constant(1.0), {0.2, 0.4, 1.0, 0}, 4.4);
  ASSERT_TRUE(s.orbit);
  EXPECT_TRUE(s.orbit->in_h_infty);
}

TEST(Orbit, AlexandrovEmbedding) {
  const auto s = find_closed_orbit(kSphere, ScalarField::constant(1.0), {0.2, 0.4, 1.0, 0}, 4.4);
  ASSERT_TRUE(s.orbit);
  EXPECT_TRUE(is_negatively_alexandrov_embedded(kSphere, *s.orbit).embedded);
  const auto t = find_closed_orbit(kTorus, ScalarField::constant(1.0), {0.2, 0.4, 1.0, 0}, 6.0);
  ASSERT_TRUE(t.orbit);
  const auto tc = is_negatively_alexandrov_embedded(kTorus, *t.orbit);
  EXPECT_TRUE(tc.embedded);
  EXPECT_FALSE(tc.inconclusive);

  std::vector<std::array<double, 2>> eight;
  for (int i = 0; i < 200; ++i) {
    const double t8 = 2 * M_PI * i / 200;
    eight.push_back({std::sin(t8), std::sin(t8) * std::cos(t8)});
  }
  EXPECT_FALSE(polygon_embedding(eight, 1e-6).embedded);
  std::vector<std::array<double, 2>> circle;
  for (int i = 0; i < 200; ++i) circle.push_back({std::cos(2 * M_PI * i / 200), std::sin(2 * M_PI * i / 200)});
  EXPECT_TRUE(polygon_embedding(circle, 1e-6).embedded);
  // Two loops that touch are flagged inconclusive.
  std::vector<std::array<double, 2>> touch = {{0, 0}, {1, 0}, {1, 1}, {0.5, 1e-9}, {0, 1}};
  const auto tt = polygon_embedding(touch, 1e-6);
  EXPECT_TRUE(tt.inconclusive);
}

TEST(Orbit, HausdorffIgnoresTimeShift) {
  const auto a = find_closed_orbit(kTorus, ScalarField::constant(2.0), {0.2, 0.4, 1.0, 0}, 3.0);
  ASSERT_TRUE(a.orbit);
  const ClosedOrbit shifted =
      make_closed_orbit(kTorus, ScalarField::constant(2.0), a.orbit->samples[77], a.orbit->period);
  EXPECT_LT(hausdorff_distance(kTorus, *a.orbit, shifted), 1e-8);
  const auto b = find_closed_orbit(kTorus, ScalarField::constant(2.0), {0.5, 0.4, 1.0, 0}, 3.0);
  ASSERT_TRUE(b.orbit);
  EXPECT_GT(hausdorff_distance(kTorus, *a.orbit, *b.orbit), 0.1);
}

TEST(Orbit, SurveyZollSphere) {
  const auto seeds = seed_grid(kSphere, {6, 6, 4});
  SurveyOptions o;
  o.threads = 2;
  const SurveyResult r = survey(kSphere, ScalarField::constant(1.0), seeds, o);
  EXPECT_EQ(r.seeds, 144);
  EXPECT_GT(r.orbits.size(), 10u);
  for (const auto& orb : r.orbits) {
    EXPECT_NEAR(orb.period, M_PI * std::sqrt(2.0), 1e-6);
    EXPECT_TRUE(orb.prime);
    EXPECT_TRUE(orb.in_h_infty);
  }
  // Dedupe is idempotent.
  int removed = -1;
  const auto again = dedupe_orbits(kSphere, r.orbits, o.dedupe_tol, &removed);
  EXPECT_EQ(removed, 0);
  EXPECT_EQ(again.size(), r.orbits.size());
  EXPECT_TRUE(survey(kSphere, ScalarField::constant(1.0), {}, o).orbits.empty());
}

TEST(Orbit, SurveyPerturbedTorus) {
  const ScalarField f = ScalarField::expression("2 + 0.05*sin(2*pi*x)");
  const auto t0 = std::chrono::steady_clock::now();
  const SurveyResult r = survey(kTorus, f, seed_grid(kTorus, {6, 2, 2}));
  std::printf("perturbed torus: %zu orbits, %d converged of %d, %.2fs\n", r.orbits.size(), r.converged, r.seeds,
              std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  for (const auto& o : r.orbits) std::printf("  T=%.10f start=(%.4f,%.4f) deg=%d\n", o.period, o.start.x, o.start.y, o.degenerate);
  ASSERT_GE(r.orbits.size(), 2u);
  double tmin = 1e9, tmax = 0;
  for (const auto& o : r.orbits) {
    tmin = std::min(tmin, o.period);
    tmax = std::max(tmax, o.period);
  }
  EXPECT_GT(tmax - tmin, 1e-4);
}
