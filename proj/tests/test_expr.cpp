#include <gtest/gtest.h>

#include <cmath>

#include "magsys/errors.hpp"
#include "magsys/expr.hpp"
#include "magsys/field.hpp"

using namespace magsys;

TEST(Expression, PrecedenceAndFunctions) {
  const Expression e = Expression::parse("2 + 0.1*sin(2*pi*x) - y/4 * -z");
  EXPECT_NEAR(e.evaluate<double>(0.125, 2.0, 3.0), 2.0 + 0.1 * std::sin(M_PI / 4) + 1.5, 1e-15);
  EXPECT_NEAR(Expression::parse("exp(1)").evaluate<double>(0, 0, 0), M_E, 1e-15);
  EXPECT_NEAR(Expression::parse("((1+2)*3)").evaluate<double>(0, 0, 0), 9.0, 0.0);
  EXPECT_NEAR(Expression::parse("1e-3*cos(x)").evaluate<double>(0, 0, 0), 1e-3, 0.0);
}

TEST(Expression, JetEvaluationDifferentiates) {
  const Expression e = Expression::parse("sin(2*pi*x)*exp(y)");
  const auto j = e.evaluate<Jet<2>>(Jet<2>::variable_x(0.1), Jet<2>::variable_y(0.2), Jet<2>(0.0));
  EXPECT_NEAR(j.dx(), 2 * M_PI * std::cos(0.2 * M_PI) * std::exp(0.2), 1e-13);
  EXPECT_NEAR(j.dyy(), std::sin(0.2 * M_PI) * std::exp(0.2), 1e-13);
}

TEST(Expression, ErrorsCarryPosition) {
  try {
    Expression::parse("1 + foo(x)");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("position 4"), std::string::npos);
  }
  EXPECT_THROW(Expression::parse("(1+2"), ParseError);
  EXPECT_THROW(Expression::parse("1 2"), ParseError);
  EXPECT_THROW(Expression::parse(""), ParseError);
  EXPECT_THROW(Expression::parse("sin x"), ParseError);
}

TEST(ScalarField, ConstantExpressionCollapses) {
  const ScalarField f = ScalarField::expression("2*pi");
  ASSERT_TRUE(f.is_constant());
  EXPECT_DOUBLE_EQ(f.constant_value(), 2 * M_PI);
  EXPECT_DOUBLE_EQ(f.scaled(3.0).shifted(1.0).constant_value(), 6 * M_PI + 1.0);
  EXPECT_THROW(ScalarField::expression("x").constant_value(), PreconditionError);
}
