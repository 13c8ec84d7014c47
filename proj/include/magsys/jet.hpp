#pragma once

// Truncated bivariate Taylor polynomials ("jets").
//
// A Jet<K> carries the Taylor coefficients of a smooth function of two chart
// variables (x, y) up to total degree K at a base point.  Arithmetic on jets
// is truncated polynomial arithmetic, so evaluating any expression on jets
// seeded with Jet<K>::variable_x / variable_y yields exact partial derivatives
// up to order K (forward-mode differentiation).

#include <array>
#include <cmath>
#include <cstddef>

namespace magsys {

template <int K>
class Jet {
  static_assert(K >= 0 && K <= 4, "jet order out of range");

 public:
  static constexpr int order = K;
  static constexpr std::size_t size = static_cast<std::size_t>((K + 1) * (K + 2) / 2);

  // Storage index of the monomial dx^i dy^j.
  static constexpr std::size_t index(int i, int j) {
    const int d = i + j;
    return static_cast<std::size_t>(d * (d + 1) / 2 + j);
  }

  constexpr Jet() = default;
  constexpr Jet(double c) { c_[0] = c; }  // NOLINT: implicit lift of constants

  static constexpr Jet constant(double c) { return Jet(c); }
  static constexpr Jet variable_x(double x0) {
    Jet r(x0);
    if constexpr (K >= 1) r.c_[index(1, 0)] = 1.0;
    return r;
  }
  static constexpr Jet variable_y(double y0) {
    Jet r(y0);
    if constexpr (K >= 1) r.c_[index(0, 1)] = 1.0;
    return r;
  }

  constexpr double value() const { return c_[0]; }
  constexpr double coeff(int i, int j) const { return (i + j <= K) ? c_[index(i, j)] : 0.0; }
  constexpr double& coeff_ref(int i, int j) { return c_[index(i, j)]; }

  // Partial derivative d^{i+j} / dx^i dy^j at the base point.
  constexpr double derivative(int i, int j) const {
    if (i + j > K) return 0.0;
    return c_[index(i, j)] * factorial(i) * factorial(j);
  }
  constexpr double dx() const { return derivative(1, 0); }
  constexpr double dy() const { return derivative(0, 1); }
  constexpr double dxx() const { return derivative(2, 0); }
  constexpr double dxy() const { return derivative(1, 1); }
  constexpr double dyy() const { return derivative(0, 2); }

  // Jet of the partial derivative in x (top-degree coefficients become zero).
  constexpr Jet d_dx() const {
    Jet r;
    for (int d = 0; d < K; ++d)
      for (int j = 0; j <= d; ++j) {
        const int i = d - j;
        r.c_[index(i, j)] = (i + 1) * c_[index(i + 1, j)];
      }
    return r;
  }
  constexpr Jet d_dy() const {
    Jet r;
    for (int d = 0; d < K; ++d)
      for (int j = 0; j <= d; ++j) {
        const int i = d - j;
        r.c_[index(i, j)] = (j + 1) * c_[index(i, j + 1)];
      }
    return r;
  }

  // Composition g(*this) given g and its derivatives at value(): derivs[n] = g^{(n)}.
  constexpr Jet compose(const std::array<double, K + 1>& derivs) const {
    Jet h = *this;
    h.c_[0] = 0.0;
    Jet result(derivs[0]);
    Jet power(1.0);
    double inv_fact = 1.0;
    for (int n = 1; n <= K; ++n) {
      power = power * h;
      inv_fact /= n;
      result += power * (derivs[static_cast<std::size_t>(n)] * inv_fact);
    }
    return result;
  }

  constexpr Jet& operator+=(const Jet& o) {
    for (std::size_t k = 0; k < size; ++k) c_[k] += o.c_[k];
    return *this;
  }
  constexpr Jet& operator-=(const Jet& o) {
    for (std::size_t k = 0; k < size; ++k) c_[k] -= o.c_[k];
    return *this;
  }
  constexpr Jet& operator*=(double s) {
    for (auto& v : c_) v *= s;
    return *this;
  }

  friend constexpr Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend constexpr Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend constexpr Jet operator-(Jet a) {
    for (auto& v : a.c_) v = -v;
    return a;
  }
  friend constexpr Jet operator*(Jet a, double s) { return a *= s; }
  friend constexpr Jet operator*(double s, Jet a) { return a *= s; }
  friend constexpr Jet operator+(Jet a, double s) {
    a.c_[0] += s;
    return a;
  }
  friend constexpr Jet operator+(double s, Jet a) { return a + s; }
  friend constexpr Jet operator-(Jet a, double s) {
    a.c_[0] -= s;
    return a;
  }
  friend constexpr Jet operator-(double s, const Jet& a) { return (-a) + s; }

  friend constexpr Jet operator*(const Jet& a, const Jet& b) {
    Jet r;
    for (int d1 = 0; d1 <= K; ++d1)
      for (int j1 = 0; j1 <= d1; ++j1) {
        const double av = a.c_[index(d1 - j1, j1)];
        if (av == 0.0) continue;
        for (int d2 = 0; d1 + d2 <= K; ++d2)
          for (int j2 = 0; j2 <= d2; ++j2)
            r.c_[index(d1 - j1 + d2 - j2, j1 + j2)] += av * b.c_[index(d2 - j2, j2)];
      }
    return r;
  }
  friend constexpr Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }
  friend constexpr Jet operator/(const Jet& a, double s) { return a * (1.0 / s); }
  friend constexpr Jet operator/(double s, const Jet& b) { return reciprocal(b) * s; }

  friend constexpr Jet reciprocal(const Jet& b) {
    const double v = b.value();
    std::array<double, K + 1> d{};
    double p = 1.0 / v;
    double sgn = 1.0;
    for (int n = 0; n <= K; ++n) {
      d[static_cast<std::size_t>(n)] = sgn * factorial(n) * p;
      p /= v;
      sgn = -sgn;
    }
    return b.compose(d);
  }

  friend Jet sin(const Jet& a) {
    const double s = std::sin(a.value()), c = std::cos(a.value());
    std::array<double, K + 1> d{};
    const double cyc[4] = {s, c, -s, -c};
    for (int n = 0; n <= K; ++n) d[static_cast<std::size_t>(n)] = cyc[n % 4];
    return a.compose(d);
  }
  friend Jet cos(const Jet& a) {
    const double s = std::sin(a.value()), c = std::cos(a.value());
    std::array<double, K + 1> d{};
    const double cyc[4] = {c, -s, -c, s};
    for (int n = 0; n <= K; ++n) d[static_cast<std::size_t>(n)] = cyc[n % 4];
    return a.compose(d);
  }
  friend Jet exp(const Jet& a) {
    std::array<double, K + 1> d{};
    d.fill(std::exp(a.value()));
    return a.compose(d);
  }
  friend Jet log(const Jet& a) {
    const double v = a.value();
    std::array<double, K + 1> d{};
    d[0] = std::log(v);
    double p = 1.0 / v;
    double sgn = 1.0;
    for (int n = 1; n <= K; ++n) {
      d[static_cast<std::size_t>(n)] = sgn * factorial(n - 1) * p;
      p /= v;
      sgn = -sgn;
    }
    return a.compose(d);
  }
  friend Jet sqrt(const Jet& a) {
    const double v = a.value();
    std::array<double, K + 1> d{};
    double coef = 1.0, expo = 0.5;
    for (int n = 0; n <= K; ++n) {
      d[static_cast<std::size_t>(n)] = coef * std::pow(v, expo);
      coef *= expo;
      expo -= 1.0;
    }
    return a.compose(d);
  }

 private:
  static constexpr double factorial(int n) {
    double r = 1.0;
    for (int i = 2; i <= n; ++i) r *= i;
    return r;
  }

  std::array<double, size> c_{};
};

}  // namespace magsys
