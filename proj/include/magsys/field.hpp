#pragma once

// Scalar fields on model surfaces.
//
// A field is a closed-form expression, a constant, or a trigonometric series
// (typically imported from grid samples), optionally rescaled and shifted:
// value = scale * source + offset.  Expressions on the torus and on planar
// charts are functions of the chart coordinates (x, y); on the sphere they are
// functions of the ambient coordinates (x, y, z) of the unit sphere.

#include <iomanip>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>

#include "magsys/errors.hpp"
#include "magsys/expr.hpp"
#include "magsys/jet.hpp"
#include "magsys/spectral.hpp"

namespace magsys {

class ScalarField {
 public:
  struct Constant {
    double value;
  };
  using Source = std::variant<Constant, Expression, FourierSeries>;

  ScalarField() : ScalarField(Constant{0.0}) {}

  static ScalarField constant(double c) { return ScalarField(Constant{c}); }
  static ScalarField expression(std::string_view text) {
    Expression e = Expression::parse(text);
    if (!e.uses_variables()) return ScalarField(Constant{e.evaluate<double>(0.0, 0.0, 0.0)});
    return ScalarField(std::move(e));
  }
  static ScalarField fourier(FourierSeries s) { return ScalarField(std::move(s)); }

  /// Periodic field interpolating grid samples (trigonometric interpolation).
  static ScalarField from_grid(const GridSamples& g) {
    return ScalarField(FourierSeries::from_samples(g));
  }

  ScalarField scaled(double s) const {
    ScalarField r = *this;
    r.scale_ *= s;
    r.offset_ *= s;
    return r;
  }
  ScalarField shifted(double c) const {
    ScalarField r = *this;
    r.offset_ += c;
    return r;
  }

  bool is_constant() const { return std::holds_alternative<Constant>(*source_); }
  double constant_value() const {
    if (!is_constant()) throw PreconditionError("field is not constant");
    return scale_ * std::get<Constant>(*source_).value + offset_;
  }
  bool is_fourier() const { return std::holds_alternative<FourierSeries>(*source_); }
  const Source& source() const { return *source_; }
  double scale() const { return scale_; }
  double offset() const { return offset_; }

  /// Evaluate on doubles or jets.  A Fourier source expects x, y to be the
  /// identity jets of the chart coordinates.
  template <class T>
  T evaluate(const T& x, const T& y, const T& z) const {
    return std::visit(
        [&](const auto& src) -> T {
          using S = std::decay_t<decltype(src)>;
          if constexpr (std::is_same_v<S, Constant>) {
            return T(scale_ * src.value + offset_);
          } else if constexpr (std::is_same_v<S, Expression>) {
            return src.template evaluate<T>(x, y, z) * scale_ + offset_;
          } else {
            if constexpr (std::is_same_v<T, double>) {
              return scale_ * src.value(x, y) + offset_;
            } else {
              return src.template jet<T::order>(x.value(), y.value()) * scale_ + offset_;
            }
          }
        },
        *source_);
  }

  std::string description() const {
    std::ostringstream os;
    os << std::setprecision(17);
    std::visit(
        [&](const auto& src) {
          using S = std::decay_t<decltype(src)>;
          if constexpr (std::is_same_v<S, Constant>) os << "constant(" << src.value << ")";
          else if constexpr (std::is_same_v<S, Expression>) os << "expr(" << src.text() << ")";
          else os << "fourier(" << src.modes().size() << " modes)";
        },
        *source_);
    if (scale_ != 1.0) os << "*" << scale_;
    if (offset_ != 0.0) os << "+" << offset_;
    return os.str();
  }

 private:
  explicit ScalarField(Source s) : source_(std::make_shared<const Source>(std::move(s))) {}

  std::shared_ptr<const Source> source_;
  double scale_ = 1.0;
  double offset_ = 0.0;
};

/// CSV grid dump: first line "resolution,nx,ny", then ny rows of nx values
/// (row j holds y = j*Ly/ny).
inline void write_grid_csv(std::ostream& os, const GridSamples& g) {
  os << "resolution," << g.nx << "," << g.ny << "\n";
  os << std::setprecision(17);
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      if (i) os << ",";
      os << g.at(i, j);
    }
    os << "\n";
  }
}

inline GridSamples read_grid_csv(std::istream& is, double side_x, double side_y) {
  std::string line;
  if (!std::getline(is, line)) throw ParseError("grid csv: missing header");
  GridSamples g;
  g.side_x = side_x;
  g.side_y = side_y;
  {
    std::istringstream hs(line);
    std::string tag, nx, ny;
    if (!std::getline(hs, tag, ',') || tag != "resolution" || !std::getline(hs, nx, ',') ||
        !std::getline(hs, ny, ','))
      throw ParseError("grid csv: header must be 'resolution,nx,ny'");
    try {
      g.nx = std::stoi(nx);
      g.ny = std::stoi(ny);
    } catch (const std::exception&) {
      throw ParseError("grid csv: malformed resolution in header");
    }
    if (g.nx <= 0 || g.ny <= 0) throw ParseError("grid csv: resolution must be positive");
  }
  g.values.reserve(static_cast<std::size_t>(g.nx) * g.ny);
  for (int j = 0; j < g.ny; ++j) {
    if (!std::getline(is, line)) throw ParseError("grid csv: expected " + std::to_string(g.ny) + " rows");
    std::istringstream rs(line);
    std::string cell;
    int count = 0;
    while (std::getline(rs, cell, ',')) {
      try {
        g.values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ParseError("grid csv: bad value in row " + std::to_string(j));
      }
      ++count;
    }
    if (count != g.nx)
      throw ParseError("grid csv: row " + std::to_string(j) + " has " + std::to_string(count) +
                       " values, expected " + std::to_string(g.nx));
  }
  return g;
}

}  // namespace magsys
