#pragma once

// Minimal arithmetic expression language for closed-form fields.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('+' | '-') unary | primary
//   primary := number | 'pi' | 'x' | 'y' | 'z' | func '(' expr ')' | '(' expr ')'
//   func    := 'sin' | 'cos' | 'exp'
//
// On periodic and planar domains the coordinates are the chart coordinates
// x, y.  On the sphere x, y, z are the ambient coordinates of the unit sphere.

#include <cctype>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "magsys/errors.hpp"

namespace magsys {

class Expression {
 public:
  enum class Op { Const, VarX, VarY, VarZ, Add, Sub, Mul, Div, Neg, Sin, Cos, Exp };

  struct Node {
    Op op;
    double value = 0.0;
    int lhs = -1;
    int rhs = -1;
  };

  static Expression parse(std::string_view text) {
    Parser p{text, 0, {}};
    const int root = p.parse_expr();
    p.skip_ws();
    if (p.pos != text.size())
      throw ParseError("unexpected '" + std::string(1, text[p.pos]) + "' at position " +
                       std::to_string(p.pos) + " in expression '" + std::string(text) + "'");
    Expression e;
    e.nodes_ = std::move(p.nodes);
    e.root_ = root;
    e.text_ = std::string(text);
    return e;
  }

  const std::string& text() const { return text_; }

  bool uses_variables() const {
    for (const auto& n : nodes_)
      if (n.op == Op::VarX || n.op == Op::VarY || n.op == Op::VarZ) return true;
    return false;
  }

  template <class T>
  T evaluate(const T& x, const T& y, const T& z) const {
    return eval_node<T>(root_, x, y, z);
  }

 private:
  template <class T>
  T eval_node(int i, const T& x, const T& y, const T& z) const {
    using std::cos;
    using std::exp;
    using std::sin;
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    switch (n.op) {
      case Op::Const: return T(n.value);
      case Op::VarX: return x;
      case Op::VarY: return y;
      case Op::VarZ: return z;
      case Op::Add: return eval_node<T>(n.lhs, x, y, z) + eval_node<T>(n.rhs, x, y, z);
      case Op::Sub: return eval_node<T>(n.lhs, x, y, z) - eval_node<T>(n.rhs, x, y, z);
      case Op::Mul: return eval_node<T>(n.lhs, x, y, z) * eval_node<T>(n.rhs, x, y, z);
      case Op::Div: return eval_node<T>(n.lhs, x, y, z) / eval_node<T>(n.rhs, x, y, z);
      case Op::Neg: return -eval_node<T>(n.lhs, x, y, z);
      case Op::Sin: return sin(eval_node<T>(n.lhs, x, y, z));
      case Op::Cos: return cos(eval_node<T>(n.lhs, x, y, z));
      case Op::Exp: return exp(eval_node<T>(n.lhs, x, y, z));
    }
    return T(0.0);
  }

  struct Parser {
    std::string_view s;
    std::size_t pos;
    std::vector<Node> nodes;

    void skip_ws() {
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    int add(Node n) {
      nodes.push_back(n);
      return static_cast<int>(nodes.size()) - 1;
    }
    [[noreturn]] void fail(const std::string& what) {
      throw ParseError(what + " at position " + std::to_string(pos) + " in expression '" +
                       std::string(s) + "'");
    }

    int parse_expr() {
      int lhs = parse_term();
      for (;;) {
        skip_ws();
        if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) {
          const Op op = s[pos] == '+' ? Op::Add : Op::Sub;
          ++pos;
          const int rhs = parse_term();
          lhs = add({op, 0.0, lhs, rhs});
        } else {
          return lhs;
        }
      }
    }
    int parse_term() {
      int lhs = parse_unary();
      for (;;) {
        skip_ws();
        if (pos < s.size() && (s[pos] == '*' || s[pos] == '/')) {
          const Op op = s[pos] == '*' ? Op::Mul : Op::Div;
          ++pos;
          const int rhs = parse_unary();
          lhs = add({op, 0.0, lhs, rhs});
        } else {
          return lhs;
        }
      }
    }
    int parse_unary() {
      skip_ws();
      if (pos < s.size() && s[pos] == '-') {
        ++pos;
        return add({Op::Neg, 0.0, parse_unary(), -1});
      }
      if (pos < s.size() && s[pos] == '+') {
        ++pos;
        return parse_unary();
      }
      return parse_primary();
    }
    int parse_primary() {
      skip_ws();
      if (pos >= s.size()) fail("unexpected end of input");
      const char c = s[pos];
      if (c == '(') {
        ++pos;
        const int e = parse_expr();
        skip_ws();
        if (pos >= s.size() || s[pos] != ')') fail("expected ')'");
        ++pos;
        return e;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        const std::string rest(s.substr(pos));
        std::size_t used = 0;
        double v = 0.0;
        try {
          v = std::stod(rest, &used);
        } catch (const std::exception&) {
          fail("malformed number");
        }
        pos += used;
        return add({Op::Const, v, -1, -1});
      }
      if (std::isalpha(static_cast<unsigned char>(c))) {
        const std::size_t start = pos;
        while (pos < s.size() && std::isalnum(static_cast<unsigned char>(s[pos]))) ++pos;
        const std::string_view name = s.substr(start, pos - start);
        if (name == "x") return add({Op::VarX});
        if (name == "y") return add({Op::VarY});
        if (name == "z") return add({Op::VarZ});
        if (name == "pi") return add({Op::Const, std::numbers::pi});
        Op fn;
        if (name == "sin") fn = Op::Sin;
        else if (name == "cos") fn = Op::Cos;
        else if (name == "exp") fn = Op::Exp;
        else {
          pos = start;
          fail("unknown identifier '" + std::string(name) + "'");
        }
        skip_ws();
        if (pos >= s.size() || s[pos] != '(') fail("expected '(' after function name");
        ++pos;
        const int arg = parse_expr();
        skip_ws();
        if (pos >= s.size() || s[pos] != ')') fail("expected ')'");
        ++pos;
        return add({fn, 0.0, arg, -1});
      }
      fail("unexpected character '" + std::string(1, c) + "'");
    }
  };

  std::vector<Node> nodes_;
  int root_ = -1;
  std::string text_;
};

}  // namespace magsys
