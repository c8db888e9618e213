#pragma once

// Closed-form expressions in x and y for configuration files.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('+' | '-') unary | power
//   power   := primary ('^' unary)?
//   primary := number | 'x' | 'y' | 'pi' | 'e'
//            | ('sin' | 'cos' | 'exp') '(' expr ')' | '(' expr ')'

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>

namespace lsi {

class ExpressionError : public std::invalid_argument {
 public:
  ExpressionError(const std::string& what, std::size_t pos)
      : std::invalid_argument(what + " at position " + std::to_string(pos)), pos_(pos) {}
  [[nodiscard]] std::size_t position() const { return pos_; }

 private:
  std::size_t pos_;
};

class Expression {
 public:
  static Expression parse(const std::string& text) {
    Parser p{text};
    auto root = p.expr();
    p.skip();
    if (p.pos != text.size()) throw ExpressionError("unexpected '" + std::string(1, text[p.pos]) + "'", p.pos);
    return Expression(text, std::move(root));
  }

  [[nodiscard]] double operator()(double x, double y) const { return root_->eval(x, y); }
  [[nodiscard]] const std::string& text() const { return text_; }

 private:
  struct Node {
    virtual ~Node() = default;
    [[nodiscard]] virtual double eval(double x, double y) const = 0;
  };
  using Ptr = std::shared_ptr<const Node>;

  struct Constant : Node {
    double v;
    explicit Constant(double value) : v(value) {}
    double eval(double, double) const override { return v; }
  };
  struct VarX : Node {
    double eval(double x, double) const override { return x; }
  };
  struct VarY : Node {
    double eval(double, double y) const override { return y; }
  };
  struct Unary : Node {
    char op;
    Ptr a;
    Unary(char o, Ptr arg) : op(o), a(std::move(arg)) {}
    double eval(double x, double y) const override {
      const double v = a->eval(x, y);
      switch (op) {
        case '-': return -v;
        case 's': return std::sin(v);
        case 'c': return std::cos(v);
        default: return std::exp(v);
      }
    }
  };
  struct Binary : Node {
    char op;
    Ptr a, b;
    Binary(char o, Ptr l, Ptr r) : op(o), a(std::move(l)), b(std::move(r)) {}
    double eval(double x, double y) const override {
      const double l = a->eval(x, y), r = b->eval(x, y);
      switch (op) {
        case '+': return l + r;
        case '-': return l - r;
        case '*': return l * r;
        case '/': return l / r;
        default: return std::pow(l, r);
      }
    }
  };

  struct Parser {
    const std::string& s;
    std::size_t pos = 0;

    void skip() {
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    bool accept(char c) {
      skip();
      if (pos < s.size() && s[pos] == c) {
        ++pos;
        return true;
      }
      return false;
    }
    void expect(char c) {
      if (!accept(c)) throw ExpressionError(std::string("expected '") + c + "'", pos);
    }

    Ptr expr() {
      Ptr lhs = term();
      while (true) {
        if (accept('+')) lhs = std::make_shared<Binary>('+', lhs, term());
        else if (accept('-')) lhs = std::make_shared<Binary>('-', lhs, term());
        else return lhs;
      }
    }
    Ptr term() {
      Ptr lhs = unary();
      while (true) {
        if (accept('*')) lhs = std::make_shared<Binary>('*', lhs, unary());
        else if (accept('/')) lhs = std::make_shared<Binary>('/', lhs, unary());
        else return lhs;
      }
    }
    Ptr unary() {
      if (accept('-')) return std::make_shared<Unary>('-', unary());
      if (accept('+')) return unary();
      return power();
    }
    Ptr power() {
      Ptr base = primary();
      if (accept('^')) return std::make_shared<Binary>('^', base, unary());
      return base;
    }
    Ptr primary() {
      skip();
      if (pos >= s.size()) throw ExpressionError("unexpected end of expression", pos);
      const char c = s[pos];
      if (c == '(') {
        ++pos;
        Ptr e = expr();
        expect(')');
        return e;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
      if (std::isalpha(static_cast<unsigned char>(c))) {
        const std::size_t start = pos;
        while (pos < s.size() && std::isalnum(static_cast<unsigned char>(s[pos]))) ++pos;
        const std::string id = s.substr(start, pos - start);
        if (id == "x") return std::make_shared<VarX>();
        if (id == "y") return std::make_shared<VarY>();
        if (id == "pi") return std::make_shared<Constant>(3.14159265358979323846);
        if (id == "e") return std::make_shared<Constant>(2.71828182845904523536);
        if (id == "sin" || id == "cos" || id == "exp") {
          expect('(');
          Ptr arg = expr();
          expect(')');
          return std::make_shared<Unary>(id == "sin" ? 's' : id == "cos" ? 'c' : 'e', arg);
        }
        throw ExpressionError("unknown identifier '" + id + "'", start);
      }
      throw ExpressionError("unexpected '" + std::string(1, c) + "'", pos);
    }
    Ptr number() {
      const char* begin = s.c_str() + pos;
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin) throw ExpressionError("malformed number", pos);
      pos += static_cast<std::size_t>(end - begin);
      return std::make_shared<Constant>(v);
    }
  };

  Expression(std::string text, Ptr root) : text_(std::move(text)), root_(std::move(root)) {}

  std::string text_;
  Ptr root_;
};

}  // namespace lsi
