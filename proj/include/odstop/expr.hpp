#pragma once

// One-variable expression language: parser, printer, evaluator, one-sided
// branch limits and a compiled form for hot loops.

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"

namespace odstop::expr {

enum class NodeKind { Constant, Named, Variable, Negate, Add, Sub, Mul, Div, Pow, Call, If, Compare };
enum class Func { Exp, Ln, Sqrt, Abs, Min, Max, Pow };
enum class CmpOp { Lt, Le, Gt, Ge, Eq };

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  NodeKind kind = NodeKind::Constant;
  double value = 0.0;   // Constant, Named
  std::string name;     // Named
  Func func = Func::Exp;
  CmpOp cmp = CmpOp::Lt;
  std::vector<NodePtr> args;
  std::size_t pos = 0;  // offset in the source text
};

using Constants = std::map<std::string, double, std::less<>>;

/// Sorted, strictly increasing list of declared non-smooth points.
using Breakpoints = std::vector<double>;

namespace detail {

inline const char* func_name(Func f) {
  switch (f) {
    case Func::Exp: return "exp";
    case Func::Ln: return "ln";
    case Func::Sqrt: return "sqrt";
    case Func::Abs: return "abs";
    case Func::Min: return "min";
    case Func::Max: return "max";
    case Func::Pow: return "pow";
  }
  return "?";
}

inline const char* cmp_name(CmpOp c) {
  switch (c) {
    case CmpOp::Lt: return "<";
    case CmpOp::Le: return "<=";
    case CmpOp::Gt: return ">";
    case CmpOp::Ge: return ">=";
    case CmpOp::Eq: return "==";
  }
  return "?";
}

inline std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

inline NodePtr make(NodeKind kind, std::size_t pos, std::vector<NodePtr> args = {}) {
  auto n = std::make_shared<Node>();
  n->kind = kind;
  n->pos = pos;
  n->args = std::move(args);
  return n;
}

class Parser {
 public:
  Parser(std::string_view text, const Constants& constants) : text_(text), constants_(constants) {}

  NodePtr parse() {
    skip_ws();
    if (at_end()) fail_syntax("empty expression");
    NodePtr e = additive();
    skip_ws();
    if (!at_end()) fail_syntax(std::string("unexpected '") + text_[i_] + "'");
    return e;
  }

 private:
  std::string_view text_;
  const Constants& constants_;
  std::size_t i_ = 0;

  [[noreturn]] void fail_syntax(const std::string& msg) const {
    throw ExprError(ExprError::Kind::Syntax, i_, msg);
  }
  bool at_end() const { return i_ >= text_.size(); }
  void skip_ws() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(text_[i_]))) ++i_;
  }
  bool peek(char c) {
    skip_ws();
    return !at_end() && text_[i_] == c;
  }
  void expect(char c) {
    if (!peek(c)) fail_syntax(std::string("expected '") + c + "'");
    ++i_;
  }

  NodePtr additive() {
    NodePtr lhs = multiplicative();
    for (;;) {
      skip_ws();
      if (at_end()) return lhs;
      char c = text_[i_];
      if (c != '+' && c != '-') return lhs;
      std::size_t pos = i_++;
      NodePtr rhs = multiplicative();
      lhs = make(c == '+' ? NodeKind::Add : NodeKind::Sub, pos, {lhs, rhs});
    }
  }

  NodePtr multiplicative() {
    NodePtr lhs = unary();
    for (;;) {
      skip_ws();
      if (at_end()) return lhs;
      char c = text_[i_];
      if (c != '*' && c != '/') return lhs;
      std::size_t pos = i_++;
      NodePtr rhs = unary();
      lhs = make(c == '*' ? NodeKind::Mul : NodeKind::Div, pos, {lhs, rhs});
    }
  }

  NodePtr unary() {
    skip_ws();
    if (!at_end() && text_[i_] == '-') {
      std::size_t pos = i_++;
      return make(NodeKind::Negate, pos, {unary()});
    }
    if (!at_end() && text_[i_] == '+') {
      ++i_;
      return unary();
    }
    return power();
  }

  NodePtr power() {
    NodePtr base = primary();
    skip_ws();
    if (!at_end() && text_[i_] == '^') {
      std::size_t pos = i_++;
      NodePtr exponent = unary();  // right-associative, allows 2^-1
      return make(NodeKind::Pow, pos, {base, exponent});
    }
    return base;
  }

  NodePtr condition() {
    NodePtr lhs = additive();
    skip_ws();
    std::size_t pos = i_;
    CmpOp op;
    auto two = [&](char a, char b) {
      return i_ + 1 < text_.size() && text_[i_] == a && text_[i_ + 1] == b;
    };
    if (two('<', '=')) {
      op = CmpOp::Le;
      i_ += 2;
    } else if (two('>', '=')) {
      op = CmpOp::Ge;
      i_ += 2;
    } else if (two('=', '=')) {
      op = CmpOp::Eq;
      i_ += 2;
    } else if (!at_end() && text_[i_] == '<') {
      op = CmpOp::Lt;
      ++i_;
    } else if (!at_end() && text_[i_] == '>') {
      op = CmpOp::Gt;
      ++i_;
    } else {
      fail_syntax("expected comparison operator");
    }
    NodePtr rhs = additive();
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Compare;
    n->cmp = op;
    n->pos = pos;
    n->args = {lhs, rhs};
    return n;
  }

  NodePtr primary() {
    skip_ws();
    if (at_end()) fail_syntax("unexpected end of input");
    char c = text_[i_];
    if (c == '(') {
      ++i_;
      NodePtr e = additive();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    fail_syntax(std::string("unexpected '") + c + "'");
  }

  NodePtr number() {
    std::size_t start = i_;
    while (!at_end() && (std::isdigit(static_cast<unsigned char>(text_[i_])) || text_[i_] == '.')) ++i_;
    if (!at_end() && (text_[i_] == 'e' || text_[i_] == 'E')) {
      std::size_t save = i_;
      ++i_;
      if (!at_end() && (text_[i_] == '+' || text_[i_] == '-')) ++i_;
      if (at_end() || !std::isdigit(static_cast<unsigned char>(text_[i_]))) {
        i_ = save;
      } else {
        while (!at_end() && std::isdigit(static_cast<unsigned char>(text_[i_]))) ++i_;
      }
    }
    double v = 0.0;
    auto res = std::from_chars(text_.data() + start, text_.data() + i_, v);
    if (res.ec != std::errc() || res.ptr != text_.data() + i_) {
      i_ = start;
      fail_syntax("malformed number");
    }
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Constant;
    n->value = v;
    n->pos = start;
    return n;
  }

  NodePtr identifier() {
    std::size_t start = i_;
    while (!at_end() && (std::isalnum(static_cast<unsigned char>(text_[i_])) || text_[i_] == '_')) ++i_;
    std::string id(text_.substr(start, i_ - start));
    if (peek('(')) {
      ++i_;
      return call(id, start);
    }
    if (id == "x") return make(NodeKind::Variable, start);
    auto it = constants_.find(id);
    if (it == constants_.end()) throw ExprError(ExprError::Kind::UnknownIdentifier, start, id);
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Named;
    n->name = id;
    n->value = it->second;
    n->pos = start;
    return n;
  }

  NodePtr call(const std::string& id, std::size_t pos) {
    if (id == "if" || id == "piecewise") {
      NodePtr cond = condition();
      expect(',');
      NodePtr a = additive();
      expect(',');
      NodePtr b = additive();
      if (peek(',')) throw ExprError(ExprError::Kind::Arity, pos, id + " takes 3 arguments");
      expect(')');
      return make(NodeKind::If, pos, {cond, a, b});
    }
    static const std::map<std::string, std::pair<Func, int>, std::less<>> funcs = {
        {"exp", {Func::Exp, 1}}, {"ln", {Func::Ln, 1}},   {"sqrt", {Func::Sqrt, 1}},
        {"abs", {Func::Abs, 1}}, {"min", {Func::Min, 2}}, {"max", {Func::Max, 2}},
        {"pow", {Func::Pow, 2}}};
    auto it = funcs.find(id);
    if (it == funcs.end()) throw ExprError(ExprError::Kind::UnknownIdentifier, pos, id);
    std::vector<NodePtr> args;
    if (!peek(')')) {
      args.push_back(additive());
      while (peek(',')) {
        ++i_;
        args.push_back(additive());
      }
    }
    expect(')');
    if (static_cast<int>(args.size()) != it->second.second)
      throw ExprError(ExprError::Kind::Arity, pos,
                      id + " takes " + std::to_string(it->second.second) + " argument(s), got " +
                          std::to_string(args.size()));
    auto n = make(NodeKind::Call, pos, std::move(args));
    const_cast<Node&>(*n).func = it->second.first;
    return n;
  }
};

inline void print(const Node& n, std::string& out) {
  auto bin = [&](const char* op) {
    out += '(';
    print(*n.args[0], out);
    out += ' ';
    out += op;
    out += ' ';
    print(*n.args[1], out);
    out += ')';
  };
  switch (n.kind) {
    case NodeKind::Constant:
      if (std::signbit(n.value)) {
        out += "(-" + format_double(-n.value) + ")";
      } else {
        out += format_double(n.value);
      }
      return;
    case NodeKind::Named: out += n.name; return;
    case NodeKind::Variable: out += 'x'; return;
    case NodeKind::Negate:
      out += "(-";
      print(*n.args[0], out);
      out += ')';
      return;
    case NodeKind::Add: bin("+"); return;
    case NodeKind::Sub: bin("-"); return;
    case NodeKind::Mul: bin("*"); return;
    case NodeKind::Div: bin("/"); return;
    case NodeKind::Pow: bin("^"); return;
    case NodeKind::Compare: {
      print(*n.args[0], out);
      out += ' ';
      out += cmp_name(n.cmp);
      out += ' ';
      print(*n.args[1], out);
      return;
    }
    case NodeKind::Call: {
      out += func_name(n.func);
      out += '(';
      for (std::size_t k = 0; k < n.args.size(); ++k) {
        if (k) out += ", ";
        print(*n.args[k], out);
      }
      out += ')';
      return;
    }
    case NodeKind::If: {
      out += "if(";
      print(*n.args[0], out);
      out += ", ";
      print(*n.args[1], out);
      out += ", ";
      print(*n.args[2], out);
      out += ')';
      return;
    }
  }
}

[[noreturn]] inline void domain_fail(const Node& n, const std::string& what) {
  std::string s;
  print(n, s);
  throw ExprError(ExprError::Kind::Domain, n.pos, what + " in " + s);
}

inline double checked(const Node& n, double v) {
  if (!std::isfinite(v)) domain_fail(n, "non-finite result");
  return v;
}

inline bool compare(CmpOp op, double a, double b) {
  switch (op) {
    case CmpOp::Lt: return a < b;
    case CmpOp::Le: return a <= b;
    case CmpOp::Gt: return a > b;
    case CmpOp::Ge: return a >= b;
    case CmpOp::Eq: return a == b;
  }
  return false;
}

inline double eval(const Node& n, double x);

inline bool eval_cond(const Node& n, double x) {
  return compare(n.cmp, eval(*n.args[0], x), eval(*n.args[1], x));
}

inline double eval(const Node& n, double x) {
  switch (n.kind) {
    case NodeKind::Constant:
    case NodeKind::Named: return n.value;
    case NodeKind::Variable: return x;
    case NodeKind::Negate: return -eval(*n.args[0], x);
    case NodeKind::Add: return checked(n, eval(*n.args[0], x) + eval(*n.args[1], x));
    case NodeKind::Sub: return checked(n, eval(*n.args[0], x) - eval(*n.args[1], x));
    case NodeKind::Mul: return checked(n, eval(*n.args[0], x) * eval(*n.args[1], x));
    case NodeKind::Div: {
      double a = eval(*n.args[0], x);
      double b = eval(*n.args[1], x);
      if (b == 0.0) domain_fail(n, "division by zero");
      return checked(n, a / b);
    }
    case NodeKind::Pow: return checked(n, std::pow(eval(*n.args[0], x), eval(*n.args[1], x)));
    case NodeKind::Call: {
      double a = eval(*n.args[0], x);
      switch (n.func) {
        case Func::Exp: return checked(n, std::exp(a));
        case Func::Ln:
          if (!(a > 0.0)) domain_fail(n, "ln of non-positive argument");
          return std::log(a);
        case Func::Sqrt:
          if (a < 0.0) domain_fail(n, "sqrt of negative argument");
          return std::sqrt(a);
        case Func::Abs: return std::fabs(a);
        case Func::Min: return std::fmin(a, eval(*n.args[1], x));
        case Func::Max: return std::fmax(a, eval(*n.args[1], x));
        case Func::Pow: return checked(n, std::pow(a, eval(*n.args[1], x)));
      }
      return 0.0;
    }
    case NodeKind::If: return eval_cond(*n.args[0], x) ? eval(*n.args[1], x) : eval(*n.args[2], x);
    case NodeKind::Compare: return eval_cond(n, x) ? 1.0 : 0.0;
  }
  return 0.0;
}

/// Value and first derivative.
struct Dual {
  double v;
  double d;
};

/// Sign used to break a tie a == b when approaching from `side` (-1 left, +1 right).
inline int tie_sign(const Dual& a, const Dual& b, int side) {
  double dd = (a.d - b.d) * side;
  return dd > 0 ? 1 : (dd < 0 ? -1 : 0);
}

inline Dual eval_dual(const Node& n, double x, int side);

inline bool cond_dual(const Node& n, double x, int side) {
  Dual a = eval_dual(*n.args[0], x, side);
  Dual b = eval_dual(*n.args[1], x, side);
  if (side != 0 && a.v == b.v) {
    int s = tie_sign(a, b, side);
    if (s != 0) {
      switch (n.cmp) {
        case CmpOp::Lt:
        case CmpOp::Le: return s < 0;
        case CmpOp::Gt:
        case CmpOp::Ge: return s > 0;
        case CmpOp::Eq: return false;
      }
    }
  }
  return compare(n.cmp, a.v, b.v);
}

inline Dual eval_dual(const Node& n, double x, int side) {
  switch (n.kind) {
    case NodeKind::Constant:
    case NodeKind::Named: return {n.value, 0.0};
    case NodeKind::Variable: return {x, 1.0};
    case NodeKind::Negate: {
      Dual a = eval_dual(*n.args[0], x, side);
      return {-a.v, -a.d};
    }
    case NodeKind::Add:
    case NodeKind::Sub:
    case NodeKind::Mul:
    case NodeKind::Div:
    case NodeKind::Pow: {
      Dual a = eval_dual(*n.args[0], x, side);
      Dual b = eval_dual(*n.args[1], x, side);
      Dual r{};
      if (n.kind == NodeKind::Add) r = {a.v + b.v, a.d + b.d};
      else if (n.kind == NodeKind::Sub) r = {a.v - b.v, a.d - b.d};
      else if (n.kind == NodeKind::Mul) r = {a.v * b.v, a.d * b.v + a.v * b.d};
      else if (n.kind == NodeKind::Div) {
        if (b.v == 0.0) domain_fail(n, "division by zero");
        r = {a.v / b.v, (a.d * b.v - a.v * b.d) / (b.v * b.v)};
      } else {
        double p = std::pow(a.v, b.v);
        double d = 0.0;
        if (a.d != 0.0) d += b.v * std::pow(a.v, b.v - 1.0) * a.d;
        if (b.d != 0.0) d += p * std::log(a.v) * b.d;
        r = {p, d};
      }
      checked(n, r.v);
      return r;
    }
    case NodeKind::Call: {
      Dual a = eval_dual(*n.args[0], x, side);
      switch (n.func) {
        case Func::Exp: {
          double e = checked(n, std::exp(a.v));
          return {e, e * a.d};
        }
        case Func::Ln:
          if (!(a.v > 0.0)) domain_fail(n, "ln of non-positive argument");
          return {std::log(a.v), a.d / a.v};
        case Func::Sqrt: {
          if (a.v < 0.0) domain_fail(n, "sqrt of negative argument");
          double s = std::sqrt(a.v);
          return {s, s > 0.0 ? a.d / (2.0 * s) : (a.d == 0.0 ? 0.0 : HUGE_VAL)};
        }
        case Func::Abs: {
          int s = a.v > 0 ? 1 : (a.v < 0 ? -1 : (side * a.d > 0 ? 1 : (side * a.d < 0 ? -1 : 0)));
          return {std::fabs(a.v), s * a.d};
        }
        case Func::Min:
        case Func::Max: {
          Dual b = eval_dual(*n.args[1], x, side);
          bool a_less = a.v < b.v || (a.v == b.v && tie_sign(a, b, side) < 0);
          bool pick_a = (n.func == Func::Min) ? a_less : !a_less;
          if (a.v == b.v && tie_sign(a, b, side) == 0) pick_a = true;
          return pick_a ? a : b;
        }
        case Func::Pow: {
          Dual b = eval_dual(*n.args[1], x, side);
          double p = checked(n, std::pow(a.v, b.v));
          double d = 0.0;
          if (a.d != 0.0) d += b.v * std::pow(a.v, b.v - 1.0) * a.d;
          if (b.d != 0.0) d += p * std::log(a.v) * b.d;
          return {p, d};
        }
      }
      return {0.0, 0.0};
    }
    case NodeKind::If:
      return cond_dual(*n.args[0], x, side) ? eval_dual(*n.args[1], x, side)
                                           : eval_dual(*n.args[2], x, side);
    case NodeKind::Compare: return {cond_dual(n, x, side) ? 1.0 : 0.0, 0.0};
  }
  return {0.0, 0.0};
}

inline bool depends_on_x(const Node& n) {
  if (n.kind == NodeKind::Variable) return true;
  for (const auto& a : n.args)
    if (depends_on_x(*a)) return true;
  return false;
}

inline bool equal(const Node& a, const Node& b) {
  if (a.kind != b.kind || a.args.size() != b.args.size()) return false;
  switch (a.kind) {
    case NodeKind::Constant:
      if (!(a.value == b.value)) return false;
      break;
    case NodeKind::Named:
      if (a.name != b.name || !(a.value == b.value)) return false;
      break;
    case NodeKind::Call:
      if (a.func != b.func) return false;
      break;
    case NodeKind::Compare:
      if (a.cmp != b.cmp) return false;
      break;
    default: break;
  }
  for (std::size_t k = 0; k < a.args.size(); ++k)
    if (!equal(*a.args[k], *b.args[k])) return false;
  return true;
}

}  // namespace detail

/// Limits of an expression approaching x0 from each side, plus its value.
struct OneSided {
  double left;
  double right;
  double value;
};

/// Immutable parsed expression of the single variable x.
class Expr {
 public:
  Expr() : Expr(constant(0.0)) {}

  static Expr parse(std::string_view text, const Constants& constants = {}) {
    detail::Parser p(text, constants);
    return Expr(p.parse());
  }

  static Expr constant(double v) {
    auto n = std::make_shared<Node>();
    n->kind = NodeKind::Constant;
    n->value = v;
    return Expr(n);
  }

  double operator()(double x) const { return detail::eval(*root_, x); }
  double eval(double x) const { return detail::eval(*root_, x); }

  /// Value and derivative; side = -1/+1 picks the branch active just left/right of x.
  detail::Dual eval_dual(double x, int side = 0) const { return detail::eval_dual(*root_, x, side); }

  /// One-sided derivative of the branch active on `side` of x.
  double derivative(double x, int side) const { return detail::eval_dual(*root_, x, side).d; }

  std::string str() const {
    std::string s;
    detail::print(*root_, s);
    return s;
  }

  const Node& root() const { return *root_; }
  NodePtr root_ptr() const { return root_; }
  bool depends_on_x() const { return detail::depends_on_x(*root_); }

  friend bool structurally_equal(const Expr& a, const Expr& b) { return detail::equal(*a.root_, *b.root_); }

 private:
  explicit Expr(NodePtr root) : root_(std::move(root)) {}
  NodePtr root_;
};

inline Expr parse(std::string_view text, const Constants& constants = {}) {
  return Expr::parse(text, constants);
}

inline double eval(const Expr& e, double x) { return e.eval(x); }

inline bool is_breakpoint(const Breakpoints& bp, double x0) {
  for (double b : bp)
    if (b == x0) return true;
  return false;
}

/// Branch-based limits at x0. At a non-breakpoint all three coincide.
inline OneSided one_sided_limits(const Expr& e, const Breakpoints& bp, double x0) {
  double value = e.eval(x0);
  if (!is_breakpoint(bp, x0)) return {value, value, value};
  return {e.eval_dual(x0, -1).v, e.eval_dual(x0, +1).v, value};
}

/// Flat postfix program for fast repeated evaluation. Subtrees that do not
/// depend on x are folded to constants.
class Compiled {
 public:
  Compiled() = default;

  explicit Compiled(const Expr& e) : source_(e.root_ptr()) {
    emit(*source_);
    int depth = 0;
    int max_depth = 0;
    for (const auto& ins : code_) {
      depth += stack_effect(ins.op);
      max_depth = std::max(max_depth, depth);
    }
    fallback_ = max_depth > kStack;
    if (code_.size() == 1 && code_[0].op == Op::Const) {
      is_constant_ = true;
      constant_ = code_[0].c;
    }
  }

  bool is_constant() const { return is_constant_; }

  double operator()(double x) const {
    if (is_constant_) return constant_;
    if (fallback_) return detail::eval(*source_, x);
    std::array<double, kStack> st;
    int sp = 0;
    const std::size_t n = code_.size();
    for (std::size_t pc = 0; pc < n; ++pc) {
      const Ins& ins = code_[pc];
      switch (ins.op) {
        case Op::Const: st[sp++] = ins.c; break;
        case Op::X: st[sp++] = x; break;
        case Op::Neg: st[sp - 1] = -st[sp - 1]; break;
        case Op::Add: --sp; st[sp - 1] = st[sp - 1] + st[sp]; break;
        case Op::Sub: --sp; st[sp - 1] = st[sp - 1] - st[sp]; break;
        case Op::Mul: --sp; st[sp - 1] = st[sp - 1] * st[sp]; break;
        case Op::Div:
          --sp;
          if (st[sp] == 0.0) detail::domain_fail(*ins.node, "division by zero");
          st[sp - 1] = st[sp - 1] / st[sp];
          break;
        case Op::Pow: --sp; st[sp - 1] = std::pow(st[sp - 1], st[sp]); break;
        case Op::Exp: st[sp - 1] = std::exp(st[sp - 1]); break;
        case Op::Ln:
          if (!(st[sp - 1] > 0.0)) detail::domain_fail(*ins.node, "ln of non-positive argument");
          st[sp - 1] = std::log(st[sp - 1]);
          break;
        case Op::Sqrt:
          if (st[sp - 1] < 0.0) detail::domain_fail(*ins.node, "sqrt of negative argument");
          st[sp - 1] = std::sqrt(st[sp - 1]);
          break;
        case Op::Abs: st[sp - 1] = std::fabs(st[sp - 1]); break;
        case Op::Min: --sp; st[sp - 1] = std::fmin(st[sp - 1], st[sp]); break;
        case Op::Max: --sp; st[sp - 1] = std::fmax(st[sp - 1], st[sp]); break;
        case Op::Cmp:
          --sp;
          st[sp - 1] = detail::compare(ins.cmp, st[sp - 1], st[sp]) ? 1.0 : 0.0;
          break;
        case Op::JumpIfFalse:
          --sp;
          if (st[sp] == 0.0) pc = static_cast<std::size_t>(ins.target) - 1;
          break;
        case Op::Jump: pc = static_cast<std::size_t>(ins.target) - 1; break;
      }
    }
    double v = st[0];
    if (!std::isfinite(v)) detail::domain_fail(*source_, "non-finite result");
    return v;
  }

 private:
  enum class Op { Const, X, Neg, Add, Sub, Mul, Div, Pow, Exp, Ln, Sqrt, Abs, Min, Max, Cmp, JumpIfFalse, Jump };
  struct Ins {
    Op op;
    double c = 0.0;
    CmpOp cmp = CmpOp::Lt;
    int target = 0;
    const Node* node = nullptr;
  };
  static constexpr int kStack = 64;

  static int stack_effect(Op op) {
    switch (op) {
      case Op::Const:
      case Op::X: return 1;
      case Op::Add:
      case Op::Sub:
      case Op::Mul:
      case Op::Div:
      case Op::Pow:
      case Op::Min:
      case Op::Max:
      case Op::Cmp:
      case Op::JumpIfFalse: return -1;
      default: return 0;
    }
  }

  void emit(const Node& n) {
    if (!detail::depends_on_x(n) && n.kind != NodeKind::Compare) {
      try {
        double v = detail::eval(n, 0.0);
        code_.push_back({Op::Const, v, CmpOp::Lt, 0, &n});
        return;
      } catch (const ExprError&) {
        // keep the subtree so the error surfaces at evaluation time
      }
    }
    auto push = [&](Op op) { code_.push_back({op, 0.0, CmpOp::Lt, 0, &n}); };
    switch (n.kind) {
      case NodeKind::Constant:
      case NodeKind::Named: code_.push_back({Op::Const, n.value, CmpOp::Lt, 0, &n}); return;
      case NodeKind::Variable: push(Op::X); return;
      case NodeKind::Negate: emit(*n.args[0]); push(Op::Neg); return;
      case NodeKind::Add: emit(*n.args[0]); emit(*n.args[1]); push(Op::Add); return;
      case NodeKind::Sub: emit(*n.args[0]); emit(*n.args[1]); push(Op::Sub); return;
      case NodeKind::Mul: emit(*n.args[0]); emit(*n.args[1]); push(Op::Mul); return;
      case NodeKind::Div: emit(*n.args[0]); emit(*n.args[1]); push(Op::Div); return;
      case NodeKind::Pow: emit(*n.args[0]); emit(*n.args[1]); push(Op::Pow); return;
      case NodeKind::Call: {
        for (const auto& a : n.args) emit(*a);
        static constexpr Op ops[] = {Op::Exp, Op::Ln, Op::Sqrt, Op::Abs, Op::Min, Op::Max, Op::Pow};
        push(ops[static_cast<int>(n.func)]);
        return;
      }
      case NodeKind::Compare: {
        emit(*n.args[0]);
        emit(*n.args[1]);
        code_.push_back({Op::Cmp, 0.0, n.cmp, 0, &n});
        return;
      }
      case NodeKind::If: {
        emit(*n.args[0]);
        std::size_t jf = code_.size();
        push(Op::JumpIfFalse);
        emit(*n.args[1]);
        std::size_t j = code_.size();
        push(Op::Jump);
        code_[jf].target = static_cast<int>(code_.size());
        emit(*n.args[2]);
        code_[j].target = static_cast<int>(code_.size());
        return;
      }
    }
  }

  NodePtr source_;
  std::vector<Ins> code_;
  bool fallback_ = false;
  bool is_constant_ = false;
  double constant_ = 0.0;
};

}  // namespace odstop::expr
