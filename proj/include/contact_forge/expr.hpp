#pragma once

// Arithmetic expression language used for every coefficient function.
//
//   expr   := term (("+"|"-") term)*
//   term   := factor (("*"|"/") factor)*
//   factor := unary ("^" factor)?
//   unary  := "-" unary | atom
//   atom   := NUMBER | IDENT | IDENT "(" expr ")" | "(" expr ")"
//
// Unary minus binds tighter than the base of "^", so "-x^2" is (-x)^2.

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "contact_forge/dual.hpp"
#include "contact_forge/errors.hpp"

namespace cforge {

enum class NodeKind { Number, Symbol, Pi, Neg, Add, Sub, Mul, Div, Pow, Call };
enum class Func { Sin, Cos, Tan, Exp, Ln, Sqrt, Abs };

inline constexpr std::array<std::pair<std::string_view, Func>, 7> kFunctions{{
    {"sin", Func::Sin},
    {"cos", Func::Cos},
    {"tan", Func::Tan},
    {"exp", Func::Exp},
    {"ln", Func::Ln},
    {"sqrt", Func::Sqrt},
    {"abs", Func::Abs},
}};

inline std::optional<Func> function_by_name(std::string_view name) {
  for (const auto& [n, f] : kFunctions)
    if (n == name) return f;
  return std::nullopt;
}

inline std::string_view function_name(Func f) {
  for (const auto& [n, g] : kFunctions)
    if (g == f) return n;
  return "?";
}

inline bool is_reserved_name(std::string_view name) {
  return name == "pi" || function_by_name(name).has_value();
}

constexpr bool is_ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
constexpr bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }

inline bool is_identifier(std::string_view s) {
  if (s.empty() || !is_ident_start(s[0])) return false;
  for (char c : s)
    if (!is_ident_char(c)) return false;
  return true;
}

struct ExprNode {
  NodeKind kind{};
  double number = 0.0;
  std::string name;
  Func func = Func::Sin;
  std::shared_ptr<const ExprNode> lhs;
  std::shared_ptr<const ExprNode> rhs;
};

// Immutable expression tree with value semantics (nodes are shared).
class Expr {
 public:
  Expr() : Expr(number(0.0)) {}

  static Expr number(double v) { return make({NodeKind::Number, v, {}, Func::Sin, nullptr, nullptr}); }
  static Expr symbol(std::string name) {
    return make({NodeKind::Symbol, 0.0, std::move(name), Func::Sin, nullptr, nullptr});
  }
  static Expr pi() { return make({NodeKind::Pi, 0.0, {}, Func::Sin, nullptr, nullptr}); }
  static Expr call(Func f, const Expr& arg) {
    return make({NodeKind::Call, 0.0, {}, f, arg.node_, nullptr});
  }
  static Expr binary(NodeKind k, const Expr& a, const Expr& b) {
    return make({k, 0.0, {}, Func::Sin, a.node_, b.node_});
  }
  static Expr pow(const Expr& a, const Expr& b) { return binary(NodeKind::Pow, a, b); }

  friend Expr operator-(const Expr& a) { return make({NodeKind::Neg, 0.0, {}, Func::Sin, a.node_, nullptr}); }
  friend Expr operator+(const Expr& a, const Expr& b) { return binary(NodeKind::Add, a, b); }
  friend Expr operator-(const Expr& a, const Expr& b) { return binary(NodeKind::Sub, a, b); }
  friend Expr operator*(const Expr& a, const Expr& b) { return binary(NodeKind::Mul, a, b); }
  friend Expr operator/(const Expr& a, const Expr& b) { return binary(NodeKind::Div, a, b); }

  NodeKind kind() const { return node_->kind; }
  double value() const { return node_->number; }
  const std::string& name() const { return node_->name; }
  Func func() const { return node_->func; }
  Expr lhs() const { return Expr(node_->lhs); }
  Expr rhs() const { return Expr(node_->rhs); }
  const ExprNode& node() const { return *node_; }
  const std::shared_ptr<const ExprNode>& node_ptr() const { return node_; }

  friend bool operator==(const Expr& a, const Expr& b) { return equal(a.node_.get(), b.node_.get()); }

  explicit Expr(std::shared_ptr<const ExprNode> n) : node_(std::move(n)) {}

 private:
  static Expr make(ExprNode n) { return Expr(std::make_shared<const ExprNode>(std::move(n))); }

  static bool equal(const ExprNode* a, const ExprNode* b) {
    if (a == b) return true;
    if (!a || !b || a->kind != b->kind) return false;
    switch (a->kind) {
      case NodeKind::Number:
        return a->number == b->number;
      case NodeKind::Symbol:
        return a->name == b->name;
      case NodeKind::Pi:
        return true;
      case NodeKind::Neg:
        return equal(a->lhs.get(), b->lhs.get());
      case NodeKind::Call:
        return a->func == b->func && equal(a->lhs.get(), b->lhs.get());
      default:
        return equal(a->lhs.get(), b->lhs.get()) && equal(a->rhs.get(), b->rhs.get());
    }
  }

  std::shared_ptr<const ExprNode> node_;
};

// ---------------------------------------------------------------------------
// Printing

namespace detail {

inline int precedence(const ExprNode& n) {
  switch (n.kind) {
    case NodeKind::Add:
    case NodeKind::Sub:
      return 1;
    case NodeKind::Mul:
    case NodeKind::Div:
      return 2;
    case NodeKind::Pow:
      return 3;
    case NodeKind::Neg:
      return 4;
    case NodeKind::Number:
      return n.number < 0 || std::signbit(n.number) ? 5 : 6;
    default:
      return 6;
  }
}

inline std::string format_number(double v) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), end);
}

inline void print_node(const ExprNode& n, std::string& out);

inline void print_child(const ExprNode& child, bool parens, std::string& out) {
  if (parens) out += '(';
  print_node(child, out);
  if (parens) out += ')';
}

inline void print_node(const ExprNode& n, std::string& out) {
  switch (n.kind) {
    case NodeKind::Number:
      if (std::signbit(n.number)) {
        out += "(-" + format_number(-n.number) + ")";
      } else {
        out += format_number(n.number);
      }
      return;
    case NodeKind::Symbol:
      out += n.name;
      return;
    case NodeKind::Pi:
      out += "pi";
      return;
    case NodeKind::Neg:
      out += '-';
      print_child(*n.lhs, precedence(*n.lhs) < 4, out);
      return;
    case NodeKind::Call:
      out += function_name(n.func);
      out += '(';
      print_node(*n.lhs, out);
      out += ')';
      return;
    case NodeKind::Add:
    case NodeKind::Sub:
      print_child(*n.lhs, precedence(*n.lhs) < 1, out);
      out += n.kind == NodeKind::Add ? " + " : " - ";
      print_child(*n.rhs, precedence(*n.rhs) <= 1, out);
      return;
    case NodeKind::Mul:
    case NodeKind::Div:
      print_child(*n.lhs, precedence(*n.lhs) < 2, out);
      out += n.kind == NodeKind::Mul ? "*" : "/";
      print_child(*n.rhs, precedence(*n.rhs) <= 2, out);
      return;
    case NodeKind::Pow:
      print_child(*n.lhs, precedence(*n.lhs) < 4, out);
      out += '^';
      print_child(*n.rhs, precedence(*n.rhs) < 3, out);
      return;
  }
}

}  // namespace detail

inline std::string to_string(const Expr& e) {
  std::string out;
  detail::print_node(e.node(), out);
  return out;
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

enum class TokKind { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, End };

struct Token {
  TokKind kind;
  std::size_t offset;
  std::string_view text;
  double number = 0.0;
};

inline std::string describe(const Token& t) {
  if (t.kind == TokKind::End) return "end of input";
  return "'" + std::string(t.text) + "'";
}

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) { advance(); }

  Expr parse_all() {
    Expr e = parse_expr();
    if (tok_.kind != TokKind::End) {
      fail({"'+'", "'-'", "'*'", "'/'", "'^'", "end of input"});
    }
    return e;
  }

 private:
  [[noreturn]] void fail(std::vector<std::string> expected) const {
    throw ParseError(tok_.offset, std::move(expected), describe(tok_));
  }

  void advance() {
    std::size_t i = pos_;
    while (i < text_.size() && (text_[i] == ' ' || text_[i] == '\t' || text_[i] == '\n' || text_[i] == '\r'))
      ++i;
    if (i >= text_.size()) {
      tok_ = {TokKind::End, text_.size(), {}};
      pos_ = i;
      return;
    }
    char c = text_[i];
    auto single = [&](TokKind k) {
      tok_ = {k, i, text_.substr(i, 1)};
      pos_ = i + 1;
    };
    switch (c) {
      case '+': return single(TokKind::Plus);
      case '-': return single(TokKind::Minus);
      case '*': return single(TokKind::Star);
      case '/': return single(TokKind::Slash);
      case '^': return single(TokKind::Caret);
      case '(': return single(TokKind::LParen);
      case ')': return single(TokKind::RParen);
      default: break;
    }
    auto digit = [](char ch) { return ch >= '0' && ch <= '9'; };
    if (digit(c) || (c == '.' && i + 1 < text_.size() && digit(text_[i + 1]))) {
      std::size_t j = i;
      while (j < text_.size() && digit(text_[j])) ++j;
      if (j < text_.size() && text_[j] == '.') {
        ++j;
        while (j < text_.size() && digit(text_[j])) ++j;
      }
      if (j < text_.size() && (text_[j] == 'e' || text_[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < text_.size() && (text_[k] == '+' || text_[k] == '-')) ++k;
        if (k < text_.size() && digit(text_[k])) {
          while (k < text_.size() && digit(text_[k])) ++k;
          j = k;
        }
      }
      double v = 0.0;
      auto res = std::from_chars(text_.data() + i, text_.data() + j, v);
      if (res.ec != std::errc{} && res.ec != std::errc::result_out_of_range) {
        tok_ = {TokKind::End, i, text_.substr(i, j - i)};
        fail({"number"});
      }
      tok_ = {TokKind::Number, i, text_.substr(i, j - i), v};
      pos_ = j;
      return;
    }
    if (is_ident_start(c)) {
      std::size_t j = i;
      while (j < text_.size() && is_ident_char(text_[j])) ++j;
      tok_ = {TokKind::Ident, i, text_.substr(i, j - i)};
      pos_ = j;
      return;
    }
    tok_ = {TokKind::End, i, text_.substr(i, 1)};
    throw ParseError(i, {"number", "identifier", "'('", "'-'", "operator"}, "'" + std::string(1, c) + "'");
  }

  Expr parse_expr() {
    Expr e = parse_term();
    while (tok_.kind == TokKind::Plus || tok_.kind == TokKind::Minus) {
      NodeKind k = tok_.kind == TokKind::Plus ? NodeKind::Add : NodeKind::Sub;
      advance();
      e = Expr::binary(k, e, parse_term());
    }
    return e;
  }

  Expr parse_term() {
    Expr e = parse_factor();
    while (tok_.kind == TokKind::Star || tok_.kind == TokKind::Slash) {
      NodeKind k = tok_.kind == TokKind::Star ? NodeKind::Mul : NodeKind::Div;
      advance();
      e = Expr::binary(k, e, parse_factor());
    }
    return e;
  }

  Expr parse_factor() {
    Expr base = parse_unary();
    if (tok_.kind == TokKind::Caret) {
      advance();
      return Expr::pow(base, parse_factor());
    }
    return base;
  }

  Expr parse_unary() {
    if (tok_.kind == TokKind::Minus) {
      advance();
      return -parse_unary();
    }
    return parse_atom();
  }

  Expr parse_atom() {
    switch (tok_.kind) {
      case TokKind::Number: {
        double v = tok_.number;
        advance();
        return Expr::number(v);
      }
      case TokKind::LParen: {
        advance();
        Expr e = parse_expr();
        if (tok_.kind != TokKind::RParen) fail({"')'", "operator"});
        advance();
        return e;
      }
      case TokKind::Ident: {
        std::string name(tok_.text);
        std::size_t at = tok_.offset;
        advance();
        if (tok_.kind == TokKind::LParen) {
          auto f = function_by_name(name);
          if (!f) throw UnknownFunction(name, at);
          advance();
          Expr arg = parse_expr();
          if (tok_.kind != TokKind::RParen) fail({"')'", "operator"});
          advance();
          return Expr::call(*f, arg);
        }
        if (function_by_name(name)) fail({"'('"});
        if (name == "pi") return Expr::pi();
        return Expr::symbol(std::move(name));
      }
      default:
        fail({"number", "identifier", "'('", "'-'"});
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  Token tok_{TokKind::End, 0, {}};
};

}  // namespace detail

inline Expr parse(std::string_view text) {
  if (text.find_first_not_of(" \t\r\n") == std::string_view::npos)
    throw ParseError(text.size(), {"expression"}, "end of input");
  return detail::Parser(text).parse_all();
}

inline void collect_symbols(const ExprNode& n, std::set<std::string>& out) {
  if (n.kind == NodeKind::Symbol) out.insert(n.name);
  if (n.lhs) collect_symbols(*n.lhs, out);
  if (n.rhs) collect_symbols(*n.rhs, out);
}

inline std::set<std::string> symbols(const Expr& e) {
  std::set<std::string> out;
  collect_symbols(e.node(), out);
  return out;
}

// ---------------------------------------------------------------------------
// Compiled evaluation

// Postfix program with symbols resolved to slot indices. Evaluates over
// double or any nesting of Dual.
class Program {
 public:
  Program(const Expr& e, std::span<const std::string> slots) : root_(e) {
    compile(e.node(), slots);
    int depth = 0;
    for (const auto& ins : code_) {
      depth += stack_effect(ins.op);
      max_depth_ = std::max(max_depth_, depth);
    }
  }

  const Expr& expr() const { return root_; }
  const std::set<int>& slots_used() const { return used_; }

  template <class T>
  T run(std::span<const T> x) const {
    std::vector<T> st;
    st.reserve(static_cast<std::size_t>(max_depth_));
    for (const auto& ins : code_) {
      switch (ins.op) {
        case Op::Const:
          st.emplace_back(ins.value);
          continue;
        case Op::Load:
          st.push_back(x[static_cast<std::size_t>(ins.index)]);
          continue;
        default:
          break;
      }
      if (is_unary(ins.op)) {
        T& a = st.back();
        a = apply_unary(ins, a);
        check_finite(ins, a);
      } else {
        T b = st.back();
        st.pop_back();
        T& a = st.back();
        a = apply_binary(ins, a, b);
        check_finite(ins, a);
      }
    }
    return st.back();
  }

 private:
  enum class Op : std::uint8_t { Const, Load, Neg, Add, Sub, Mul, Div, PowInt, Pow, Sin, Cos, Tan, Exp, Ln, Sqrt, Abs };

  struct Instr {
    Op op;
    int index = 0;
    double value = 0.0;
    const ExprNode* origin = nullptr;
  };

  static int stack_effect(Op op) {
    if (op == Op::Const || op == Op::Load) return 1;
    if (is_unary(op)) return 0;
    return -1;
  }
  static bool is_unary(Op op) {
    return op == Op::Neg || op == Op::PowInt || (op >= Op::Sin && op <= Op::Abs);
  }

  static std::string text_of(const ExprNode* n) {
    std::string s;
    detail::print_node(*n, s);
    return s;
  }

  template <class T>
  static void check_finite(const Instr& ins, const T& v) {
    if (!std::isfinite(primal(v))) throw DomainError("non-finite result", text_of(ins.origin));
  }

  template <class T>
  static T apply_unary(const Instr& ins, const T& a) {
    using std::abs;
    using std::cos;
    using std::exp;
    using std::log;
    using std::sin;
    using std::sqrt;
    using std::tan;
    const double p = primal(a);
    switch (ins.op) {
      case Op::Neg:
        return -a;
      case Op::PowInt:
        if (p == 0.0 && ins.index < 0) throw DomainError("zero raised to a negative power", text_of(ins.origin));
        return ipow(a, ins.index);
      case Op::Sin:
        return sin(a);
      case Op::Cos:
        return cos(a);
      case Op::Tan:
        return tan(a);
      case Op::Exp:
        return exp(a);
      case Op::Ln:
        if (!(p > 0.0)) throw DomainError("logarithm of a non-positive value", text_of(ins.origin));
        return log(a);
      case Op::Sqrt:
        if (p < 0.0) throw DomainError("square root of a negative value", text_of(ins.origin));
        if (p == 0.0 && is_dual_v<T>) throw DomainError("square root is not differentiable at 0", text_of(ins.origin));
        return sqrt(a);
      case Op::Abs:
        return abs(a);
      default:
        return a;
    }
  }

  template <class T>
  static T apply_binary(const Instr& ins, const T& a, const T& b) {
    using std::exp;
    using std::log;
    switch (ins.op) {
      case Op::Add:
        return a + b;
      case Op::Sub:
        return a - b;
      case Op::Mul:
        return a * b;
      case Op::Div:
        if (primal(b) == 0.0) throw DomainError("division by zero", text_of(ins.origin));
        return a / b;
      case Op::Pow: {
        const double base = primal(a);
        const double ex = primal(b);
        if (base > 0.0) return exp(b * log(a));
        const bool integral = std::floor(ex) == ex && std::abs(ex) < 1e9;
        // Non-positive base: only integer exponents are real-valued. The
        // exponent is treated as locally constant there.
        if (integral) {
          if (base == 0.0 && ex < 0) throw DomainError("zero raised to a negative power", text_of(ins.origin));
          return ipow(a, static_cast<long>(ex));
        }
        if (base == 0.0 && ex > 0.0 && !is_dual_v<T>) return T(0.0);
        throw DomainError("non-integer power of a non-positive base", text_of(ins.origin));
      }
      default:
        return a;
    }
  }

  void compile(const ExprNode& n, std::span<const std::string> slots) {
    switch (n.kind) {
      case NodeKind::Number:
        code_.push_back({Op::Const, 0, n.number, &n});
        return;
      case NodeKind::Pi:
        code_.push_back({Op::Const, 0, std::numbers::pi, &n});
        return;
      case NodeKind::Symbol: {
        for (std::size_t i = 0; i < slots.size(); ++i) {
          if (slots[i] == n.name) {
            code_.push_back({Op::Load, static_cast<int>(i), 0.0, &n});
            used_.insert(static_cast<int>(i));
            return;
          }
        }
        throw UnboundSymbol(n.name);
      }
      case NodeKind::Neg:
        compile(*n.lhs, slots);
        code_.push_back({Op::Neg, 0, 0.0, &n});
        return;
      case NodeKind::Call: {
        compile(*n.lhs, slots);
        static constexpr Op ops[] = {Op::Sin, Op::Cos, Op::Tan, Op::Exp, Op::Ln, Op::Sqrt, Op::Abs};
        code_.push_back({ops[static_cast<int>(n.func)], 0, 0.0, &n});
        return;
      }
      case NodeKind::Pow: {
        compile(*n.lhs, slots);
        const ExprNode& ex = *n.rhs;
        std::optional<double> lit;
        if (ex.kind == NodeKind::Number) lit = ex.number;
        if (ex.kind == NodeKind::Neg && ex.lhs->kind == NodeKind::Number) lit = -ex.lhs->number;
        if (lit && std::floor(*lit) == *lit && std::abs(*lit) <= 64) {
          code_.push_back({Op::PowInt, static_cast<int>(*lit), 0.0, &n});
          return;
        }
        compile(ex, slots);
        code_.push_back({Op::Pow, 0, 0.0, &n});
        return;
      }
      default: {
        compile(*n.lhs, slots);
        compile(*n.rhs, slots);
        Op op = n.kind == NodeKind::Add   ? Op::Add
                : n.kind == NodeKind::Sub ? Op::Sub
                : n.kind == NodeKind::Mul ? Op::Mul
                                          : Op::Div;
        code_.push_back({op, 0, 0.0, &n});
        return;
      }
    }
  }

  Expr root_;
  std::vector<Instr> code_;
  std::set<int> used_;
  int max_depth_ = 0;
};

// ---------------------------------------------------------------------------
// Environment-based evaluation

struct Environment {
  std::map<std::string, double> values;
  // Direction for evaluate_dual; coordinates not listed have seed 0.
  std::optional<std::map<std::string, double>> seed;
};

inline double evaluate(const Expr& e, const Environment& env) {
  std::vector<std::string> names;
  std::vector<double> x;
  for (const auto& [k, v] : env.values) {
    names.push_back(k);
    x.push_back(v);
  }
  Program prog(e, names);
  return prog.run<double>(x);
}

inline DualValue evaluate_dual(const Expr& e, const Environment& env) {
  if (!env.seed) throw std::invalid_argument("evaluate_dual requires a seed direction");
  std::vector<std::string> names;
  std::vector<DualValue> x;
  for (const auto& [k, v] : env.values) {
    names.push_back(k);
    auto it = env.seed->find(k);
    x.emplace_back(v, it == env.seed->end() ? 0.0 : it->second);
  }
  for (const auto& [k, v] : *env.seed) {
    if (!env.values.contains(k)) throw UnboundSymbol(k);
  }
  Program prog(e, names);
  return prog.run<DualValue>(x);
}

}  // namespace cforge
