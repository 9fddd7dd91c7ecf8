#pragma once

// Charts, scalar fields, vector fields, differential forms and smooth maps,
// with the exterior-calculus operations evaluated through dual numbers.
//
// Scalar fields are immutable DAGs. Every node evaluates over double and
// over up to three nested dual levels, so a coefficient built from two
// exterior derivatives (or a derivative of a pullback) is still exact.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "contact_forge/dual.hpp"
#include "contact_forge/errors.hpp"
#include "contact_forge/expr.hpp"

namespace cforge {

inline constexpr int kMaxChartDim = 9;

using Point = std::vector<double>;
using Vector = std::vector<double>;

// ---------------------------------------------------------------------------
// Chart

class Chart {
 public:
  using DomainPredicate = std::function<bool(std::span<const double>)>;

  Chart(std::string name, std::vector<std::string> coordinates, std::vector<bool> periodic = {},
        DomainPredicate domain = {})
      : name_(std::move(name)),
        coordinates_(std::move(coordinates)),
        periodic_(std::move(periodic)),
        domain_(std::move(domain)) {
    if (coordinates_.empty()) throw std::invalid_argument("chart '" + name_ + "' has no coordinates");
    if (static_cast<int>(coordinates_.size()) > kMaxChartDim)
      throw DimensionLimit("chart '" + name_ + "' has dimension " + std::to_string(coordinates_.size()) +
                           " above the supported maximum of " + std::to_string(kMaxChartDim));
    for (std::size_t i = 0; i < coordinates_.size(); ++i) {
      const auto& c = coordinates_[i];
      if (!is_identifier(c) || is_reserved_name(c))
        throw std::invalid_argument("invalid coordinate name '" + c + "'");
      for (std::size_t j = 0; j < i; ++j)
        if (coordinates_[j] == c) throw std::invalid_argument("duplicate coordinate name '" + c + "'");
    }
    if (periodic_.empty()) periodic_.assign(coordinates_.size(), false);
    if (periodic_.size() != coordinates_.size())
      throw std::invalid_argument("periodic flags do not match chart dimension");
  }

  const std::string& name() const { return name_; }
  int dim() const { return static_cast<int>(coordinates_.size()); }
  const std::vector<std::string>& coordinates() const { return coordinates_; }
  bool periodic(int i) const { return periodic_[static_cast<std::size_t>(i)]; }
  bool has_domain() const { return static_cast<bool>(domain_); }
  bool contains(std::span<const double> p) const { return !domain_ || domain_(p); }

  std::optional<int> index_of(std::string_view coordinate) const {
    for (std::size_t i = 0; i < coordinates_.size(); ++i)
      if (coordinates_[i] == coordinate) return static_cast<int>(i);
    return std::nullopt;
  }
  int require_index(std::string_view coordinate) const {
    auto i = index_of(coordinate);
    if (!i) throw UnboundSymbol(std::string(coordinate));
    return *i;
  }

  friend bool operator==(const Chart& a, const Chart& b) {
    return a.name_ == b.name_ && a.coordinates_ == b.coordinates_;
  }

 private:
  std::string name_;
  std::vector<std::string> coordinates_;
  std::vector<bool> periodic_;
  DomainPredicate domain_;
};

using ChartPtr = std::shared_ptr<const Chart>;

inline ChartPtr make_chart(std::string name, std::vector<std::string> coordinates, std::vector<bool> periodic = {},
                           Chart::DomainPredicate domain = {}) {
  return std::make_shared<const Chart>(std::move(name), std::move(coordinates), std::move(periodic),
                                       std::move(domain));
}

inline void require_same_chart(const ChartPtr& a, const ChartPtr& b, std::string_view what) {
  if (a != b && !(*a == *b))
    throw ChartMismatch(std::string(what) + ": chart '" + a->name() + "' does not match chart '" + b->name() + "'");
}

// Product chart; domain is the conjunction of the factors' domains.
inline ChartPtr product_chart(const ChartPtr& a, const ChartPtr& b, std::string name = {}) {
  std::vector<std::string> coords = a->coordinates();
  coords.insert(coords.end(), b->coordinates().begin(), b->coordinates().end());
  std::vector<bool> periodic;
  for (int i = 0; i < a->dim(); ++i) periodic.push_back(a->periodic(i));
  for (int i = 0; i < b->dim(); ++i) periodic.push_back(b->periodic(i));
  Chart::DomainPredicate domain;
  if (a->has_domain() || b->has_domain()) {
    const auto da = static_cast<std::size_t>(a->dim());
    domain = [a, b, da](std::span<const double> p) {
      return a->contains(p.subspan(0, da)) && b->contains(p.subspan(da));
    };
  }
  if (name.empty()) name = a->name() + "*" + b->name();
  return make_chart(std::move(name), std::move(coords), std::move(periodic), std::move(domain));
}

// ---------------------------------------------------------------------------
// Strictly increasing multi-index, stored as a coordinate bit set.

class MultiIndex {
 public:
  constexpr MultiIndex() = default;
  explicit constexpr MultiIndex(std::uint32_t mask) : mask_(mask) {}

  static MultiIndex of(std::initializer_list<int> indices) { return of(std::span<const int>(indices.begin(), indices.size())); }
  static MultiIndex of(std::span<const int> indices) {
    std::uint32_t m = 0;
    int prev = -1;
    for (int i : indices) {
      if (i <= prev || i < 0 || i >= 32) throw std::invalid_argument("multi-index must be strictly increasing");
      m |= 1u << i;
      prev = i;
    }
    return MultiIndex(m);
  }

  constexpr std::uint32_t mask() const { return mask_; }
  constexpr int size() const { return std::popcount(mask_); }
  constexpr bool contains(int i) const { return (mask_ >> i) & 1u; }
  std::vector<int> indices() const {
    std::vector<int> out;
    for (int i = 0; i < 32; ++i)
      if (contains(i)) out.push_back(i);
    return out;
  }
  friend constexpr auto operator<=>(MultiIndex, MultiIndex) = default;

 private:
  std::uint32_t mask_ = 0;
};

namespace detail {

inline std::uint32_t all_bits(int dim) { return dim >= 32 ? ~0u : ((1u << dim) - 1u); }

// Number of set bits of m strictly below bit i.
inline int count_below(std::uint32_t m, int i) { return std::popcount(m & ((1u << i) - 1u)); }

// Sign of the permutation sorting the concatenation (I, J) of disjoint sets.
inline int shuffle_sign(std::uint32_t I, std::uint32_t J) {
  int inversions = 0;
  for (int j = 0; j < 32; ++j)
    if ((J >> j) & 1u) inversions += std::popcount(I & ~((2u << j) - 1u));
  return inversions % 2 ? -1 : 1;
}

// Division-free determinant (Laplace expansion with memoisation over column
// subsets); exact in every dual component.
template <class T>
T determinant(const std::vector<T>& m, int k) {
  if (k == 0) return T(1.0);
  if (k == 1) return m[0];
  if (k == 2) return m[0] * m[3] - m[1] * m[2];
  std::vector<T> f(std::size_t{1} << k, T(0.0));
  f[0] = T(1.0);
  for (std::uint32_t mask = 1; mask < (1u << k); ++mask) {
    const int row = std::popcount(mask) - 1;
    T acc(0.0);
    int pos = 0;
    for (int c = 0; c < k; ++c) {
      if (!((mask >> c) & 1u)) continue;
      T term = m[static_cast<std::size_t>(row * k + c)] * f[mask & ~(1u << c)];
      if ((row + pos) % 2) acc = acc - term;
      else acc = acc + term;
      ++pos;
    }
    f[mask] = acc;
  }
  return f.back();
}

// ---------------------------------------------------------------------------
// Field nodes

class FieldNode {
 public:
  explicit FieldNode(std::uint32_t deps) : deps_(deps) {}
  virtual ~FieldNode() = default;
  FieldNode(const FieldNode&) = delete;
  FieldNode& operator=(const FieldNode&) = delete;

  virtual double eval(std::span<const double> x) const = 0;
  virtual D1 eval(std::span<const D1> x) const = 0;
  virtual D2 eval(std::span<const D2> x) const = 0;
  virtual D3 eval(std::span<const D3> x) const = 0;
  virtual std::optional<double> constant_value() const { return std::nullopt; }

  // Coordinates the node may depend on; a partial derivative along any
  // other coordinate is identically zero.
  std::uint32_t deps() const { return deps_; }

 private:
  std::uint32_t deps_;
};

using NodePtr = std::shared_ptr<const FieldNode>;

template <class Derived>
class FieldNodeBase : public FieldNode {
 public:
  using FieldNode::FieldNode;
  double eval(std::span<const double> x) const override { return self().template apply<double>(x); }
  D1 eval(std::span<const D1> x) const override { return self().template apply<D1>(x); }
  D2 eval(std::span<const D2> x) const override { return self().template apply<D2>(x); }
  D3 eval(std::span<const D3> x) const override { return self().template apply<D3>(x); }

 private:
  const Derived& self() const { return static_cast<const Derived&>(*this); }
};

class ConstantNode final : public FieldNodeBase<ConstantNode> {
 public:
  explicit ConstantNode(double c) : FieldNodeBase(0u), c_(c) {}
  template <class T>
  T apply(std::span<const T>) const {
    return T(c_);
  }
  std::optional<double> constant_value() const override { return c_; }

 private:
  double c_;
};

class ExprFieldNode final : public FieldNodeBase<ExprFieldNode> {
 public:
  static std::shared_ptr<const ExprFieldNode> make(const Expr& e, std::span<const std::string> coords) {
    Program p(e, coords);
    std::uint32_t deps = 0;
    for (int i : p.slots_used()) deps |= 1u << i;
    return std::shared_ptr<const ExprFieldNode>(new ExprFieldNode(std::move(p), deps));
  }
  template <class T>
  T apply(std::span<const T> x) const {
    return program_.run<T>(x);
  }
  const Expr& expr() const { return program_.expr(); }

 private:
  ExprFieldNode(Program p, std::uint32_t deps) : FieldNodeBase(deps), program_(std::move(p)) {}
  Program program_;
};

template <class F>
class NativeNode final : public FieldNodeBase<NativeNode<F>> {
 public:
  NativeNode(F fn, std::uint32_t deps) : FieldNodeBase<NativeNode<F>>(deps), fn_(std::move(fn)) {}
  template <class T>
  T apply(std::span<const T> x) const {
    return fn_(x);
  }

 private:
  F fn_;
};

class SumNode final : public FieldNodeBase<SumNode> {
 public:
  SumNode(std::vector<std::pair<double, NodePtr>> terms, double offset, std::uint32_t deps)
      : FieldNodeBase(deps), terms_(std::move(terms)), offset_(offset) {}
  template <class T>
  T apply(std::span<const T> x) const {
    T acc(offset_);
    for (const auto& [c, n] : terms_) {
      if (c == 1.0) acc = acc + n->eval(x);
      else acc = acc + c * n->eval(x);
    }
    return acc;
  }

 private:
  std::vector<std::pair<double, NodePtr>> terms_;
  double offset_;
};

class ProductNode final : public FieldNodeBase<ProductNode> {
 public:
  ProductNode(NodePtr a, NodePtr b) : FieldNodeBase(a->deps() | b->deps()), a_(std::move(a)), b_(std::move(b)) {}
  template <class T>
  T apply(std::span<const T> x) const {
    return a_->eval(x) * b_->eval(x);
  }

 private:
  NodePtr a_, b_;
};

class QuotientNode final : public FieldNodeBase<QuotientNode> {
 public:
  QuotientNode(NodePtr a, NodePtr b) : FieldNodeBase(a->deps() | b->deps()), a_(std::move(a)), b_(std::move(b)) {}
  template <class T>
  T apply(std::span<const T> x) const {
    T d = b_->eval(x);
    if (primal(d) == 0.0) throw DomainError("division by a vanishing field");
    return a_->eval(x) / d;
  }

 private:
  NodePtr a_, b_;
};

class PartialNode final : public FieldNodeBase<PartialNode> {
 public:
  PartialNode(NodePtr inner, int index) : FieldNodeBase(inner->deps()), inner_(std::move(inner)), index_(index) {}
  template <class T>
  T apply(std::span<const T> x) const {
    if constexpr (std::is_same_v<T, D3>) {
      throw DerivativeDepthExceeded();
    } else {
      std::vector<Dual<T>> seeded;
      seeded.reserve(x.size());
      for (std::size_t k = 0; k < x.size(); ++k)
        seeded.emplace_back(x[k], static_cast<int>(k) == index_ ? T(1.0) : T(0.0));
      return inner_->eval(std::span<const Dual<T>>(seeded)).derivative;
    }
  }

 private:
  NodePtr inner_;
  int index_;
};

// f(m_1(x), ..., m_k(x))
class ComposeNode final : public FieldNodeBase<ComposeNode> {
 public:
  ComposeNode(NodePtr outer, std::vector<NodePtr> inner)
      : FieldNodeBase(compose_deps(*outer, inner)), outer_(std::move(outer)), inner_(std::move(inner)) {}
  template <class T>
  T apply(std::span<const T> x) const {
    std::vector<T> y(inner_.size(), T(0.0));
    const std::uint32_t used = outer_->deps();
    for (std::size_t j = 0; j < inner_.size(); ++j)
      if ((used >> j) & 1u) y[j] = inner_[j]->eval(x);
    return outer_->eval(std::span<const T>(y));
  }

 private:
  static std::uint32_t compose_deps(const FieldNode& outer, const std::vector<NodePtr>& inner) {
    std::uint32_t d = 0;
    for (std::size_t j = 0; j < inner.size(); ++j)
      if ((outer.deps() >> j) & 1u) d |= inner[j]->deps();
    return d;
  }
  NodePtr outer_;
  std::vector<NodePtr> inner_;
};

// Re-binds a field to a larger chart: inner slot k reads outer coordinate map[k].
class ReindexNode final : public FieldNodeBase<ReindexNode> {
 public:
  ReindexNode(NodePtr inner, std::vector<int> map)
      : FieldNodeBase(reindex_deps(*inner, map)), inner_(std::move(inner)), map_(std::move(map)) {}
  template <class T>
  T apply(std::span<const T> x) const {
    std::vector<T> y;
    y.reserve(map_.size());
    for (int k : map_) y.push_back(x[static_cast<std::size_t>(k)]);
    return inner_->eval(std::span<const T>(y));
  }

 private:
  static std::uint32_t reindex_deps(const FieldNode& inner, const std::vector<int>& map) {
    std::uint32_t d = 0;
    for (std::size_t k = 0; k < map.size(); ++k)
      if ((inner.deps() >> k) & 1u) d |= 1u << map[k];
    return d;
  }
  NodePtr inner_;
  std::vector<int> map_;
};

// One coefficient of a pulled-back form:
//   (m^* a)_J(x) = sum_I a_I(m(x)) * det(d m_I / d x_J).
class PullbackNode final : public FieldNodeBase<PullbackNode> {
 public:
  PullbackNode(std::vector<std::pair<std::uint32_t, NodePtr>> terms, std::vector<NodePtr> components,
               std::vector<int> source_cols, std::uint32_t deps)
      : FieldNodeBase(deps),
        terms_(std::move(terms)),
        components_(std::move(components)),
        cols_(std::move(source_cols)) {}

  template <class T>
  T apply(std::span<const T> x) const {
    if constexpr (std::is_same_v<T, D3>) {
      throw DerivativeDepthExceeded();
    } else {
      const int k = static_cast<int>(cols_.size());
      std::uint32_t rows = 0;
      for (const auto& t : terms_) rows |= t.first;
      std::uint32_t needed = rows;
      for (const auto& t : terms_) needed |= t.second->deps();

      std::vector<T> y(components_.size(), T(0.0));
      for (std::size_t j = 0; j < components_.size(); ++j)
        if ((needed >> j) & 1u) y[j] = components_[j]->eval(x);

      // jac[i][c] = d m_i / d x_{cols[c]}, only rows used by some term
      std::vector<std::vector<T>> jac(components_.size());
      for (std::size_t i = 0; i < components_.size(); ++i)
        if ((rows >> i) & 1u) jac[i].assign(static_cast<std::size_t>(k), T(0.0));
      std::vector<Dual<T>> seeded(x.size());
      for (int c = 0; c < k; ++c) {
        for (std::size_t s = 0; s < x.size(); ++s)
          seeded[s] = Dual<T>(x[s], static_cast<int>(s) == cols_[static_cast<std::size_t>(c)] ? T(1.0) : T(0.0));
        for (std::size_t i = 0; i < components_.size(); ++i) {
          if (!((rows >> i) & 1u)) continue;
          if (!((components_[i]->deps() >> cols_[static_cast<std::size_t>(c)]) & 1u)) continue;
          jac[i][static_cast<std::size_t>(c)] = components_[i]->eval(std::span<const Dual<T>>(seeded)).derivative;
        }
      }

      T acc(0.0);
      std::vector<T> minor(static_cast<std::size_t>(k * k), T(0.0));
      for (const auto& [I, a] : terms_) {
        int r = 0;
        for (int i = 0; i < 32; ++i) {
          if (!((I >> i) & 1u)) continue;
          for (int c = 0; c < k; ++c)
            minor[static_cast<std::size_t>(r * k + c)] = jac[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
          ++r;
        }
        acc = acc + a->eval(std::span<const T>(y)) * determinant(minor, k);
      }
      return acc;
    }
  }

 private:
  std::vector<std::pair<std::uint32_t, NodePtr>> terms_;
  std::vector<NodePtr> components_;
  std::vector<int> cols_;
};

inline NodePtr constant_node(double c) { return std::make_shared<const ConstantNode>(c); }
inline const NodePtr& zero_node() {
  static const NodePtr z = constant_node(0.0);
  return z;
}
inline bool is_zero(const NodePtr& n) {
  auto c = n->constant_value();
  return c && *c == 0.0;
}

inline NodePtr sum_nodes(const std::vector<std::pair<double, NodePtr>>& terms) {
  std::vector<std::pair<double, NodePtr>> kept;
  double offset = 0.0;
  std::uint32_t deps = 0;
  for (const auto& [c, n] : terms) {
    if (c == 0.0) continue;
    if (auto v = n->constant_value()) {
      offset += c * *v;
      continue;
    }
    kept.emplace_back(c, n);
    deps |= n->deps();
  }
  if (kept.empty()) return constant_node(offset);
  if (kept.size() == 1 && offset == 0.0 && kept[0].first == 1.0) return kept[0].second;
  return std::make_shared<const SumNode>(std::move(kept), offset, deps);
}

inline NodePtr product_nodes(const NodePtr& a, const NodePtr& b) {
  auto ca = a->constant_value();
  auto cb = b->constant_value();
  if ((ca && *ca == 0.0) || (cb && *cb == 0.0)) return zero_node();
  if (ca && cb) return constant_node(*ca * *cb);
  if (ca) return *ca == 1.0 ? b : sum_nodes({{*ca, b}});
  if (cb) return *cb == 1.0 ? a : sum_nodes({{*cb, a}});
  return std::make_shared<const ProductNode>(a, b);
}

inline NodePtr partial_node(const NodePtr& a, int i) {
  if (!((a->deps() >> i) & 1u)) return zero_node();
  return std::make_shared<const PartialNode>(a, i);
}

}  // namespace detail

class SmoothMap;

// ---------------------------------------------------------------------------
// ScalarField

class ScalarField {
 public:
  ScalarField(ChartPtr chart, detail::NodePtr node) : chart_(std::move(chart)), node_(std::move(node)) {}

  static ScalarField constant(ChartPtr chart, double c) { return {std::move(chart), detail::constant_node(c)}; }
  static ScalarField zero(ChartPtr chart) { return {std::move(chart), detail::zero_node()}; }
  static ScalarField coordinate(ChartPtr chart, int i) {
    return from_expr(chart, Expr::symbol(chart->coordinates().at(static_cast<std::size_t>(i))));
  }
  static ScalarField from_expr(ChartPtr chart, const Expr& e) {
    auto node = detail::ExprFieldNode::make(e, chart->coordinates());
    return {std::move(chart), std::move(node)};
  }
  static ScalarField parse(ChartPtr chart, std::string_view text) { return from_expr(std::move(chart), cforge::parse(text)); }

  // Native field from a generic callable `[]<class T>(std::span<const T> x) -> T`.
  // `deps` lists the coordinate indices the function reads (all by default).
  template <class F>
  static ScalarField native(ChartPtr chart, F fn, std::optional<std::vector<int>> deps = std::nullopt) {
    std::uint32_t mask = detail::all_bits(chart->dim());
    if (deps) {
      mask = 0;
      for (int i : *deps) mask |= 1u << i;
    }
    return {std::move(chart), std::make_shared<const detail::NativeNode<F>>(std::move(fn), mask)};
  }

  const ChartPtr& chart() const { return chart_; }
  const detail::NodePtr& node() const { return node_; }
  bool is_zero() const { return detail::is_zero(node_); }
  std::uint32_t dependencies() const { return node_->deps(); }

  double operator()(std::span<const double> x) const {
    check_arity(x.size());
    return node_->eval(x);
  }
  double operator()(std::initializer_list<double> x) const { return (*this)(std::span<const double>(x.begin(), x.size())); }

  template <class T>
  T evaluate(std::span<const T> x) const {
    check_arity(x.size());
    return node_->eval(x);
  }

  // Directional derivative along `seed` at `x`.
  DualValue evaluate_dual(std::span<const double> x, std::span<const double> seed) const {
    check_arity(x.size());
    check_arity(seed.size());
    std::vector<D1> d;
    for (std::size_t i = 0; i < x.size(); ++i) d.emplace_back(x[i], seed[i]);
    return node_->eval(std::span<const D1>(d));
  }

  std::vector<double> gradient(std::span<const double> x) const {
    std::vector<double> g(x.size(), 0.0);
    std::vector<double> e(x.size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!((node_->deps() >> i) & 1u)) continue;
      e[i] = 1.0;
      g[i] = evaluate_dual(x, e).derivative;
      e[i] = 0.0;
    }
    return g;
  }

  ScalarField partial(int i) const { return {chart_, detail::partial_node(node_, i)}; }

  // this ∘ m, a field on m's source chart.
  ScalarField compose(const SmoothMap& m) const;

  // Re-binds this field to a chart containing all of its coordinates by name.
  ScalarField embed(const ChartPtr& bigger) const {
    if (bigger == chart_ || *bigger == *chart_) return *this;
    std::vector<int> map;
    for (const auto& c : chart_->coordinates()) map.push_back(bigger->require_index(c));
    if (is_zero()) return zero(bigger);
    if (auto c = node_->constant_value()) return constant(bigger, *c);
    return {bigger, std::make_shared<const detail::ReindexNode>(node_, std::move(map))};
  }

  friend ScalarField operator+(const ScalarField& a, const ScalarField& b) {
    require_same_chart(a.chart_, b.chart_, "field sum");
    return {a.chart_, detail::sum_nodes({{1.0, a.node_}, {1.0, b.node_}})};
  }
  friend ScalarField operator-(const ScalarField& a, const ScalarField& b) {
    require_same_chart(a.chart_, b.chart_, "field difference");
    return {a.chart_, detail::sum_nodes({{1.0, a.node_}, {-1.0, b.node_}})};
  }
  friend ScalarField operator-(const ScalarField& a) { return {a.chart_, detail::sum_nodes({{-1.0, a.node_}})}; }
  friend ScalarField operator*(const ScalarField& a, const ScalarField& b) {
    require_same_chart(a.chart_, b.chart_, "field product");
    return {a.chart_, detail::product_nodes(a.node_, b.node_)};
  }
  friend ScalarField operator/(const ScalarField& a, const ScalarField& b) {
    require_same_chart(a.chart_, b.chart_, "field quotient");
    return {a.chart_, std::make_shared<const detail::QuotientNode>(a.node_, b.node_)};
  }
  friend ScalarField operator*(double c, const ScalarField& a) { return {a.chart_, detail::sum_nodes({{c, a.node_}})}; }
  friend ScalarField operator+(const ScalarField& a, double c) {
    return {a.chart_, detail::sum_nodes({{1.0, a.node_}, {c, detail::constant_node(1.0)}})};
  }

 private:
  void check_arity(std::size_t n) const {
    if (n != static_cast<std::size_t>(chart_->dim()))
      throw ArityMismatch("point has " + std::to_string(n) + " coordinates, chart '" + chart_->name() + "' has " +
                          std::to_string(chart_->dim()));
  }

  ChartPtr chart_;
  detail::NodePtr node_;
};

// ---------------------------------------------------------------------------
// VectorField

class VectorField {
 public:
  VectorField(ChartPtr chart, std::vector<ScalarField> components)
      : chart_(std::move(chart)), components_(std::move(components)) {
    if (static_cast<int>(components_.size()) != chart_->dim())
      throw ArityMismatch("vector field needs one component per coordinate of '" + chart_->name() + "'");
    for (const auto& c : components_) require_same_chart(chart_, c.chart(), "vector field component");
  }

  static VectorField parse(ChartPtr chart, const std::vector<std::string>& texts) {
    std::vector<ScalarField> comps;
    for (const auto& t : texts) comps.push_back(ScalarField::parse(chart, t));
    return {std::move(chart), std::move(comps)};
  }
  static VectorField coordinate(ChartPtr chart, int i) {
    std::vector<ScalarField> comps;
    for (int k = 0; k < chart->dim(); ++k) comps.push_back(ScalarField::constant(chart, k == i ? 1.0 : 0.0));
    return {std::move(chart), std::move(comps)};
  }

  const ChartPtr& chart() const { return chart_; }
  const std::vector<ScalarField>& components() const { return components_; }
  const ScalarField& operator[](int i) const { return components_[static_cast<std::size_t>(i)]; }

  Vector operator()(std::span<const double> x) const {
    Vector v;
    v.reserve(components_.size());
    for (const auto& c : components_) v.push_back(c(x));
    return v;
  }

  friend VectorField operator+(const VectorField& a, const VectorField& b) {
    require_same_chart(a.chart_, b.chart_, "vector field sum");
    std::vector<ScalarField> comps;
    for (std::size_t i = 0; i < a.components_.size(); ++i) comps.push_back(a.components_[i] + b.components_[i]);
    return {a.chart_, std::move(comps)};
  }
  friend VectorField operator*(const ScalarField& f, const VectorField& v) {
    std::vector<ScalarField> comps;
    for (const auto& c : v.components_) comps.push_back(f * c);
    return {v.chart_, std::move(comps)};
  }

 private:
  ChartPtr chart_;
  std::vector<ScalarField> components_;
};

// ---------------------------------------------------------------------------
// SmoothMap

class SmoothMap {
 public:
  SmoothMap(ChartPtr source, ChartPtr target, std::vector<ScalarField> components)
      : source_(std::move(source)), target_(std::move(target)), components_(std::move(components)) {
    if (static_cast<int>(components_.size()) != target_->dim())
      throw ArityMismatch("map needs one component per coordinate of '" + target_->name() + "'");
    for (const auto& c : components_) require_same_chart(source_, c.chart(), "map component");
  }

  static SmoothMap parse(ChartPtr source, ChartPtr target, const std::vector<std::string>& texts) {
    std::vector<ScalarField> comps;
    for (const auto& t : texts) comps.push_back(ScalarField::parse(source, t));
    return {std::move(source), std::move(target), std::move(comps)};
  }
  static SmoothMap identity(const ChartPtr& chart) {
    std::vector<ScalarField> comps;
    for (int i = 0; i < chart->dim(); ++i) comps.push_back(ScalarField::coordinate(chart, i));
    return {chart, chart, std::move(comps)};
  }

  const ChartPtr& source() const { return source_; }
  const ChartPtr& target() const { return target_; }
  const std::vector<ScalarField>& components() const { return components_; }

  Point operator()(std::span<const double> x) const {
    Point y;
    y.reserve(components_.size());
    for (const auto& c : components_) y.push_back(c(x));
    return y;
  }

  // Rows index target coordinates, columns source coordinates.
  Eigen::MatrixXd jacobian(std::span<const double> x) const {
    Eigen::MatrixXd J(target_->dim(), source_->dim());
    for (int i = 0; i < target_->dim(); ++i) {
      auto g = components_[static_cast<std::size_t>(i)].gradient(x);
      for (int j = 0; j < source_->dim(); ++j) J(i, j) = g[static_cast<std::size_t>(j)];
    }
    return J;
  }

  std::vector<detail::NodePtr> nodes() const {
    std::vector<detail::NodePtr> n;
    for (const auto& c : components_) n.push_back(c.node());
    return n;
  }

 private:
  ChartPtr source_;
  ChartPtr target_;
  std::vector<ScalarField> components_;
};

inline ScalarField ScalarField::compose(const SmoothMap& m) const {
  require_same_chart(chart_, m.target(), "composition");
  if (auto c = node_->constant_value()) return constant(m.source(), *c);
  return {m.source(), std::make_shared<const detail::ComposeNode>(node_, m.nodes())};
}

// outer ∘ inner
inline SmoothMap compose(const SmoothMap& outer, const SmoothMap& inner) {
  require_same_chart(outer.source(), inner.target(), "map composition");
  std::vector<ScalarField> comps;
  for (const auto& c : outer.components()) comps.push_back(c.compose(inner));
  return {inner.source(), outer.target(), std::move(comps)};
}

// ---------------------------------------------------------------------------
// KForm

class KForm {
 public:
  KForm(ChartPtr chart, int degree) : chart_(std::move(chart)), degree_(degree) {
    if (degree_ < 0 || degree_ > chart_->dim())
      throw DegreeOverflow("degree " + std::to_string(degree_) + " exceeds dimension of chart '" + chart_->name() + "'");
  }

  // Builds a form from (coordinate names, coefficient expression) pairs. Names
  // may come in any order; the antisymmetry sign is applied.
  static KForm from_terms(ChartPtr chart, int degree,
                          const std::vector<std::pair<std::vector<std::string>, std::string>>& terms) {
    KForm f(chart, degree);
    for (const auto& [names, text] : terms) {
      if (static_cast<int>(names.size()) != degree) throw ArityMismatch("term degree does not match form degree");
      std::vector<int> idx;
      for (const auto& n : names) idx.push_back(chart->require_index(n));
      int sign = 1;
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = i + 1; j < idx.size(); ++j) {
          if (idx[i] == idx[j]) goto next;  // repeated differential: zero
          if (idx[i] > idx[j]) sign = -sign;
        }
      {
        std::sort(idx.begin(), idx.end());
        f.add(MultiIndex::of(idx), static_cast<double>(sign) * ScalarField::parse(chart, text));
      }
    next:;
    }
    return f;
  }

  // Function as a 0-form.
  static KForm function(const ScalarField& f) {
    KForm k(f.chart(), 0);
    k.add(MultiIndex(0u), f);
    return k;
  }

  const ChartPtr& chart() const { return chart_; }
  int degree() const { return degree_; }
  const std::map<MultiIndex, ScalarField>& coefficients() const { return coeffs_; }

  ScalarField coefficient(MultiIndex I) const {
    auto it = coeffs_.find(I);
    return it == coeffs_.end() ? ScalarField::zero(chart_) : it->second;
  }

  void add(MultiIndex I, const ScalarField& f) {
    if (I.size() != degree_) throw ArityMismatch("multi-index size does not match form degree");
    if (I.mask() & ~detail::all_bits(chart_->dim())) throw ArityMismatch("multi-index outside chart");
    require_same_chart(chart_, f.chart(), "form coefficient");
    if (f.is_zero()) return;
    auto it = coeffs_.find(I);
    if (it == coeffs_.end()) {
      coeffs_.emplace(I, f);
      return;
    }
    ScalarField s = it->second + f;
    if (s.is_zero()) coeffs_.erase(it);
    else it->second = s;
  }

  // Coefficient values at a point, keyed by multi-index.
  std::map<MultiIndex, double> values_at(std::span<const double> x) const {
    std::map<MultiIndex, double> out;
    for (const auto& [I, f] : coeffs_) out[I] = f(x);
    return out;
  }

  KForm embed(const ChartPtr& bigger) const {
    KForm out(bigger, degree_);
    for (const auto& [I, f] : coeffs_) {
      std::vector<int> idx;
      for (int i : I.indices()) idx.push_back(bigger->require_index(chart_->coordinates()[static_cast<std::size_t>(i)]));
      int sign = 1;
      for (std::size_t a = 0; a < idx.size(); ++a)
        for (std::size_t b = a + 1; b < idx.size(); ++b)
          if (idx[a] > idx[b]) sign = -sign;
      std::sort(idx.begin(), idx.end());
      out.add(MultiIndex::of(idx), static_cast<double>(sign) * f.embed(bigger));
    }
    return out;
  }

  friend KForm operator+(const KForm& a, const KForm& b) {
    require_same_chart(a.chart_, b.chart_, "form sum");
    if (a.degree_ != b.degree_) throw DegreeOverflow("cannot add forms of different degree");
    KForm out = a;
    for (const auto& [I, f] : b.coeffs_) out.add(I, f);
    return out;
  }
  friend KForm operator-(const KForm& a) {
    KForm out(a.chart_, a.degree_);
    for (const auto& [I, f] : a.coeffs_) out.add(I, -f);
    return out;
  }
  friend KForm operator-(const KForm& a, const KForm& b) { return a + (-b); }
  friend KForm operator*(double c, const KForm& a) {
    KForm out(a.chart_, a.degree_);
    if (c == 0.0) return out;
    for (const auto& [I, f] : a.coeffs_) out.add(I, c * f);
    return out;
  }
  friend KForm operator*(const ScalarField& g, const KForm& a) {
    require_same_chart(g.chart(), a.chart_, "function times form");
    KForm out(a.chart_, a.degree_);
    for (const auto& [I, f] : a.coeffs_) out.add(I, g * f);
    return out;
  }

 private:
  ChartPtr chart_;
  int degree_;
  std::map<MultiIndex, ScalarField> coeffs_;
};

// ---------------------------------------------------------------------------
// Exterior calculus

inline KForm wedge(const KForm& a, const KForm& b) {
  require_same_chart(a.chart(), b.chart(), "wedge");
  const int k = a.degree() + b.degree();
  if (k > a.chart()->dim())
    throw DegreeOverflow("wedge of degrees " + std::to_string(a.degree()) + " and " + std::to_string(b.degree()) +
                         " exceeds chart dimension");
  // Terms are grouped by the unordered pair {I, J}; a group holds at most two
  // terms, whose sum is commutative in floating point. a∧b and b∧a therefore
  // agree bit for bit.
  std::map<MultiIndex, std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<std::pair<double, detail::NodePtr>>>>
      acc;
  for (const auto& [I, f] : a.coefficients())
    for (const auto& [J, g] : b.coefficients()) {
      if (I.mask() & J.mask()) continue;
      acc[MultiIndex(I.mask() | J.mask())][std::minmax(I.mask(), J.mask())].emplace_back(
          detail::shuffle_sign(I.mask(), J.mask()), detail::product_nodes(f.node(), g.node()));
    }
  KForm out(a.chart(), k);
  for (auto& [I, groups] : acc) {
    std::vector<std::pair<double, detail::NodePtr>> terms;
    for (auto& [key, group] : groups) terms.emplace_back(1.0, detail::sum_nodes(group));
    out.add(I, ScalarField(a.chart(), detail::sum_nodes(terms)));
  }
  return out;
}

// a ∧ a ∧ ... (n factors); n = 0 gives the constant 0-form 1.
inline KForm wedge_power(const KForm& a, int n) {
  KForm out = KForm::function(ScalarField::constant(a.chart(), 1.0));
  for (int i = 0; i < n; ++i) out = wedge(out, a);
  return out;
}

inline KForm exterior_derivative(const KForm& a) {
  const int dim = a.chart()->dim();
  if (a.degree() >= dim)
    throw DegreeOverflow("exterior derivative of a top-degree form on chart '" + a.chart()->name() + "'");
  std::map<MultiIndex, std::vector<std::pair<double, detail::NodePtr>>> acc;
  for (const auto& [I, f] : a.coefficients()) {
    for (int i = 0; i < dim; ++i) {
      if (I.contains(i) || !((f.dependencies() >> i) & 1u)) continue;
      // d(f dx_I) = sum_i df/dx_i dx_i ∧ dx_I
      const double sign = detail::count_below(I.mask(), i) % 2 ? -1.0 : 1.0;
      acc[MultiIndex(I.mask() | (1u << i))].emplace_back(sign, detail::partial_node(f.node(), i));
    }
  }
  KForm out(a.chart(), a.degree() + 1);
  for (auto& [I, terms] : acc) out.add(I, ScalarField(a.chart(), detail::sum_nodes(terms)));
  return out;
}

inline KForm interior_product(const VectorField& v, const KForm& a) {
  require_same_chart(v.chart(), a.chart(), "interior product");
  if (a.degree() < 1) throw DegreeOverflow("interior product of a 0-form");
  std::map<MultiIndex, std::vector<std::pair<double, detail::NodePtr>>> acc;
  for (const auto& [I, f] : a.coefficients()) {
    for (int i : I.indices()) {
      const ScalarField& vi = v[i];
      if (vi.is_zero()) continue;
      const double sign = detail::count_below(I.mask(), i) % 2 ? -1.0 : 1.0;
      acc[MultiIndex(I.mask() & ~(1u << i))].emplace_back(sign, detail::product_nodes(vi.node(), f.node()));
    }
  }
  KForm out(a.chart(), a.degree() - 1);
  for (auto& [I, terms] : acc) out.add(I, ScalarField(a.chart(), detail::sum_nodes(terms)));
  return out;
}

// Cartan: L_v a = ι_v da + d ι_v a.
inline KForm lie_derivative(const VectorField& v, const KForm& a) {
  require_same_chart(v.chart(), a.chart(), "Lie derivative");
  const int dim = a.chart()->dim();
  KForm out(a.chart(), a.degree());
  if (a.degree() < dim) out = out + interior_product(v, exterior_derivative(a));
  if (a.degree() >= 1) out = out + exterior_derivative(interior_product(v, a));
  return out;
}

inline KForm pullback(const SmoothMap& m, const KForm& a) {
  require_same_chart(m.target(), a.chart(), "pullback");
  const int k = a.degree();
  const ChartPtr& src = m.source();
  if (k > src->dim()) throw DegreeOverflow("pullback degree exceeds source dimension");
  KForm out(src, k);
  if (a.coefficients().empty()) return out;
  if (k == 0) {
    out.add(MultiIndex(0u), a.coefficient(MultiIndex(0u)).compose(m));
    return out;
  }
  std::vector<std::pair<std::uint32_t, detail::NodePtr>> terms;
  std::uint32_t deps = 0;
  for (const auto& [I, f] : a.coefficients()) terms.emplace_back(I.mask(), f.node());
  auto comps = m.nodes();
  for (const auto& c : comps) deps |= c->deps();
  for (std::uint32_t J = 0; J <= detail::all_bits(src->dim()); ++J) {
    if (std::popcount(J) != k) continue;
    std::vector<int> cols = MultiIndex(J).indices();
    // Skip columns no target row varies along.
    bool any = false;
    for (const auto& [I, f] : terms) {
      bool all_cols = true;
      for (int c : cols) {
        bool col_hit = false;
        for (int i = 0; i < 32; ++i)
          if (((I >> i) & 1u) && ((comps[static_cast<std::size_t>(i)]->deps() >> c) & 1u)) col_hit = true;
        if (!col_hit) all_cols = false;
      }
      if (all_cols) any = true;
    }
    if (!any) continue;
    out.add(MultiIndex(J), ScalarField(src, std::make_shared<const detail::PullbackNode>(terms, comps, cols, deps)));
  }
  return out;
}

// Full antisymmetric multilinear evaluation a_p(v_1, ..., v_k).
inline double evaluate_form(const KForm& a, std::span<const double> point, const std::vector<Vector>& vectors) {
  const int dim = a.chart()->dim();
  if (static_cast<int>(vectors.size()) != a.degree())
    throw ArityMismatch("form of degree " + std::to_string(a.degree()) + " evaluated on " +
                        std::to_string(vectors.size()) + " vectors");
  if (static_cast<int>(point.size()) != dim) throw ArityMismatch("point dimension does not match chart");
  for (const auto& v : vectors)
    if (static_cast<int>(v.size()) != dim) throw ArityMismatch("vector dimension does not match chart");
  if (!a.chart()->contains(point)) throw DomainError("point outside the domain of chart '" + a.chart()->name() + "'");
  const int k = a.degree();
  double total = 0.0;
  std::vector<double> minor(static_cast<std::size_t>(k * k));
  for (const auto& [I, f] : a.coefficients()) {
    int r = 0;
    for (int i : I.indices()) {
      for (int c = 0; c < k; ++c)
        minor[static_cast<std::size_t>(r * k + c)] = vectors[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)];
      ++r;
    }
    total += f(point) * detail::determinant(minor, k);
  }
  return total;
}

// Standard basis vector e_i of a chart.
inline Vector basis_vector(int dim, int i) {
  Vector e(static_cast<std::size_t>(dim), 0.0);
  e[static_cast<std::size_t>(i)] = 1.0;
  return e;
}

// Matrix of a 2-form at a point: M(i, j) = ω(e_i, e_j).
inline Eigen::MatrixXd two_form_matrix(const KForm& w, std::span<const double> x) {
  if (w.degree() != 2) throw DegreeOverflow("two_form_matrix expects a 2-form");
  const int dim = w.chart()->dim();
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(dim, dim);
  for (const auto& [I, f] : w.coefficients()) {
    auto idx = I.indices();
    const double v = f(x);
    M(idx[0], idx[1]) += v;
    M(idx[1], idx[0]) -= v;
  }
  return M;
}

// Components of a 1-form at a point.
inline Eigen::VectorXd one_form_vector(const KForm& a, std::span<const double> x) {
  if (a.degree() != 1) throw DegreeOverflow("one_form_vector expects a 1-form");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(a.chart()->dim());
  for (const auto& [I, f] : a.coefficients()) v(I.indices()[0]) = f(x);
  return v;
}

}  // namespace cforge
