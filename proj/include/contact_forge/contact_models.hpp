#pragma once

// Model contact forms, sample regions, and the pointwise solvers built on
// them: contact condition, Reeb field, conformal scaling, characteristic
// foliation and the Moser (Gray stability) field.

#include <cmath>
#include <limits>
#include <optional>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "contact_forge/geometry.hpp"
#include "contact_forge/report.hpp"

namespace cforge {

inline constexpr double kPolarMinRadius = 1e-3;
inline constexpr double kDefaultDelta = 0.1;

// ---------------------------------------------------------------------------
// Charts

inline ChartPtr polar_chart() {
  return make_chart("polar", {"r", "theta", "z"}, {false, true, false},
                    [](std::span<const double> x) { return x[0] > kPolarMinRadius; });
}

inline ChartPtr cartesian_chart() { return make_chart("cartesian", {"x", "y", "z"}); }

namespace detail {
inline std::vector<std::string> indexed(const std::string& base, int n) {
  std::vector<std::string> v;
  for (int j = 1; j <= n; ++j) v.push_back(base + std::to_string(j));
  return v;
}
inline void require_half_dim(int n) {
  if (n < 1) throw std::invalid_argument("n must be at least 1");
}
}  // namespace detail

// (q_1..q_n, p_1..p_n) on T*T^n; the q_j are angles.
inline ChartPtr cotangent_chart(int n) {
  detail::require_half_dim(n);
  auto coords = detail::indexed("q", n);
  auto p = detail::indexed("p", n);
  coords.insert(coords.end(), p.begin(), p.end());
  std::vector<bool> periodic(static_cast<std::size_t>(2 * n), false);
  for (int j = 0; j < n; ++j) periodic[static_cast<std::size_t>(j)] = true;
  return make_chart("cotangent" + std::to_string(n), coords, periodic);
}

// Standard contact space R^{2n+1}: (x, y, z) for n = 1, else (x_1..x_n, y_1..y_n, z).
inline ChartPtr darboux_chart(int n) {
  detail::require_half_dim(n);
  if (n == 1) return make_chart("darboux1", {"x", "y", "z"});
  auto coords = detail::indexed("x", n);
  auto y = detail::indexed("y", n);
  coords.insert(coords.end(), y.begin(), y.end());
  coords.push_back("z");
  return make_chart("darboux" + std::to_string(n), coords);
}

// (x, y, z; q_1..q_n, p_1..p_n), the space of the higher-dimensional Darboux chart.
inline ChartPtr darboux_cotangent_chart(int n) {
  detail::require_half_dim(n);
  std::vector<std::string> coords{"x", "y", "z"};
  auto q = detail::indexed("q", n);
  auto p = detail::indexed("p", n);
  coords.insert(coords.end(), q.begin(), q.end());
  coords.insert(coords.end(), p.begin(), p.end());
  return make_chart("darboux_cotangent" + std::to_string(n), coords);
}

// (r, theta, z; q, p) = polar chart times T*T^n.
inline ChartPtr polar_cotangent_chart(int n) {
  return product_chart(polar_chart(), cotangent_chart(n), "polar_cotangent" + std::to_string(n));
}

// (r, theta; s_1..s_n, t_1..t_n), the hypersurface chart.
inline ChartPtr sigma_chart(int n) {
  detail::require_half_dim(n);
  std::vector<std::string> coords{"r", "theta"};
  auto s = detail::indexed("s", n);
  auto t = detail::indexed("t", n);
  coords.insert(coords.end(), s.begin(), s.end());
  coords.insert(coords.end(), t.begin(), t.end());
  std::vector<bool> periodic(coords.size(), false);
  periodic[1] = true;
  return make_chart("sigma" + std::to_string(n), coords, periodic,
                    [](std::span<const double> x) { return x[0] > kPolarMinRadius; });
}

// ---------------------------------------------------------------------------
// Model forms

enum class Flavor { Native, Expression };
enum class AlphaChart { Polar, Cartesian };

namespace detail {

// cos(sqrt(u)) and sin(sqrt(u))/sqrt(u), with Taylor series near u = 0.
template <class T>
T cos_sqrt(const T& u) {
  using std::cos;
  using std::sqrt;
  if (primal(u) < 1e-2) {
    // 1 - u/2 + u^2/24 - u^3/720 + u^4/40320 - u^5/3628800
    return 1.0 + u * (-1.0 / 2 + u * (1.0 / 24 + u * (-1.0 / 720 + u * (1.0 / 40320 - u / 3628800.0))));
  }
  return cos(sqrt(u));
}
template <class T>
T sinc_sqrt(const T& u) {
  using std::sin;
  using std::sqrt;
  if (primal(u) < 1e-2) {
    // 1 - u/6 + u^2/120 - u^3/5040 + u^4/362880 - u^5/39916800
    return 1.0 + u * (-1.0 / 6 + u * (1.0 / 120 + u * (-1.0 / 5040 + u * (1.0 / 362880 - u / 39916800.0))));
  }
  T s = sqrt(u);
  return sin(s) / s;
}

}  // namespace detail

// cos r dz + r sin r dtheta, or its Cartesian counterpart
// cos(|w|) dz + sinc(|w|)(x dy - y dx) with w = (x, y).
inline KForm make_alpha_ot(AlphaChart flavor = AlphaChart::Polar) {
  if (flavor == AlphaChart::Polar)
    return KForm::from_terms(polar_chart(), 1, {{{"z"}, "cos(r)"}, {{"theta"}, "r*sin(r)"}});
  ChartPtr c = cartesian_chart();
  auto cz = ScalarField::native(
      c,
      []<class T>(std::span<const T> x) -> T { return detail::cos_sqrt(x[0] * x[0] + x[1] * x[1]); },
      std::vector<int>{0, 1});
  auto cx = ScalarField::native(
      c,
      []<class T>(std::span<const T> x) -> T { return -(x[1] * detail::sinc_sqrt(x[0] * x[0] + x[1] * x[1])); },
      std::vector<int>{0, 1});
  auto cy = ScalarField::native(
      c,
      []<class T>(std::span<const T> x) -> T { return x[0] * detail::sinc_sqrt(x[0] * x[0] + x[1] * x[1]); },
      std::vector<int>{0, 1});
  KForm a(c, 1);
  a.add(MultiIndex::of({0}), cx);
  a.add(MultiIndex::of({1}), cy);
  a.add(MultiIndex::of({2}), cz);
  return a;
}

// (r, theta, z) -> (r cos theta, r sin theta, z)
inline SmoothMap polar_to_cartesian() {
  return SmoothMap::parse(polar_chart(), cartesian_chart(), {"r*cos(theta)", "r*sin(theta)", "z"});
}

// -sum_j p_j dq_j on T*T^n.
inline KForm make_lambda_can(int n) {
  ChartPtr c = cotangent_chart(n);
  std::vector<std::pair<std::vector<std::string>, std::string>> terms;
  for (int j = 1; j <= n; ++j) terms.push_back({{"q" + std::to_string(j)}, "-p" + std::to_string(j)});
  return KForm::from_terms(c, 1, terms);
}

// Liouville field sum_j p_j ∂_{p_j} on T*T^n.
inline VectorField make_liouville(int n) {
  ChartPtr c = cotangent_chart(n);
  std::vector<std::string> comps;
  for (int j = 1; j <= n; ++j) comps.push_back("0");
  for (int j = 1; j <= n; ++j) comps.push_back("p" + std::to_string(j));
  return VectorField::parse(c, comps);
}

// alpha_OT + lambda_can on the (r, theta, z; q, p) chart.
inline KForm alpha_ot_plus_lambda(int n) {
  ChartPtr c = polar_cotangent_chart(n);
  return make_alpha_ot().embed(c) + make_lambda_can(n).embed(c);
}

// dz - sum_j y_j dx_j on R^{2n+1}.
inline KForm make_standard_form(int n) {
  ChartPtr c = darboux_chart(n);
  std::vector<std::pair<std::vector<std::string>, std::string>> terms{{{"z"}, "1"}};
  for (int j = 0; j < n; ++j) terms.push_back({{c->coordinates()[static_cast<std::size_t>(j)]}, "-" + c->coordinates()[static_cast<std::size_t>(n + j)]});
  return KForm::from_terms(c, 1, terms);
}

// dz - y dx - sum_j p_j dq_j on (x, y, z; q, p).
inline KForm make_darboux_cotangent_form(int n) {
  ChartPtr c = darboux_cotangent_chart(n);
  std::vector<std::pair<std::vector<std::string>, std::string>> terms{{{"z"}, "1"}, {{"x"}, "-y"}};
  for (int j = 1; j <= n; ++j) terms.push_back({{"q" + std::to_string(j)}, "-p" + std::to_string(j)});
  return KForm::from_terms(c, 1, terms);
}

// r sin r dtheta - sum_j t_j ds_j on the hypersurface chart.
inline KForm make_beta(int n) {
  ChartPtr c = sigma_chart(n);
  std::vector<std::pair<std::vector<std::string>, std::string>> terms{{{"theta"}, "r*sin(r)"}};
  for (int j = 1; j <= n; ++j) terms.push_back({{"s" + std::to_string(j)}, "-t" + std::to_string(j)});
  return KForm::from_terms(c, 1, terms);
}

// r dr ∧ dtheta ∧ ds_1 ∧ ... ∧ dt_n on the hypersurface chart.
inline KForm make_sigma_volume(int n) {
  ChartPtr c = sigma_chart(n);
  KForm v(c, c->dim());
  v.add(MultiIndex(detail::all_bits(c->dim())), ScalarField::parse(c, "r"));
  return v;
}

// ---------------------------------------------------------------------------
// The contact vector field X and its conformal factor g.
//
//   X = f(r) ∂_r - z ∂_z,  f(r) = -r cos r sin r / (r + cos r sin r)
//   g(r) = -cos r (r cos r + sin r) / (r + cos r sin r)

inline constexpr double kSeriesRadius = 1e-4;
inline constexpr const char* kRadialText = "-r*cos(r)*sin(r)/(r+cos(r)*sin(r))";
inline constexpr const char* kScalingText = "-cos(r)*(r*cos(r)+sin(r))/(r+cos(r)*sin(r))";

template <class T>
T radial_coefficient(const T& r) {
  using std::cos;
  using std::sin;
  if (std::abs(primal(r)) < kSeriesRadius) return -0.5 * r * (1.0 - r * r / 3.0);
  T cs = cos(r) * sin(r);
  return -(r * cs) / (r + cs);
}

template <class T>
T scaling_factor(const T& r) {
  using std::cos;
  using std::sin;
  if (std::abs(primal(r)) < kSeriesRadius) return -(1.0 - r * r / 2.0);
  T c = cos(r);
  T s = sin(r);
  return -(c * (r * c + s)) / (r + c * s);
}

inline VectorField make_field_X(Flavor flavor = Flavor::Native) {
  ChartPtr c = polar_chart();
  if (flavor == Flavor::Expression) return VectorField::parse(c, {kRadialText, "0", "-z"});
  auto f = ScalarField::native(c, []<class T>(std::span<const T> x) -> T { return radial_coefficient(x[0]); },
                               std::vector<int>{0});
  return VectorField(c, {f, ScalarField::zero(c), ScalarField::parse(c, "-z")});
}

inline ScalarField make_scaling_g(Flavor flavor = Flavor::Native) {
  ChartPtr c = polar_chart();
  if (flavor == Flavor::Expression) return ScalarField::parse(c, kScalingText);
  return ScalarField::native(c, []<class T>(std::span<const T> x) -> T { return scaling_factor(x[0]); },
                             std::vector<int>{0});
}

// Liouville field lifted to (r, theta, z; q, p), and X̂ = X + g Y there.
inline VectorField make_field_X_hat(int n, Flavor flavor = Flavor::Native) {
  ChartPtr c = polar_cotangent_chart(n);
  VectorField X = make_field_X(flavor);
  ScalarField g = make_scaling_g(flavor).embed(c);
  std::vector<ScalarField> comps;
  for (const auto& comp : X.components()) comps.push_back(comp.embed(c));
  for (int j = 0; j < n; ++j) comps.push_back(ScalarField::zero(c));
  for (int j = 1; j <= n; ++j) comps.push_back(g * ScalarField::coordinate(c, c->require_index("p" + std::to_string(j))));
  return {c, comps};
}

// ---------------------------------------------------------------------------
// Regions

class Region {
 public:
  virtual ~Region() = default;
  virtual int dim() const = 0;
  virtual bool contains(std::span<const double> x) const = 0;
  virtual Point sample(Rng& rng) const = 0;
  virtual json describe() const = 0;

  std::vector<Point> sample_many(Rng& rng, int count) const {
    std::vector<Point> pts;
    pts.reserve(static_cast<std::size_t>(std::max(count, 0)));
    for (int i = 0; i < count; ++i) pts.push_back(sample(rng));
    return pts;
  }
};

using RegionPtr = std::shared_ptr<const Region>;

// B(h) = D^2_{< pi + delta} x (-h, h) in (r, theta, z). Samples keep r >= r_min,
// away from the polar singularity.
class BoxRegion final : public Region {
 public:
  explicit BoxRegion(double h, double delta = kDefaultDelta, double r_min = 0.01)
      : h_(h), delta_(delta), r_min_(r_min) {
    if (!(h > 0)) throw std::invalid_argument("box height must be positive");
    if (!(delta > 0)) throw std::invalid_argument("box delta must be positive");
    if (!(r_min >= 0 && r_min < std::numbers::pi + delta)) throw std::invalid_argument("invalid minimum radius");
  }
  double h() const { return h_; }
  double delta() const { return delta_; }
  double r_max() const { return std::numbers::pi + delta_; }

  int dim() const override { return 3; }
  bool contains(std::span<const double> x) const override {
    return x[0] >= 0 && x[0] < r_max() && std::abs(x[2]) < h_;
  }
  Point sample(Rng& rng) const override {
    double r = rng.uniform(r_min_, r_max());
    double th = rng.uniform(-std::numbers::pi, std::numbers::pi);
    double z = rng.uniform(-h_, h_);
    return {r, th, z};
  }
  json describe() const override { return {{"h", h_}, {"delta", delta_}, {"r_min", r_min_}}; }

 private:
  double h_, delta_, r_min_;
};

// D_{<c}(T*T^n): q in [-pi, pi)^n, |p| < c.
class CubeBundleRegion final : public Region {
 public:
  CubeBundleRegion(int n, double c) : n_(n), c_(c) {
    detail::require_half_dim(n);
    if (!(c > 0)) throw std::invalid_argument("fiber radius must be positive");
  }
  int n() const { return n_; }
  double c() const { return c_; }

  int dim() const override { return 2 * n_; }
  bool contains(std::span<const double> x) const override {
    double s = 0;
    for (int j = 0; j < n_; ++j) s += x[static_cast<std::size_t>(n_ + j)] * x[static_cast<std::size_t>(n_ + j)];
    return std::sqrt(s) < c_;
  }
  Point sample(Rng& rng) const override {
    Point x(static_cast<std::size_t>(2 * n_));
    for (int j = 0; j < n_; ++j) x[static_cast<std::size_t>(j)] = rng.uniform(-std::numbers::pi, std::numbers::pi);
    // uniform in the open ball: Gaussian direction, radius c U^{1/n}
    std::vector<double> d(static_cast<std::size_t>(n_));
    double norm = 0;
    do {
      norm = 0;
      for (auto& v : d) {
        v = rng.normal();
        norm += v * v;
      }
    } while (norm == 0);
    norm = std::sqrt(norm);
    double rad = c_ * std::pow(rng.uniform(0.0, 1.0), 1.0 / n_);
    for (int j = 0; j < n_; ++j) x[static_cast<std::size_t>(n_ + j)] = rad * d[static_cast<std::size_t>(j)] / norm;
    return x;
  }
  json describe() const override { return {{"n", n_}, {"c", c_}}; }

 private:
  int n_;
  double c_;
};

// Axis-aligned box [lo, hi).
class CubeRegion final : public Region {
 public:
  CubeRegion(std::vector<double> lo, std::vector<double> hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
    if (lo_.size() != hi_.size() || lo_.empty()) throw std::invalid_argument("cube bounds mismatch");
    for (std::size_t i = 0; i < lo_.size(); ++i)
      if (!(lo_[i] < hi_[i])) throw std::invalid_argument("cube bounds must satisfy lo < hi");
  }
  int dim() const override { return static_cast<int>(lo_.size()); }
  bool contains(std::span<const double> x) const override {
    for (std::size_t i = 0; i < lo_.size(); ++i)
      if (x[i] < lo_[i] || x[i] >= hi_[i]) return false;
    return true;
  }
  Point sample(Rng& rng) const override {
    Point x(lo_.size());
    for (std::size_t i = 0; i < lo_.size(); ++i) x[i] = rng.uniform(lo_[i], hi_[i]);
    return x;
  }
  json describe() const override { return {{"lo", lo_}, {"hi", hi_}}; }

 private:
  std::vector<double> lo_, hi_;
};

class ProductRegion final : public Region {
 public:
  ProductRegion(RegionPtr a, RegionPtr b) : a_(std::move(a)), b_(std::move(b)) {}
  int dim() const override { return a_->dim() + b_->dim(); }
  bool contains(std::span<const double> x) const override {
    const auto da = static_cast<std::size_t>(a_->dim());
    return a_->contains(x.subspan(0, da)) && b_->contains(x.subspan(da));
  }
  Point sample(Rng& rng) const override {
    Point x = a_->sample(rng);
    Point y = b_->sample(rng);
    x.insert(x.end(), y.begin(), y.end());
    return x;
  }
  json describe() const override { return {{"first", a_->describe()}, {"second", b_->describe()}}; }

 private:
  RegionPtr a_, b_;
};

// Sigma_C = D^2_{<= pi} x (-C, C)^{2n} with beta = r sin r dtheta - sum t_j ds_j.
struct SigmaCSpec {
  double C;
  int n;

  SigmaCSpec(double C_, int n_) : C(C_), n(n_) {
    if (!(C > 0)) throw std::invalid_argument("C must be positive");
    detail::require_half_dim(n);
  }
  ChartPtr chart() const { return sigma_chart(n); }
  KForm beta() const { return make_beta(n); }
  KForm volume() const { return make_sigma_volume(n); }
  RegionPtr region(double r_min = 0.01) const {
    std::vector<double> lo{r_min, -std::numbers::pi}, hi{std::numbers::pi, std::numbers::pi};
    for (int k = 0; k < 2 * n; ++k) {
      lo.push_back(-C);
      hi.push_back(C);
    }
    return std::make_shared<CubeRegion>(lo, hi);
  }
};

// ---------------------------------------------------------------------------
// Contact models

class ContactModel {
 public:
  ContactModel(std::string name, KForm alpha)
      : name_(std::move(name)),
        alpha_(checked(std::move(alpha))),
        n_((alpha_.chart()->dim() - 1) / 2),
        d_alpha_(exterior_derivative(alpha_)),
        top_(wedge(alpha_, wedge_power(d_alpha_, n_))) {}

  const std::string& name() const { return name_; }
  const ChartPtr& chart() const { return alpha_.chart(); }
  const KForm& alpha() const { return alpha_; }
  const KForm& d_alpha() const { return d_alpha_; }
  int half_dim() const { return n_; }

  // Coefficient of alpha ∧ (d alpha)^n on the coordinate volume.
  double top_coefficient(std::span<const double> x) const {
    return top_.coefficient(MultiIndex(detail::all_bits(chart()->dim())))(x);
  }

 private:
  static KForm checked(KForm a) {
    if (a.degree() != 1) throw DegreeOverflow("a contact form must have degree 1");
    if (a.chart()->dim() % 2 == 0) throw ArityMismatch("a contact chart must be odd-dimensional");
    return a;
  }

  std::string name_;
  KForm alpha_;
  int n_;
  KForm d_alpha_;
  KForm top_;
};

inline ContactModel alpha_ot_model(AlphaChart flavor = AlphaChart::Polar) {
  return {flavor == AlphaChart::Polar ? "alpha_ot" : "alpha_ot_cartesian", make_alpha_ot(flavor)};
}
inline ContactModel alpha_ot_lambda_model(int n) { return {"alpha_ot_plus_lambda" + std::to_string(n), alpha_ot_plus_lambda(n)}; }
inline ContactModel standard_model(int n) { return {"standard" + std::to_string(n), make_standard_form(n)}; }

// Evaluates the top coefficient of alpha ∧ (d alpha)^n at sampled region
// points; PASS iff every value has the sign of the first and exceeds 1e-10 in
// magnitude. If `expected` is given, max_residual is the largest deviation
// from it (otherwise 0).
inline Report contact_condition_report(const ContactModel& model, int samples, const Region& region, Rng& rng,
                                       std::optional<ScalarField> expected = std::nullopt) {
  if (samples < 1) throw std::invalid_argument("samples must be at least 1");
  if (region.dim() != model.chart()->dim()) throw ArityMismatch("region dimension does not match the model chart");
  Stopwatch clock;
  Report rep;
  rep.check = "contact_condition";
  rep.parameters = {{"model", model.name()}, {"region", region.describe()}};
  rep.seed = rng.seed();
  auto pts = region.sample_many(rng, samples);
  rep.samples = samples;
  double sign = 0.0;
  double min_abs = std::numeric_limits<double>::infinity();
  for (const auto& p : pts) {
    if (!model.chart()->contains(p))
      throw DomainError("sampler produced a point outside chart '" + model.chart()->name() + "'");
    const double v = model.top_coefficient(p);
    if (sign == 0.0) sign = v >= 0 ? 1.0 : -1.0;
    if (expected) {
      const double dev = std::abs(v - (*expected)(p));
      if (dev > rep.max_residual || !rep.witness) {
        rep.max_residual = std::max(rep.max_residual, dev);
        if (rep.status == Status::Pass) rep.witness = p;
      }
    }
    if (std::abs(v) < min_abs) {
      min_abs = std::abs(v);
      if (!expected && rep.status == Status::Pass) rep.witness = p;
    }
    if (rep.status == Status::Pass && !(std::abs(v) > 1e-10 && v * sign > 0)) {
      rep.status = Status::Fail;
      rep.witness = p;
      rep.message = "top coefficient " + std::to_string(v) + " vanishes or changes sign";
    }
  }
  rep.metrics["min_abs_top_coefficient"] = min_abs;
  rep.metrics["sign"] = sign;
  rep.wall_time = clock.seconds();
  return rep;
}

namespace detail {

inline std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline void require_point(const ChartPtr& c, std::span<const double> x) {
  if (static_cast<int>(x.size()) != c->dim()) throw ArityMismatch("point dimension does not match chart");
  if (!c->contains(x)) throw DomainError("point outside the domain of chart '" + c->name() + "'");
}

// Least-squares solve of A x = b, rejecting rank deficiency and residual > tol.
inline Eigen::VectorXd consistent_solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double tol,
                                        const std::string& what) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  qr.setThreshold(1e-12);
  if (qr.rank() < A.cols()) throw SingularSystem(what + ": system is rank deficient");
  Eigen::VectorXd x = qr.solve(b);
  const double res = (A * x - b).lpNorm<Eigen::Infinity>();
  if (!(res < tol)) throw SingularSystem(what + ": residual " + std::to_string(res) + " exceeds tolerance");
  return x;
}

}  // namespace detail

inline constexpr double kSolveTolerance = 1e-9;

// Unique R with alpha(R) = 1 and ι_R d alpha = 0.
inline Vector reeb_vector(const KForm& alpha, const KForm& d_alpha, std::span<const double> x) {
  detail::require_point(alpha.chart(), x);
  const int dim = alpha.chart()->dim();
  Eigen::VectorXd a = one_form_vector(alpha, x);
  Eigen::MatrixXd M = two_form_matrix(d_alpha, x);
  Eigen::MatrixXd A(dim + 1, dim);
  A.row(0) = a.transpose();
  A.bottomRows(dim) = M.transpose();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(dim + 1);
  b(0) = 1.0;
  return detail::to_std(detail::consistent_solve(A, b, kSolveTolerance, "Reeb field"));
}

inline Vector reeb_vector(const ContactModel& model, std::span<const double> x) {
  return reeb_vector(model.alpha(), model.d_alpha(), x);
}

// Max over frame vectors of |(L_v alpha - g alpha)(e_i)| at sampled points.
inline Report verify_conformal_scaling(const VectorField& v, const KForm& alpha, const ScalarField& g,
                                       const std::vector<Point>& points, double tol = 1e-7, int threads = 1) {
  require_same_chart(v.chart(), alpha.chart(), "conformal scaling");
  require_same_chart(g.chart(), alpha.chart(), "conformal scaling");
  KForm residual = lie_derivative(v, alpha) - g * alpha;
  Report rep = sweep("conformal_scaling", points, [&](const Point& p) {
    double m = 0;
    for (const auto& [I, val] : residual.values_at(p)) m = std::max(m, std::abs(val));
    return SampleResult{m, m < tol, "conformal residual " + std::to_string(m)};
  }, threads);
  rep.metrics["tolerance"] = tol;
  return rep;
}

inline Report verify_conformal_scaling(const VectorField& v, const KForm& alpha, const ScalarField& g, int samples,
                                       const Region& region, Rng& rng, double tol = 1e-7, int threads = 1) {
  auto rep = verify_conformal_scaling(v, alpha, g, region.sample_many(rng, samples), tol, threads);
  rep.parameters = {{"region", region.describe()}};
  rep.seed = rng.seed();
  return rep;
}

// X with ι_X dvol = beta ∧ (d beta)^{n-1} on a 2n-dimensional chart.
inline Vector characteristic_foliation_vector(const KForm& beta, const KForm& dvol, std::span<const double> x) {
  require_same_chart(beta.chart(), dvol.chart(), "characteristic foliation");
  const int dim = beta.chart()->dim();
  if (dim % 2) throw ArityMismatch("characteristic foliation needs an even-dimensional chart");
  if (beta.degree() != 1 || dvol.degree() != dim) throw DegreeOverflow("expected a 1-form and a top form");
  detail::require_point(beta.chart(), x);
  const std::uint32_t all = detail::all_bits(dim);
  const double vol = dvol.coefficient(MultiIndex(all))(x);
  if (std::abs(vol) < 1e-12) throw DegenerateVolume("volume form vanishes at the point");
  const int n = dim / 2;
  KForm omega = wedge(beta, wedge_power(exterior_derivative(beta), n - 1));
  Vector X(static_cast<std::size_t>(dim));
  for (int i = 0; i < dim; ++i) {
    const double w = omega.coefficient(MultiIndex(all & ~(1u << i)))(x);
    X[static_cast<std::size_t>(i)] = (i % 2 ? -1.0 : 1.0) * w / vol;
  }
  return X;
}

// Gray-stability field X_tau for alpha_tau = (1 - tau) alpha0 + tau alpha1:
//   alpha_tau(X) = 0,  ι_X d alpha_tau = f alpha_tau - alpha_dot,  f = alpha_dot(R_tau).
inline Vector moser_vector(const KForm& alpha0, const KForm& alpha1, double tau, std::span<const double> x) {
  require_same_chart(alpha0.chart(), alpha1.chart(), "Moser field");
  if (!(tau >= 0 && tau <= 1)) throw std::invalid_argument("tau must lie in [0, 1]");
  detail::require_point(alpha0.chart(), x);
  const int dim = alpha0.chart()->dim();
  KForm a_tau = (1.0 - tau) * alpha0 + tau * alpha1;
  KForm a_dot = alpha1 - alpha0;
  KForm da_tau = exterior_derivative(a_tau);
  Vector R = reeb_vector(a_tau, da_tau, x);
  Eigen::VectorXd a = one_form_vector(a_tau, x);
  Eigen::VectorXd ad = one_form_vector(a_dot, x);
  const double f = ad.dot(Eigen::Map<const Eigen::VectorXd>(R.data(), dim));
  Eigen::MatrixXd M = two_form_matrix(da_tau, x);
  Eigen::MatrixXd A(dim + 1, dim);
  A.row(0) = a.transpose();
  A.bottomRows(dim) = M.transpose();
  Eigen::VectorXd b(dim + 1);
  b(0) = 0.0;
  b.tail(dim) = f * a - ad;
  return detail::to_std(detail::consistent_solve(A, b, kSolveTolerance, "Moser field"));
}

}  // namespace cforge
