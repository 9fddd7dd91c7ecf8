#pragma once

// Explicit maps: torus unwrapping, Legendrian spheres, auxiliary rescalings.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/tools/roots.hpp>

#include "contact_forge/contact_models.hpp"
#include "contact_forge/geometry.hpp"
#include "contact_forge/report.hpp"

namespace cforge {

inline constexpr double kPullbackTolerance = 1e-8;
inline constexpr double kCollisionDistance = 1e-9;
inline constexpr double kRelationDeadBand = 1e-12;

inline std::vector<int> first_primes(int n) {
  std::vector<int> out;
  for (int k = 2; static_cast<int>(out.size()) < n; ++k) {
    bool prime = true;
    for (int p : out) {
      if (p * p > k) break;
      if (k % p == 0) {
        prime = false;
        break;
      }
    }
    if (prime) out.push_back(k);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Torus unwrapping

struct UnwrapParams {
  int n = 1;
  std::vector<double> hbars;
  double C = 1.0;
  double epsilon = 0.1;
  double delta = kDefaultDelta;

  double fiber_bound() const { return delta / (2.0 * std::sqrt(static_cast<double>(n))); }

  void validate() const {
    detail::require_half_dim(n);
    if (static_cast<int>(hbars.size()) != n) throw std::invalid_argument("need one hbar per pair of coordinates");
    if (!(C > 0) || !(epsilon > 0) || !(delta > 0)) throw std::invalid_argument("C, epsilon and delta must be positive");
    double sum = 0;
    for (double h : hbars) {
      if (!(h > 0)) throw std::invalid_argument("hbars must be positive");
      if (!(h < fiber_bound())) throw std::invalid_argument("hbar must be below delta/(2 sqrt n)");
      sum += h;
    }
    if (sum > epsilon / C * (1 + 1e-12)) throw std::invalid_argument("sum of hbars exceeds epsilon/C");
  }
};

// hbar_j = kappa sqrt(p_j) with 10% slack on both constraints.
inline std::vector<double> choose_hbars(int n, double epsilon, double C, double delta) {
  detail::require_half_dim(n);
  if (!(epsilon > 0) || !(C > 0) || !(delta > 0)) throw std::invalid_argument("arguments must be positive");
  auto primes = first_primes(n);
  double root_sum = 0;
  for (int p : primes) root_sum += std::sqrt(static_cast<double>(p));
  const double largest = std::sqrt(static_cast<double>(primes.back()));
  const double kappa =
      0.9 * std::min(epsilon / (C * root_sum), delta / (2.0 * std::sqrt(static_cast<double>(n)) * largest));
  std::vector<double> h;
  for (int p : primes) h.push_back(kappa * std::sqrt(static_cast<double>(p)));
  return h;
}

inline UnwrapParams make_unwrap_params(int n, double C, double epsilon, double delta = kDefaultDelta) {
  UnwrapParams p{n, choose_hbars(n, epsilon, C, delta), C, epsilon, delta};
  p.validate();
  return p;
}

// (r, theta, s, t) -> (r, theta, z = sum hbar_j s_j; q_j = s_j, p_j = t_j + hbar_j cos r)
inline SmoothMap unwrap_map(const UnwrapParams& params) {
  params.validate();
  const int n = params.n;
  ChartPtr src = sigma_chart(n);
  ChartPtr dst = polar_cotangent_chart(n);
  std::vector<ScalarField> comps{ScalarField::coordinate(src, 0), ScalarField::coordinate(src, 1)};
  ScalarField z = ScalarField::zero(src);
  for (int j = 0; j < n; ++j) z = z + params.hbars[static_cast<std::size_t>(j)] * ScalarField::coordinate(src, 2 + j);
  comps.push_back(z);
  for (int j = 0; j < n; ++j) comps.push_back(ScalarField::coordinate(src, 2 + j));
  const ScalarField cos_r = ScalarField::parse(src, "cos(r)");
  for (int j = 0; j < n; ++j)
    comps.push_back(ScalarField::coordinate(src, 2 + n + j) + params.hbars[static_cast<std::size_t>(j)] * cos_r);
  return {src, dst, std::move(comps)};
}

// r in (r_min, pi), theta in (-pi, pi), |s_j| < C, |t_j| < delta/(2 sqrt n).
inline RegionPtr unwrap_domain(const UnwrapParams& params, double r_min = 0.01) {
  std::vector<double> lo{r_min, -std::numbers::pi}, hi{std::numbers::pi, std::numbers::pi};
  for (int j = 0; j < params.n; ++j) {
    lo.push_back(-params.C);
    hi.push_back(params.C);
  }
  for (int j = 0; j < params.n; ++j) {
    lo.push_back(-params.fiber_bound());
    hi.push_back(params.fiber_bound());
  }
  return std::make_shared<CubeRegion>(lo, hi);
}

struct IntegerRelation {
  double min_value = std::numeric_limits<double>::infinity();  // min |sum m_j w_j| / max |w_j|
  std::vector<int> argmin;
  bool found = false;  // some m has |sum m_j w_j| inside the dead-band
};

// Brute force over nonzero m in [-K, K]^n whose first nonzero entry is positive.
// A detected relation is the one of smallest max-norm, lexicographic on ties.
inline IntegerRelation integer_relation_search(const std::vector<double>& w, int K, double dead_band = kRelationDeadBand) {
  if (w.empty()) throw std::invalid_argument("no weights");
  if (K < 1) throw std::invalid_argument("K must be at least 1");
  double scale = 0;
  for (double x : w) scale = std::max(scale, std::abs(x));
  if (!(scale > 0)) throw std::invalid_argument("weights vanish");
  const std::size_t n = w.size();
  IntegerRelation out;
  int best_norm = std::numeric_limits<int>::max();
  std::vector<int> m(n, -K);
  while (true) {
    std::size_t lead = 0;
    while (lead < n && m[lead] == 0) ++lead;
    if (lead < n && m[lead] > 0) {
      double s = 0;
      int norm = 0;
      for (std::size_t j = 0; j < n; ++j) {
        s += m[j] * w[j];
        norm = std::max(norm, std::abs(m[j]));
      }
      const double v = std::abs(s) / scale;
      if (v <= dead_band) {
        if (!out.found || norm < best_norm) {
          out.found = true;
          best_norm = norm;
          out.min_value = v;
          out.argmin = m;
        }
      } else if (!out.found && v < out.min_value) {
        out.min_value = v;
        out.argmin = m;
      }
    }
    std::size_t k = n;
    while (k > 0 && m[k - 1] == K) m[--k] = -K;
    if (k == 0) break;
    ++m[k - 1];
  }
  return out;
}

namespace detail {

inline double angle_gap(double a, double b) {
  double d = std::fmod(std::abs(a - b), 2 * std::numbers::pi);
  return std::min(d, 2 * std::numbers::pi - d);
}

}  // namespace detail

// Checks the unwrapping map: (a) the pullback identity, (b) injectivity by
// collision sampling and by the integer-relation criterion, (c) containment.
inline Report verify_unwrap(const SmoothMap& map, const UnwrapParams& params, int samples, Rng& rng, int threads = 1) {
  Stopwatch clock;
  params.validate();
  const int n = params.n;
  json parameters = {{"n", n}, {"hbars", params.hbars}, {"C", params.C}, {"epsilon", params.epsilon}, {"delta", params.delta}};
  KForm diff = pullback(map, alpha_ot_plus_lambda(n)) + (-make_beta(n));
  auto pts = unwrap_domain(params)->sample_many(rng, samples);

  std::vector<Point> images(pts.size());
  Report rep = sweep("unwrap", pts, [&](const Point& x, std::size_t i) {
    double res = 0;
    for (const auto& [I, v] : diff.values_at(x)) res = std::max(res, std::abs(v));
    images[i] = map(x);
    return SampleResult{res, res < kPullbackTolerance, "pullback identity violated"};
  }, threads);
  rep.parameters = parameters;
  rep.seed = rng.seed();
  if (rep.status == Status::Error) return rep;

  // (c) containment
  double max_z = 0, max_fiber = 0;
  std::size_t worst_z = 0, worst_fiber = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& y = images[i];
    if (std::abs(y[2]) > max_z) max_z = std::abs(y[2]), worst_z = i;
    double norm = 0;
    for (int j = 0; j < n; ++j) norm += y[static_cast<std::size_t>(3 + n + j)] * y[static_cast<std::size_t>(3 + n + j)];
    if (std::sqrt(norm) > max_fiber) max_fiber = std::sqrt(norm), worst_fiber = i;
  }

  // (b) collisions among samples: angle coordinates compared modulo 2 pi
  const ChartPtr& tgt = map.target();
  double min_gap = std::numeric_limits<double>::infinity();
  std::optional<std::size_t> collision;
  for (std::size_t a = 0; a < images.size(); ++a) {
    for (std::size_t b = a + 1; b < images.size(); ++b) {
      double gap = 0, src_gap = 0;
      for (int k = 0; k < tgt->dim(); ++k) {
        const auto kk = static_cast<std::size_t>(k);
        gap = std::max(gap, tgt->periodic(k) ? detail::angle_gap(images[a][kk], images[b][kk])
                                             : std::abs(images[a][kk] - images[b][kk]));
      }
      for (std::size_t k = 0; k < pts[a].size(); ++k)
        src_gap = std::max(src_gap, k == 1 ? detail::angle_gap(pts[a][k], pts[b][k]) : std::abs(pts[a][k] - pts[b][k]));
      if (src_gap > kRelationDeadBand) {
        min_gap = std::min(min_gap, gap);
        if (gap < kCollisionDistance && !collision) collision = a;
      }
    }
  }
  const int K = static_cast<int>(std::ceil(params.C / std::numbers::pi));
  IntegerRelation rel;
  if (n > 1) rel = integer_relation_search(params.hbars, K);

  rep.metrics["pullback_residual"] = rep.max_residual;
  rep.metrics["max_abs_z"] = max_z;
  rep.metrics["max_fiber_norm"] = max_fiber;
  rep.metrics["min_image_gap"] = std::isfinite(min_gap) ? json(min_gap) : json(nullptr);
  rep.metrics["relation_bound_K"] = K;
  rep.metrics["min_relation_value"] = n > 1 ? json(rel.min_value) : json(nullptr);

  if (rep.status == Status::Pass) {
    if (rel.found) {
      rep.status = Status::Fail;
      rep.witness = std::vector<double>(rel.argmin.begin(), rel.argmin.end());
      rep.message = "injectivity: integer relation among hbars";
    } else if (collision) {
      rep.status = Status::Fail;
      rep.witness = pts[*collision];
      rep.message = "injectivity: sampled collision";
    } else if (!(max_z < params.epsilon)) {
      rep.status = Status::Fail;
      rep.witness = pts[worst_z];
      rep.message = "containment: |z| reaches epsilon";
    } else if (!(max_fiber < params.delta)) {
      rep.status = Status::Fail;
      rep.witness = pts[worst_fiber];
      rep.message = "containment: fiber norm reaches delta";
    }
  }
  rep.wall_time = clock.seconds();
  return rep;
}

inline Report verify_unwrap(const UnwrapParams& params, int samples, Rng& rng, int threads = 1) {
  return verify_unwrap(unwrap_map(params), params, samples, rng, threads);
}

// Numerical rank of the Jacobian (singular values above `tol`).
inline int jacobian_rank(const SmoothMap& map, std::span<const double> x, double tol = 1e-8) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(map.jacobian(x));
  int rank = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > tol) ++rank;
  return rank;
}

// ---------------------------------------------------------------------------
// Bump function

// C-infinity monotone step: 0 below lo, 1 above hi, exp(-1/t) partition between.
class BumpFunction {
 public:
  explicit BumpFunction(double lo = 0.1, double hi = 0.9) : lo_(lo), hi_(hi) {
    if (!(0 <= lo && lo < hi && hi <= 1)) throw std::invalid_argument("bump thresholds must satisfy 0 <= lo < hi <= 1");
  }

  double lo() const { return lo_; }
  double hi() const { return hi_; }

  template <class T>
  T value(const T& u) const {
    if (primal(u) <= lo_) return T(0.0);
    if (primal(u) >= hi_) return T(1.0);
    const T y = (u - lo_) / (hi_ - lo_);
    const T a = psi(y), b = psi(1.0 - y);
    return a / (a + b);
  }

  template <class T>
  T derivative(const T& u) const {
    if (primal(u) <= lo_ || primal(u) >= hi_) return T(0.0);
    const T y = (u - lo_) / (hi_ - lo_);
    const T a = psi(y), b = psi(1.0 - y);
    const T da = a / (y * y), db = b / ((1.0 - y) * (1.0 - y));
    return (da * b + a * db) / ((a + b) * (a + b)) / (hi_ - lo_);
  }

  double operator()(double u) const { return value(u); }

 private:
  template <class T>
  static T psi(const T& t) {
    using std::exp;
    return exp(-1.0 / t);
  }

  double lo_, hi_;
};

// ---------------------------------------------------------------------------
// Legendrian embeddings

// A map from a parameter space whose restriction to {constraint = 0} is the
// embedded sphere, together with the ambient contact form.
struct LegendrianEmbedding {
  std::string name;
  KForm alpha;
  SmoothMap map;
  ScalarField constraint;
};

namespace detail {

inline void check_embedding(const LegendrianEmbedding& e) {
  require_same_chart(e.map.source(), e.constraint.chart(), "constraint");
  require_same_chart(e.map.target(), e.alpha.chart(), "ambient form");
  if (e.alpha.degree() != 1) throw DegreeOverflow("ambient form must be a 1-form");
}

inline ChartPtr sphere_param_chart(const std::string& name, std::vector<std::string> coords) {
  return make_chart(name, std::move(coords));
}

}  // namespace detail

// S^n in (x_1..x_n, s) mapped by (x, s) -> (x, -s x, s^3/3) into (R^{2n+1}, dz - sum y dx).
inline LegendrianEmbedding unknot_embedding(int n) {
  detail::require_half_dim(n);
  auto coords = detail::indexed("x", n);
  coords.push_back("s");
  ChartPtr src = detail::sphere_param_chart("sphere" + std::to_string(n), coords);
  KForm alpha = make_standard_form(n);
  std::vector<std::string> comps, sq;
  for (int j = 1; j <= n; ++j) comps.push_back("x" + std::to_string(j));
  for (int j = 1; j <= n; ++j) comps.push_back("-s*x" + std::to_string(j));
  comps.push_back("s^3/3");
  std::string constraint = "s^2 - 1";
  for (int j = 1; j <= n; ++j) constraint += " + x" + std::to_string(j) + "^2";
  LegendrianEmbedding e{"unknot" + std::to_string(n), alpha, SmoothMap::parse(src, alpha.chart(), comps),
                        ScalarField::parse(src, constraint)};
  detail::check_embedding(e);
  return e;
}

namespace detail {

template <class T>
T squared_tail(std::span<const T> x, int n) {
  T u(0.0);
  for (int j = 1; j <= n; ++j) u = u + x[static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(j)];
  return u;
}

}  // namespace detail

// x_0^2 + s^2 + (1 - tau) |x|^2 + tau g(|x|^2) |x|^2 - 1 on (x_0, x_1..x_n, s).
inline ScalarField deformed_constraint(int n, const BumpFunction& bump, double tau = 1.0) {
  detail::require_half_dim(n);
  auto coords = std::vector<std::string>{"x0"};
  for (const auto& c : detail::indexed("x", n)) coords.push_back(c);
  coords.push_back("s");
  ChartPtr src = detail::sphere_param_chart("deformed_sphere" + std::to_string(n), coords);
  return ScalarField::native(src, [bump, n, tau]<class T>(std::span<const T> x) -> T {
    const T u = detail::squared_tail(x, n);
    const T& s = x[static_cast<std::size_t>(n + 1)];
    return x[0] * x[0] + s * s + (1.0 - tau) * u + tau * bump.value(u) * u - 1.0;
  });
}

// (x_0, x, s) -> (x_0, -s x_0, s^3/3; x, -s x (g(|x|^2) + |x|^2 g'(|x|^2)))
// into (x, y, z; q, p) with dz - y dx - sum p dq.
inline LegendrianEmbedding deformed_sphere_embedding(int n, const BumpFunction& bump = BumpFunction{}) {
  ScalarField F = deformed_constraint(n, bump);
  ChartPtr src = F.chart();
  KForm alpha = make_darboux_cotangent_form(n);
  std::vector<ScalarField> comps{ScalarField::parse(src, "x0"), ScalarField::parse(src, "-s*x0"),
                                 ScalarField::parse(src, "s^3/3")};
  for (int j = 1; j <= n; ++j) comps.push_back(ScalarField::coordinate(src, j));
  for (int j = 1; j <= n; ++j) {
    comps.push_back(ScalarField::native(src, [bump, n, j]<class T>(std::span<const T> x) -> T {
      const T u = detail::squared_tail(x, n);
      const T& s = x[static_cast<std::size_t>(n + 1)];
      return -s * x[static_cast<std::size_t>(j)] * (bump.value(u) + u * bump.derivative(u));
    }));
  }
  LegendrianEmbedding e{"deformed_sphere" + std::to_string(n), alpha, SmoothMap(src, alpha.chart(), std::move(comps)), F};
  detail::check_embedding(e);
  return e;
}

// Samples {F = 0} through hemispherical graph charts: pick an axis and a
// sign, draw the remaining coordinates in [-box, box], and solve for the axis
// coordinate on (0, reach). Draws without a sign change are rejected.
inline std::vector<Point> sample_level_set(const ScalarField& F, Rng& rng, int count, double box = 1.0,
                                           double reach = 2.0) {
  const int dim = F.chart()->dim();
  std::vector<Point> out;
  const long max_draws = 1000L * std::max(count, 1);
  for (long draw = 0; static_cast<int>(out.size()) < count; ++draw) {
    if (draw >= max_draws) throw DegenerateParametrization("could not sample the constraint surface");
    const int axis = std::min(dim - 1, static_cast<int>(rng.uniform(0.0, dim)));
    const double sign = rng.uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0;
    Point x(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i) x[static_cast<std::size_t>(i)] = i == axis ? 0.0 : rng.uniform(-box, box);
    auto phi = [&](double lam) {
      Point y = x;
      y[static_cast<std::size_t>(axis)] = sign * lam;
      return F(y);
    };
    const double f0 = phi(0.0), f1 = phi(reach);
    if (!(f0 < 0 && f1 > 0)) continue;
    std::uintmax_t iters = 200;
    auto [a, b] = boost::math::tools::toms748_solve(phi, 0.0, reach, f0, f1, boost::math::tools::eps_tolerance<double>(52), iters);
    const double lam = std::abs(phi(a)) <= std::abs(phi(b)) ? a : b;
    x[static_cast<std::size_t>(axis)] = sign * lam;
    out.push_back(std::move(x));
  }
  return out;
}

// Orthonormal basis of ker dF at x, from projecting the coordinate directions.
inline std::vector<Vector> tangent_basis(const ScalarField& F, std::span<const double> x) {
  const int dim = F.chart()->dim();
  Eigen::VectorXd g(dim);
  auto grad = F.gradient(x);
  for (int i = 0; i < dim; ++i) g(i) = grad[static_cast<std::size_t>(i)];
  const double norm = g.norm();
  if (!(norm > 1e-12)) throw DegenerateParametrization("constraint gradient vanishes");
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(dim, dim) - g * g.transpose() / (norm * norm);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(P, Eigen::ComputeFullU);
  int rank = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > 1e-8) ++rank;
  if (rank != dim - 1) throw DegenerateParametrization("tangent basis has rank " + std::to_string(rank));
  std::vector<Vector> basis;
  for (int k = 0; k < rank; ++k) {
    Vector v(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i) v[static_cast<std::size_t>(i)] = svd.matrixU()(i, k);
    basis.push_back(std::move(v));
  }
  return basis;
}

// max over a tangent basis of |alpha(D iota v)| at a parameter point.
inline double legendrian_residual(const LegendrianEmbedding& e, std::span<const double> x,
                                  const std::vector<Vector>& basis) {
  Point y = e.map(x);
  Eigen::VectorXd a = one_form_vector(e.alpha, y);
  Eigen::MatrixXd J = e.map.jacobian(x);
  double res = 0;
  for (const auto& v : basis) {
    Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    res = std::max(res, std::abs(a.dot(J * w)));
  }
  return res;
}

inline Report verify_legendrian(const LegendrianEmbedding& e, int samples, Rng& rng, int threads = 1) {
  Stopwatch clock;
  detail::check_embedding(e);
  auto pts = sample_level_set(e.constraint, rng, samples);
  std::vector<std::vector<Vector>> bases;
  double max_constraint = 0;
  for (const auto& p : pts) {
    bases.push_back(tangent_basis(e.constraint, p));
    max_constraint = std::max(max_constraint, std::abs(e.constraint(p)));
  }
  Report rep = sweep("legendrian", pts, [&](const Point& x, std::size_t i) {
    const double r = legendrian_residual(e, x, bases[i]);
    return SampleResult{r, r < kPullbackTolerance, "contact form does not vanish on the tangent space"};
  }, threads);
  rep.parameters = {{"embedding", e.name}, {"dim", e.map.source()->dim() - 1}};
  rep.metrics["max_constraint"] = max_constraint;
  rep.seed = rng.seed();
  rep.wall_time = clock.seconds();
  return rep;
}

// Smoothness of the interpolated constraint surfaces: the gradient of F_tau
// stays away from zero at samples of {F_tau = 0}.
inline Report verify_constraint_family(int n, const BumpFunction& bump, const std::vector<double>& taus, int samples,
                                       Rng& rng, double min_gradient = 1e-6) {
  Stopwatch clock;
  Report total;
  total.check = "deformation_family";
  json norms = json::object();
  bool first = true;
  for (double tau : taus) {
    ScalarField F = deformed_constraint(n, bump, tau);
    auto pts = sample_level_set(F, rng, samples);
    Report rep = sweep("deformation_family", pts, [&](const Point& x) {
      auto g = F.gradient(x);
      double norm = 0;
      for (double v : g) norm += v * v;
      norm = std::sqrt(norm);
      return SampleResult{1.0 / norm, norm > min_gradient, "constraint gradient vanishes"};
    });
    norms["tau=" + std::to_string(tau)] = rep.max_residual > 0 ? 1.0 / rep.max_residual : 0.0;
    total = first ? rep : merge(total, rep);
    first = false;
  }
  total.metrics["min_gradient_norm"] = norms;
  total.parameters = {{"n", n}, {"taus", taus}, {"bump", {bump.lo(), bump.hi()}}};
  total.seed = rng.seed();
  total.wall_time = clock.seconds();
  return total;
}

// ---------------------------------------------------------------------------
// Auxiliary maps

using AuxParameter = std::variant<double, ScalarField>;

// rescale_st(mu):     (r, theta, s, t) -> (r, theta, s/mu, mu t)       on the hypersurface chart
// stretch_qp(t):      (q, p) -> (e^t q, e^-t p)                        on T*T^n
// fiber_rescale(f):   (x, y, z; q, p) -> (x, y, z; q, e^{f(x,y,z)} p)
inline SmoothMap named_auxiliary_map(std::string_view kind, const AuxParameter& param, int n = 1) {
  auto number = [&](const char* what) {
    if (!std::holds_alternative<double>(param)) throw std::invalid_argument(std::string(kind) + " takes a number");
    double v = std::get<double>(param);
    if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + " must be finite");
    return v;
  };
  if (kind == "rescale_st") {
    const double mu = number("mu");
    if (!(mu > 0)) throw std::invalid_argument("mu must be positive");
    ChartPtr c = sigma_chart(n);
    std::vector<ScalarField> comps{ScalarField::coordinate(c, 0), ScalarField::coordinate(c, 1)};
    for (int j = 0; j < n; ++j) comps.push_back((1.0 / mu) * ScalarField::coordinate(c, 2 + j));
    for (int j = 0; j < n; ++j) comps.push_back(mu * ScalarField::coordinate(c, 2 + n + j));
    return {c, c, std::move(comps)};
  }
  if (kind == "stretch_qp") {
    const double t = number("t");
    ChartPtr c = cotangent_chart(n);
    std::vector<ScalarField> comps;
    for (int j = 0; j < n; ++j) comps.push_back(std::exp(t) * ScalarField::coordinate(c, j));
    for (int j = 0; j < n; ++j) comps.push_back(std::exp(-t) * ScalarField::coordinate(c, n + j));
    return {c, c, std::move(comps)};
  }
  if (kind == "fiber_rescale") {
    if (!std::holds_alternative<ScalarField>(param)) throw std::invalid_argument("fiber_rescale takes a scalar field");
    ChartPtr c = darboux_cotangent_chart(n);
    ScalarField f = std::get<ScalarField>(param).embed(c);
    ChartPtr line = make_chart("exponent", {"u"});
    ScalarField ef = ScalarField::parse(line, "exp(u)").compose(SmoothMap(c, line, {f}));
    std::vector<ScalarField> comps;
    for (int i = 0; i < 3 + n; ++i) comps.push_back(ScalarField::coordinate(c, i));
    for (int j = 0; j < n; ++j) comps.push_back(ef * ScalarField::coordinate(c, 3 + n + j));
    return {c, c, std::move(comps)};
  }
  throw UnknownKind("unknown auxiliary map '" + std::string(kind) + "'");
}

}  // namespace cforge
