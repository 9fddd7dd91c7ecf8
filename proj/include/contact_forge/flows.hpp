#pragma once

// Integration of the squeezing flow and the constants of its fiber-scaling
// bound.
//
// On (r, theta, z) the field X = f(r) ∂_r - z ∂_z decouples: F(r, t) solves
// y' = f(y), y(0) = r, and the conformal integral G(r, t) = ∫_0^t g(F(r, s)) ds
// rides along as an extra state component.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/tools/minima.hpp>
#include <boost/numeric/odeint.hpp>

#include "contact_forge/contact_models.hpp"
#include "contact_forge/geometry.hpp"
#include "contact_forge/report.hpp"

namespace cforge {

struct OdeSolverConfig {
  double rtol = 1e-10;
  double atol = 1e-12;
  double max_step = 1.0;
  double max_time = 1e4;
  std::size_t max_steps = 2'000'000;

  void validate() const {
    if (!(rtol > 0 && atol > 0)) throw std::invalid_argument("solver tolerances must be positive");
    if (!(max_step > 0 && max_time > 0)) throw std::invalid_argument("solver step and time limits must be positive");
  }
};

struct StepStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t steps() const { return accepted + rejected; }
};

struct FlowResult {
  Point end;
  double G = 0.0;
  double t = 0.0;
  StepStats stats;
  std::size_t step_count() const { return stats.steps(); }
};

namespace detail {

using State = std::vector<double>;
using Dopri = boost::numeric::odeint::runge_kutta_dopri5<State>;

// Adaptive Dormand-Prince 5(4) integration with error control, exposing each
// accepted step to a callback that may stop the integration.
template <class Sys>
class Integrator {
 public:
  Integrator(Sys sys, const OdeSolverConfig& cfg)
      : sys_(std::move(sys)), cfg_(cfg), stepper_(boost::numeric::odeint::make_controlled<Dopri>(cfg.atol, cfg.rtol)) {
    cfg_.validate();
  }

  const StepStats& stats() const { return stats_; }

  // Advances y from t to t_end (t_end >= t). on_step(t0, y0, t1, y1) returns
  // false to stop; the stopping time is returned.
  template <class OnStep>
  double advance(State& y, double t, double t_end, OnStep on_step) {
    if (t_end > cfg_.max_time) throw std::invalid_argument("integration time exceeds the configured maximum");
    stepper_.reset();
    double dt = std::min({cfg_.max_step, t_end - t, 1e-3});
    State prev;
    std::size_t steps = 0;
    while (t < t_end) {
      dt = std::min({dt, cfg_.max_step, t_end - t});
      const double floor = 1e-14 * std::max(1.0, std::abs(t));
      if (dt < floor && t_end - t > floor) throw StepSizeUnderflow("step size underflow at t = " + std::to_string(t));
      if (++steps > cfg_.max_steps) throw StepSizeUnderflow("step budget exhausted at t = " + std::to_string(t));
      prev = y;
      const double t0 = t;
      auto res = stepper_.try_step(std::ref(sys_), y, t, dt);
      if (res == boost::numeric::odeint::fail) {
        ++stats_.rejected;
        continue;
      }
      ++stats_.accepted;
      for (double v : y)
        if (!std::isfinite(v)) throw LeftDomain("trajectory became non-finite at t = " + std::to_string(t));
      if (t_end - t < 1e-15 * std::max(1.0, std::abs(t_end))) t = t_end;
      if (!on_step(t0, prev, t, y)) return t;
    }
    return t;
  }

  // State at time t1 starting from (t0, y0), integrated afresh.
  State state_at(const State& y0, double t0, double t1) {
    State y = y0;
    if (t1 > t0) advance(y, t0, t1, [](double, const State&, double, const State&) { return true; });
    return y;
  }

 private:
  Sys sys_;
  OdeSolverConfig cfg_;
  decltype(boost::numeric::odeint::make_controlled<Dopri>(1.0, 1.0)) stepper_;
  StepStats stats_;
};

// Refines a sign change of phi(state) on the step [t0, t1] by the secant
// method (safeguarded by bisection) to |Δt| < tol.
template <class Sys, class Phi>
std::pair<double, State> refine_event(Integrator<Sys>& integ, const State& y0, double t0, double t1, Phi phi,
                                      double tol = 1e-10) {
  double a = t0, b = t1;
  State ya = y0;
  State yb = integ.state_at(y0, t0, t1);
  double fa = phi(ya), fb = phi(yb);
  if (fa == 0) return {a, ya};
  if (fb == 0) return {b, yb};
  for (int it = 0; it < 200 && b - a > tol; ++it) {
    double m = b - fb * (b - a) / (fb - fa);
    if (!(m > a + 0.01 * (b - a) && m < b - 0.01 * (b - a))) m = 0.5 * (a + b);
    State ym = integ.state_at(y0, t0, m);
    double fm = phi(ym);
    if (fm == 0) return {m, ym};
    if ((fm > 0) == (fa > 0)) {
      a = m;
      ya = ym;
      fa = fm;
    } else {
      b = m;
      yb = ym;
      fb = fm;
    }
  }
  return std::abs(fa) < std::abs(fb) ? std::pair{a, ya} : std::pair{b, yb};
}

// (F, G)' = (f(F), g(F))
struct RadialSystem {
  void operator()(const State& y, State& dy, double) const {
    dy[0] = radial_coefficient(y[0]);
    dy[1] = scaling_factor(y[0]);
  }
};

}  // namespace detail

// Integrates v from `point` for time T (negative T flows backwards). When a
// companion scalar field is given, its integral along the trajectory is
// returned in G.
inline FlowResult integrate_flow(const VectorField& v, std::span<const double> point, double T,
                                 const OdeSolverConfig& cfg = {},
                                 const std::optional<ScalarField>& companion = std::nullopt) {
  if (!std::isfinite(T)) throw std::invalid_argument("flow time must be finite");
  const ChartPtr& chart = v.chart();
  if (static_cast<int>(point.size()) != chart->dim()) throw ArityMismatch("point dimension does not match chart");
  if (!chart->contains(point)) throw LeftDomain("initial point outside chart '" + chart->name() + "'");
  if (companion) require_same_chart(companion->chart(), chart, "flow companion");
  const double sign = T < 0 ? -1.0 : 1.0;
  const std::size_t dim = point.size();
  auto sys = [&](const detail::State& y, detail::State& dy, double) {
    std::span<const double> x(y.data(), dim);
    for (std::size_t i = 0; i < dim; ++i) dy[i] = sign * v.components()[i](x);
    dy[dim] = companion ? sign * (*companion)(x) : 0.0;
  };
  detail::Integrator<decltype(sys)> integ(sys, cfg);
  detail::State y(point.begin(), point.end());
  y.push_back(0.0);
  double t = integ.advance(y, 0.0, std::abs(T), [&](double, const detail::State&, double tt, const detail::State& yy) {
    if (!chart->contains(std::span<const double>(yy.data(), dim)))
      throw LeftDomain("trajectory left chart '" + chart->name() + "' at t = " + std::to_string(sign * tt));
    return true;
  });
  FlowResult res;
  res.end.assign(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(dim));
  res.G = y[dim];
  res.t = sign * t;
  res.stats = integ.stats();
  return res;
}

// F(r, t) and G(r, t) together.
inline FlowResult radial_flow(double r, double t, const OdeSolverConfig& cfg = {}) {
  if (!(r >= 0 && r <= std::numbers::pi + 1.0)) throw DomainError("radius outside [0, pi + 1]");
  if (!(t >= 0)) throw std::invalid_argument("flow time must be non-negative");
  detail::Integrator<detail::RadialSystem> integ({}, cfg);
  detail::State y{r, 0.0};
  integ.advance(y, 0.0, t, [](double, const detail::State&, double, const detail::State&) { return true; });
  FlowResult res;
  res.end = {y[0]};
  res.G = y[1];
  res.t = t;
  res.stats = integ.stats();
  return res;
}

inline double radial_F(double r, double t, const OdeSolverConfig& cfg = {}) { return radial_flow(r, t, cfg).end[0]; }
inline double G_value(double r, double t, const OdeSolverConfig& cfg = {}) { return radial_flow(r, t, cfg).G; }

// u(r) = r cos r + sin r; r_M is its root in (pi/2, pi), i.e. r_M = -tan r_M.
inline double u_of_r(double r) { return r * std::cos(r) + std::sin(r); }

inline double find_r_M() {
  double a = std::numbers::pi / 2, b = std::numbers::pi;
  double fa = u_of_r(a), fb = u_of_r(b);
  if (!(fa > 0 && fb < 0)) throw BracketFailure("u does not change sign on (pi/2, pi)");
  while (b - a > 1e-3) {
    double m = 0.5 * (a + b);
    double fm = u_of_r(m);
    if (fm > 0) a = m;
    else b = m;
  }
  double r = 0.5 * (a + b);
  for (int it = 0; it < 50 && std::abs(u_of_r(r)) >= 1e-12; ++it) {
    const double du = 2 * std::cos(r) - r * std::sin(r);
    r -= u_of_r(r) / du;
  }
  if (!(std::abs(u_of_r(r)) < 1e-12) || !(r > std::numbers::pi / 2 && r < std::numbers::pi))
    throw BracketFailure("Newton polish did not converge");
  return r;
}

struct Constants {
  double r_M;
  double sharp_bound;
  double ln76;
  double g_max;
  double g_max_at;
};

inline Constants compute_constants() {
  Constants c{};
  c.r_M = find_r_M();
  c.sharp_bound = std::log(2 * c.r_M * std::sin(c.r_M) / std::numbers::pi);
  c.ln76 = std::log(7.0 / 6.0);
  // g > 0 only on (pi/2, r_M); its maximum lies there.
  auto [at, neg] = boost::math::tools::brent_find_minima([](double r) { return -scaling_factor(r); },
                                                          std::numbers::pi / 2, c.r_M, 52);
  c.g_max = -neg;
  c.g_max_at = at;
  return c;
}

inline json to_json(const Constants& c) {
  return {{"r_M", c.r_M}, {"sharp_bound", c.sharp_bound}, {"ln76", c.ln76}, {"g_max", c.g_max}, {"g_max_at", c.g_max_at}};
}

// G(r, T_r) = ln(r_M sin r_M / (r sin r)) for r in (pi/2, r_M].
inline double G_closed_form(double r, double r_M) {
  if (!(r > std::numbers::pi / 2 && r <= r_M))
    throw DomainError("closed form of G needs r in (pi/2, r_M], got " + std::to_string(r));
  return std::log(r_M * std::sin(r_M) / (r * std::sin(r)));
}
inline double G_closed_form(double r) { return G_closed_form(r, find_r_M()); }

struct HittingTime {
  double T;
  double G;
};

// The unique T_r with F(r, T_r) = r_M, with G(r, T_r), for r in (pi/2, r_M].
inline HittingTime hitting_time(double r, double r_M, const OdeSolverConfig& cfg = {}) {
  if (!(r > std::numbers::pi / 2 && r <= r_M)) throw DomainError("hitting time needs r in (pi/2, r_M]");
  if (r == r_M) return {0.0, 0.0};
  detail::Integrator<detail::RadialSystem> integ({}, cfg);
  detail::State y{r, 0.0};
  std::optional<std::pair<double, detail::State>> hit;
  const double cap = std::min(cfg.max_time, 1000.0);
  integ.advance(y, 0.0, cap, [&](double t0, const detail::State& y0, double t1, const detail::State& y1) {
    if ((y0[0] - r_M) * (y1[0] - r_M) <= 0) {
      hit = detail::refine_event(integ, y0, t0, t1, [&](const detail::State& s) { return s[0] - r_M; });
      return false;
    }
    return true;
  });
  if (!hit) throw BracketFailure("trajectory from r = " + std::to_string(r) + " never reached r_M");
  return {hit->first, hit->second[1]};
}

struct ScanRow {
  double r;
  double max_G;
  double t_at_max;
};

struct ScanResult {
  double max_G = 0.0;
  double r = 0.0;
  double t = 0.0;
  std::vector<ScanRow> rows;
};

// Running maximum of G(r, .) over t >= 0, stopping once F is within `tol` of
// its limit cylinder (0, pi/2 or pi) or at t = t_cap. The maximum sits where g
// changes sign from + to - along the trajectory and is refined there.
inline ScanRow sup_G_along(double r, const OdeSolverConfig& cfg = {}, double tol = 1e-8, double t_cap = 200.0) {
  const double half = std::numbers::pi / 2;
  const double limit = r < half ? 0.0 : (r == half ? half : std::numbers::pi);
  ScanRow row{r, 0.0, 0.0};
  if (std::abs(r - limit) < tol) return row;
  detail::Integrator<detail::RadialSystem> integ({}, cfg);
  detail::State y{r, 0.0};
  integ.advance(y, 0.0, t_cap, [&](double t0, const detail::State& y0, double t1, const detail::State& y1) {
    const double g0 = scaling_factor(y0[0]), g1 = scaling_factor(y1[0]);
    if (g0 > 0 && g1 <= 0) {
      auto [te, ye] = detail::refine_event(integ, y0, t0, t1, [](const detail::State& s) { return scaling_factor(s[0]); });
      if (ye[1] > row.max_G) {
        row.max_G = ye[1];
        row.t_at_max = te;
      }
    }
    if (y1[1] > row.max_G) {
      row.max_G = y1[1];
      row.t_at_max = t1;
    }
    return std::abs(y1[0] - limit) >= tol;
  });
  return row;
}

// Uniform grid of `grid` radii on [0, pi + delta].
inline ScanResult sup_G_scan(int grid, const OdeSolverConfig& cfg = {}, int threads = 1, double delta = kDefaultDelta) {
  if (grid < 100) throw std::invalid_argument("sup_G_scan needs at least 100 grid points");
  ScanResult res;
  res.rows.resize(static_cast<std::size_t>(grid));
  const double top = std::numbers::pi + delta;
  auto work = [&](int begin, int end) {
    for (int j = begin; j < end; ++j) res.rows[static_cast<std::size_t>(j)] = sup_G_along(top * j / (grid - 1), cfg);
  };
  const int t = std::clamp(threads, 1, grid);
  if (t == 1) {
    work(0, grid);
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < t; ++k) pool.emplace_back(work, grid * k / t, grid * (k + 1) / t);
    for (auto& th : pool) th.join();
  }
  for (const auto& row : res.rows)
    if (row.max_G > res.max_G) {
      res.max_G = row.max_G;
      res.r = row.r;
      res.t = row.t_at_max;
    }
  return res;
}

// Image of (r, theta, z; q, p) under the time-ln(h/h') flow of X̂ = X + g Y:
// (F(r, T), theta, e^{-T} z; q, e^{G(r, T)} p).
inline Point squeeze_point(double h, double h_prime, std::span<const double> point, const OdeSolverConfig& cfg = {}) {
  if (!(h > 0 && h_prime > 0)) throw std::invalid_argument("heights must be positive");
  if (h_prime > h) throw std::invalid_argument("target height must not exceed the source height");
  if (point.size() < 3 || (point.size() - 3) % 2) throw ArityMismatch("expected (r, theta, z; q, p)");
  const double T = std::log(h / h_prime);
  auto fr = radial_flow(point[0], T, cfg);
  Point out(point.begin(), point.end());
  out[0] = fr.end[0];
  out[2] = std::exp(-T) * point[2];
  const std::size_t n = (point.size() - 3) / 2;
  const double factor = std::exp(fr.G);
  for (std::size_t j = 0; j < n; ++j) out[3 + n + j] = factor * point[3 + n + j];
  return out;
}

struct SqueezeOptions {
  double target_factor = 7.0 / 6.0;
  double delta = kDefaultDelta;
  int n = 1;
  int threads = 1;
  bool track_sup = true;  // also compute sup_t e^{G} per sample (empirical mu_0)
};

// Samples B(h) x D_{<c}(T*T^n) and checks that the time-ln(h/h') image lies in
// B(h') x D_{<target c}, with image radius below pi + delta.
// The map is linear on each fiber, so the whole fiber disc through a sample
// lands in D_{<target c} iff its fiber factor is at most the target. The
// per-sample residual is the largest of |z'|/h', factor/target and
// r'/(pi + delta); a sample passes iff it is below 1.
inline Report verify_squeeze(double h, double h_prime, double c, int samples, Rng& rng, const SqueezeOptions& opt = {},
                             const OdeSolverConfig& cfg = {}) {
  if (samples < 1) throw std::invalid_argument("samples must be at least 1");
  if (!(c > 0)) throw std::invalid_argument("fiber radius must be positive");
  if (!(opt.target_factor > 0)) throw std::invalid_argument("target factor must be positive");
  ProductRegion region(std::make_shared<BoxRegion>(h, opt.delta, 0.0), std::make_shared<CubeBundleRegion>(opt.n, c));
  auto pts = region.sample_many(rng, samples);
  const double T = std::log(h / h_prime);
  const double r_lim = std::numbers::pi + opt.delta;
  const std::size_t n = static_cast<std::size_t>(opt.n);
  std::vector<double> factor(pts.size(), 0.0), sup_factor(pts.size(), 0.0);
  Report rep = sweep("squeeze", pts, [&](const Point& p, std::size_t i) {
    Point img = squeeze_point(h, h_prime, p, cfg);
    double pn = 0, pn0 = 0;
    for (std::size_t j = 0; j < n; ++j) {
      pn += img[3 + n + j] * img[3 + n + j];
      pn0 += p[3 + n + j] * p[3 + n + j];
    }
    pn = std::sqrt(pn);
    pn0 = std::sqrt(pn0);
    factor[i] = pn0 > 0 ? pn / pn0 : std::exp(radial_flow(p[0], T, cfg).G);
    if (opt.track_sup) sup_factor[i] = std::exp(sup_G_along(p[0], cfg).max_G);
    const double res = std::max({std::abs(img[2]) / h_prime, factor[i] / opt.target_factor, img[0] / r_lim});
    std::string note;
    if (!(res < 1)) {
      note = "fiber image outside B(h') x D_{<" + std::to_string(opt.target_factor) + " c}: fiber factor " +
             std::to_string(factor[i]);
    }
    return SampleResult{res, res < 1, note};
  }, opt.threads);
  rep.parameters = {{"h", h}, {"h_prime", h_prime}, {"c", c}, {"n", opt.n}, {"delta", opt.delta},
                    {"target_factor", opt.target_factor}, {"T", T}};
  rep.metrics["max_fiber_factor"] = *std::max_element(factor.begin(), factor.end());
  if (opt.track_sup) rep.metrics["empirical_mu0"] = *std::max_element(sup_factor.begin(), sup_factor.end());
  rep.seed = rng.seed();
  return rep;
}

// (t, r(t)) samples of the radial flow from each initial radius.
struct PortraitRow {
  double r0;
  double t;
  double r;
};

inline std::vector<PortraitRow> flow_portrait(const std::vector<double>& radii, double t_end, int points,
                                              const OdeSolverConfig& cfg = {}) {
  if (points < 2) throw std::invalid_argument("portrait needs at least two time points");
  std::vector<PortraitRow> rows;
  for (double r0 : radii) {
    detail::Integrator<detail::RadialSystem> integ({}, cfg);
    detail::State y{r0, 0.0};
    double t = 0;
    rows.push_back({r0, 0.0, r0});
    for (int k = 1; k < points; ++k) {
      const double tk = t_end * k / (points - 1);
      integ.advance(y, t, tk, [](double, const detail::State&, double, const detail::State&) { return true; });
      t = tk;
      rows.push_back({r0, tk, y[0]});
    }
  }
  return rows;
}

}  // namespace cforge
