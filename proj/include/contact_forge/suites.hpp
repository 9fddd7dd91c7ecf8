#pragma once

// Verification suites driven by a ScenarioConfig.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <numbers>
#include <string>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "contact_forge/config.hpp"
#include "contact_forge/contact_models.hpp"
#include "contact_forge/embeddings.hpp"
#include "contact_forge/flows.hpp"
#include "contact_forge/geometry.hpp"
#include "contact_forge/report.hpp"

namespace cforge {

inline constexpr int kReportSchema = 1;

// ---------------------------------------------------------------------------
// Random smooth fields for the exterior-calculus corpus

namespace detail {

inline std::string fmt_coef(double c) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", c);
  return buf;
}

// A sum of two or three smooth terms with coefficients in [-1, 1].
inline std::string random_field_text(Rng& rng, const std::vector<std::string>& coords) {
  auto coord = [&]() {
    return coords[std::min(coords.size() - 1, static_cast<std::size_t>(rng.uniform(0.0, static_cast<double>(coords.size()))))];
  };
  auto coef = [&]() { return "(" + fmt_coef(rng.uniform(-1.0, 1.0)) + ")"; };
  const int terms = 2 + static_cast<int>(rng.uniform(0.0, 2.0));
  std::string out;
  for (int k = 0; k < terms; ++k) {
    if (k) out += " + ";
    switch (static_cast<int>(rng.uniform(0.0, 6.0))) {
      case 0: out += coef() + "*sin(" + coef() + "*" + coord() + " + " + coef() + "*" + coord() + ")"; break;
      case 1: out += coef() + "*cos(" + coef() + "*" + coord() + ")*" + coord(); break;
      case 2: out += coef() + "*exp(" + coef() + "*" + coord() + ")"; break;
      case 3: out += coef() + "*" + coord() + "*" + coord(); break;
      case 4: out += coef() + "*" + coord() + "^3"; break;
      default: out += coef(); break;
    }
  }
  return out;
}

inline KForm random_form(Rng& rng, const ChartPtr& chart, int degree) {
  KForm a(chart, degree);
  const int dim = chart->dim();
  for (std::uint32_t I = 0; I <= all_bits(dim); ++I) {
    if (std::popcount(I) != degree) continue;
    if (degree > 0 && rng.uniform(0.0, 1.0) < 0.3) continue;
    a.add(MultiIndex(I), ScalarField::parse(chart, random_field_text(rng, chart->coordinates())));
  }
  return a;
}

inline SmoothMap random_map(Rng& rng, const ChartPtr& src, const ChartPtr& dst) {
  std::vector<ScalarField> comps;
  for (int i = 0; i < dst->dim(); ++i) comps.push_back(ScalarField::parse(src, random_field_text(rng, src->coordinates())));
  return {src, dst, std::move(comps)};
}

inline double relative_gap(double a, double b) { return std::abs(a - b) / (1.0 + std::abs(a) + std::abs(b)); }

inline double form_gap(const KForm& a, const KForm& b, std::span<const double> x) {
  auto va = a.values_at(x), vb = b.values_at(x);
  double m = 0;
  for (const auto& [I, v] : va) {
    auto it = vb.find(I);
    m = std::max(m, relative_gap(v, it == vb.end() ? 0.0 : it->second));
  }
  for (const auto& [I, v] : vb)
    if (!va.count(I)) m = std::max(m, relative_gap(0.0, v));
  return m;
}

inline Point cube_point(Rng& rng, int dim) {
  Point p(static_cast<std::size_t>(dim));
  for (auto& v : p) v = rng.uniform(-1.0, 1.0);
  return p;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Individual checks

inline Report constants_report() {
  Stopwatch clock;
  Constants c = compute_constants();
  Report rep;
  rep.check = "constants";
  rep.samples = 1;
  rep.max_residual = std::abs(c.r_M - 2.0288);
  rep.metrics = to_json(c);
  rep.metrics["margin"] = c.ln76 - c.sharp_bound;
  rep.metrics["u_at_r_M"] = std::abs(u_of_r(c.r_M));
  if (!(rep.max_residual < 5e-4)) {
    rep.status = Status::Fail;
    rep.message = "r_M away from 2.0288";
  } else if (!(c.sharp_bound > 0 && c.ln76 - c.sharp_bound > 5e-3)) {
    rep.status = Status::Fail;
    rep.message = "sharp bound not below ln(7/6) with margin 5e-3";
  }
  rep.witness = std::vector<double>{c.r_M, c.sharp_bound};
  rep.wall_time = clock.seconds();
  return rep;
}

// Sign pattern of g on a grid over [0, pi + delta], with crossings refined.
inline Report g_profile_report(int points, double delta = kDefaultDelta) {
  Stopwatch clock;
  if (points < 3) throw std::invalid_argument("g profile needs at least 3 points");
  const double top = std::numbers::pi + delta;
  std::vector<double> r(static_cast<std::size_t>(points)), g(r.size());
  double gmax = -1e300;
  for (int k = 0; k < points; ++k) {
    r[static_cast<std::size_t>(k)] = top * k / (points - 1);
    g[static_cast<std::size_t>(k)] = scaling_factor(r[static_cast<std::size_t>(k)]);
    gmax = std::max(gmax, g[static_cast<std::size_t>(k)]);
  }
  std::vector<double> crossings;
  std::vector<int> signs{g[0] > 0 ? 1 : -1};
  for (std::size_t k = 1; k < r.size(); ++k) {
    if ((g[k - 1] > 0) != (g[k] > 0)) {
      std::uintmax_t iters = 200;
      auto [a, b] = boost::math::tools::toms748_solve([](double x) { return scaling_factor(x); }, r[k - 1], r[k], g[k - 1],
                                                      g[k], boost::math::tools::eps_tolerance<double>(52), iters);
      crossings.push_back(0.5 * (a + b));
      signs.push_back(g[k] > 0 ? 1 : -1);
    }
  }
  const double rM = find_r_M();
  Report rep;
  rep.check = "g_profile";
  rep.parameters = {{"points", points}, {"delta", delta}};
  rep.samples = points;
  rep.witness = crossings;
  rep.metrics["max_g"] = gmax;
  rep.metrics["crossings"] = crossings;
  rep.metrics["expected_crossings"] = {std::numbers::pi / 2, rM};
  if (signs != std::vector<int>{-1, 1, -1}) {
    rep.status = Status::Fail;
    rep.message = "sign pattern of g is not negative/positive/negative";
    rep.max_residual = std::numeric_limits<double>::infinity();
  } else {
    rep.max_residual = std::max(std::abs(crossings[0] - std::numbers::pi / 2), std::abs(crossings[1] - rM));
    if (!(rep.max_residual < 1e-6)) {
      rep.status = Status::Fail;
      rep.message = "crossing away from pi/2 or r_M";
    } else if (!(gmax > 0 && gmax < 0.1)) {
      rep.status = Status::Fail;
      rep.message = "max g outside (0, 0.1)";
    }
  }
  rep.wall_time = clock.seconds();
  return rep;
}

inline Report bound_on_G_report(int radii, int threads = 1) {
  Stopwatch clock;
  Constants c = compute_constants();
  ScanResult s = sup_G_scan(radii, {}, threads);
  Report rep;
  rep.check = "bound_on_G";
  rep.parameters = {{"radii", radii}};
  rep.samples = radii;
  rep.max_residual = std::abs(c.sharp_bound - s.max_G);
  rep.witness = std::vector<double>{s.r, s.t};
  rep.metrics["sup_G"] = s.max_G;
  rep.metrics["sharp_bound"] = c.sharp_bound;
  rep.metrics["ln_7_6"] = c.ln76;
  if (!(s.max_G < c.ln76 - 5e-3)) {
    rep.status = Status::Fail;
    rep.message = "sup G not below ln(7/6) - 5e-3";
  } else if (!(s.max_G <= c.sharp_bound + 1e-9 && c.sharp_bound - s.max_G <= 1e-2)) {
    rep.status = Status::Fail;
    rep.message = "sup G not within 1e-2 below the sharp bound";
  }
  rep.wall_time = clock.seconds();
  return rep;
}

// G(r, T_r) against ln(r_M sin r_M / (r sin r)) for radii in (pi/2, r_M].
inline Report G_closed_form_report(int radii, int threads = 1) {
  const double rM = find_r_M();
  std::vector<Point> pts;
  for (int k = 1; k <= radii; ++k) pts.push_back({std::numbers::pi / 2 + (rM - std::numbers::pi / 2) * k / radii});
  Report rep = sweep("G_closed_form", pts, [&](const Point& p) {
    const HittingTime ht = hitting_time(p[0], rM);
    const double res = std::abs(G_value(p[0], ht.T) - G_closed_form(p[0], rM));
    return SampleResult{res, res < 1e-6, "closed form mismatch"};
  }, threads);
  rep.parameters = {{"radii", radii}, {"r_M", rM}};
  return rep;
}

inline Report conformal_scaling_report(const ScenarioConfig& cfg, Rng& rng) {
  const auto& c = cfg.conformal_scaling;
  BoxRegion region(c.h, c.delta, c.r_min);
  Report rep = verify_conformal_scaling(make_field_X(), make_alpha_ot(), make_scaling_g(), c.samples, region, rng,
                                        c.tolerance, cfg.threads);
  rep.parameters["tolerance"] = c.tolerance;
  return rep;
}

inline Report squeeze_report(const ScenarioConfig& cfg, Rng& rng) {
  const auto& s = cfg.squeeze;
  SqueezeOptions opt;
  opt.target_factor = s.target_factor;
  opt.delta = s.delta;
  opt.n = s.n;
  opt.threads = cfg.threads;
  return verify_squeeze(s.h, s.h_prime, s.c, s.samples, rng, opt);
}

inline std::vector<Report> unwrap_reports(const ScenarioConfig& cfg, Rng& rng) {
  const auto& u = cfg.unwrap;
  std::vector<Report> out;
  for (int n : u.n) {
    UnwrapParams p{n, u.hbars ? *u.hbars : choose_hbars(n, u.epsilon, u.C, u.delta), u.C, u.epsilon, u.delta};
    Report rep = verify_unwrap(p, u.samples, rng, cfg.threads);
    rep.check = "unwrap_n" + std::to_string(n);
    out.push_back(std::move(rep));
  }
  return out;
}

inline std::vector<Report> legendrian_reports(const ScenarioConfig& cfg, Rng& rng) {
  const auto& l = cfg.legendrian;
  BumpFunction bump(l.bump_lo, l.bump_hi);
  Report a = verify_legendrian(unknot_embedding(l.n), l.samples, rng, cfg.threads);
  a.check = "legendrian_unknot";
  Report b = verify_legendrian(deformed_sphere_embedding(l.n, bump), l.samples, rng, cfg.threads);
  b.check = "legendrian_deformed_sphere";
  Report c = verify_constraint_family(l.n, bump, {0.0, 0.25, 0.5, 0.75, 1.0}, std::max(1, l.samples / 5), rng);
  return {a, b, c};
}

// d∘d = 0, naturality, Leibniz, functoriality and AD against central
// differences over a random corpus on R^4 (maps from R^3 and R^2).
inline std::vector<Report> exterior_calculus_reports(const ScenarioConfig& cfg, Rng& rng) {
  const int N = cfg.exterior_calculus.samples;
  ChartPtr c4 = make_chart("corpus4", {"x1", "x2", "x3", "x4"});
  ChartPtr c3 = make_chart("corpus3", {"u1", "u2", "u3"});
  ChartPtr c2 = make_chart("corpus2", {"v1", "v2"});
  std::vector<Report> out;
  const double tol = 1e-9;

  struct Instance {
    std::vector<KForm> forms;
    std::vector<SmoothMap> maps;
    int degree;
  };
  auto run = [&](const std::string& name, auto make, auto check) {
    std::vector<Instance> corpus;
    std::vector<Point> pts;
    for (int i = 0; i < N; ++i) {
      corpus.push_back(make(i));
      pts.push_back(detail::cube_point(rng, corpus.back().maps.empty() ? 4 : corpus.back().maps.back().source()->dim()));
    }
    Report rep = sweep(name, pts, [&](const Point& x, std::size_t i) { return check(corpus[i], x); }, cfg.threads);
    rep.parameters = {{"corpus", N}, {"tolerance", name == "ext_ad_vs_fd" ? 1e-6 : tol}};
    out.push_back(std::move(rep));
  };

  run("ext_dd", [&](int i) { return Instance{{detail::random_form(rng, c4, i % 3)}, {}, i % 3}; },
      [&](const Instance& in, const Point& x) {
        KForm dd = exterior_derivative(exterior_derivative(in.forms[0]));
        double m = 0;
        for (const auto& [I, v] : dd.values_at(x)) m = std::max(m, std::abs(v));
        return SampleResult{m, m < tol, "d(d a) does not vanish"};
      });
  run("ext_naturality",
      [&](int i) { return Instance{{detail::random_form(rng, c4, i % 3)}, {detail::random_map(rng, c3, c4)}, i % 3}; },
      [&](const Instance& in, const Point& x) {
        const SmoothMap& m = in.maps[0];
        const double r = detail::form_gap(pullback(m, exterior_derivative(in.forms[0])),
                                          exterior_derivative(pullback(m, in.forms[0])), x);
        return SampleResult{r, r < tol, "pullback does not commute with d"};
      });
  run("ext_leibniz",
      [&](int i) {
        const int k = i % 2;
        return Instance{{detail::random_form(rng, c4, k), detail::random_form(rng, c4, 1)}, {}, k};
      },
      [&](const Instance& in, const Point& x) {
        const KForm &a = in.forms[0], &b = in.forms[1];
        KForm lhs = exterior_derivative(wedge(a, b));
        KForm rhs = wedge(exterior_derivative(a), b) + (in.degree % 2 ? -1.0 : 1.0) * wedge(a, exterior_derivative(b));
        const double r = detail::form_gap(lhs, rhs, x);
        return SampleResult{r, r < tol, "Leibniz rule violated"};
      });
  run("ext_functoriality",
      [&](int i) {
        return Instance{{detail::random_form(rng, c4, 1 + i % 2)},
                        {detail::random_map(rng, c3, c4), detail::random_map(rng, c2, c3)},
                        1 + i % 2};
      },
      [&](const Instance& in, const Point& x) {
        const SmoothMap &phi = in.maps[0], &psi = in.maps[1];
        const double r = detail::form_gap(pullback(compose(phi, psi), in.forms[0]), pullback(psi, pullback(phi, in.forms[0])), x);
        return SampleResult{r, r < tol, "pullback is not functorial"};
      });
  run("ext_ad_vs_fd", [&](int) { return Instance{{detail::random_form(rng, c4, 0)}, {}, 0}; },
      [&](const Instance& in, const Point& x) {
        const ScalarField f = in.forms[0].coefficient(MultiIndex(0));
        const auto grad = f.gradient(x);
        double m = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
          Point a = x, b = x;
          const double h = 1e-5;
          a[i] += h;
          b[i] -= h;
          m = std::max(m, std::abs(grad[i] - (f(a) - f(b)) / (2 * h)) / (1.0 + std::abs(grad[i])));
        }
        return SampleResult{m, m < 1e-6, "derivative disagrees with central differences"};
      });
  return out;
}

// Characteristic foliation on the disk, Moser fields for conformal pairs, Reeb fields.
inline std::vector<Report> pointwise_solver_reports(const ScenarioConfig& cfg, Rng& rng) {
  std::vector<Report> out;
  {
    ChartPtr disk = make_chart("disk", {"r", "theta"}, {false, true},
                               [](std::span<const double> x) { return x[0] > kPolarMinRadius; });
    KForm beta = KForm::from_terms(disk, 1, {{{"theta"}, "r*sin(r)"}});
    KForm vol = KForm::from_terms(disk, 2, {{{"r", "theta"}, "r"}});
    std::vector<Point> pts;
    const int R = cfg.pointwise_solvers.radii;
    for (int k = 1; k <= R; ++k) pts.push_back({std::numbers::pi * k / R, rng.uniform(-std::numbers::pi, std::numbers::pi)});
    Report rep = sweep("characteristic_foliation", pts, [&](const Point& x) {
      Vector X = characteristic_foliation_vector(beta, vol, x);
      const double r = std::max(std::abs(X[0] - std::sin(x[0])), std::abs(X[1]));
      return SampleResult{r, r < 1e-8, "field differs from sin(r) d/dr"};
    }, cfg.threads);
    rep.parameters = {{"radii", R}};
    out.push_back(std::move(rep));
  }
  {
    ChartPtr c = darboux_chart(1);
    KForm a0 = make_standard_form(1);
    const int N = cfg.pointwise_solvers.samples;
    std::vector<KForm> a1s;
    std::vector<double> taus;
    std::vector<Point> pts;
    for (int k = 0; k < N; ++k) {
      const double a = rng.uniform(-0.5, 0.5), b = rng.uniform(-0.5, 0.5);
      a1s.push_back(ScalarField::parse(c, "exp((" + detail::fmt_coef(a) + ")*sin(x) + (" + detail::fmt_coef(b) + ")*z*y)") * a0);
      taus.push_back(rng.uniform(0.0, 1.0));
      pts.push_back(detail::cube_point(rng, 3));
    }
    Report rep = sweep("moser", pts, [&](const Point& x, std::size_t i) {
      const double tau = taus[i];
      const KForm& a1 = a1s[i];
      Vector X = moser_vector(a0, a1, tau, x);
      KForm at = (1 - tau) * a0 + tau * a1;
      KForm adot = a1 - a0;
      KForm dat = exterior_derivative(at);
      Vector R = reeb_vector(at, dat, x);
      const double f = evaluate_form(adot, x, {R});
      double r = std::abs(evaluate_form(at, x, {X}));
      for (int j = 0; j < 3; ++j) {
        const Vector e = basis_vector(3, j);
        r = std::max(r, std::abs(evaluate_form(dat, x, {X, e}) - f * evaluate_form(at, x, {e}) + evaluate_form(adot, x, {e})));
      }
      return SampleResult{r, r < 1e-9, "Moser equations not satisfied"};
    }, cfg.threads);
    rep.parameters = {{"instances", N}};
    out.push_back(std::move(rep));
  }
  {
    ContactModel m = alpha_ot_lambda_model(1);
    ProductRegion region(std::make_shared<BoxRegion>(1.0), std::make_shared<CubeBundleRegion>(1, 1.0));
    auto pts = region.sample_many(rng, cfg.pointwise_solvers.samples);
    const int dim = m.chart()->dim();
    Report rep = sweep("reeb", pts, [&](const Point& x) {
      Vector R = reeb_vector(m, x);
      double r = std::abs(evaluate_form(m.alpha(), x, {R}) - 1.0);
      for (int j = 0; j < dim; ++j) r = std::max(r, std::abs(evaluate_form(m.d_alpha(), x, {R, basis_vector(dim, j)})));
      return SampleResult{r, r < 1e-9, "Reeb equations not satisfied"};
    }, cfg.threads);
    rep.parameters = {{"model", m.name()}};
    out.push_back(std::move(rep));
  }
  return out;
}

inline std::vector<Report> contact_condition_reports(const ScenarioConfig& cfg, Rng& rng) {
  const int N = cfg.contact_condition.samples;
  std::vector<Report> out;
  auto add = [&](const ContactModel& m, const Region& region) {
    Report rep = contact_condition_report(m, N, region, rng);
    rep.check = "contact_condition_" + m.name();
    out.push_back(std::move(rep));
  };
  add(alpha_ot_model(), BoxRegion(5.0));
  for (int n = 1; n <= 2; ++n)
    add(alpha_ot_lambda_model(n), ProductRegion(std::make_shared<BoxRegion>(5.0), std::make_shared<CubeBundleRegion>(n, 1.0)));
  for (int n = 1; n <= 3; ++n) {
    const int d = 2 * n + 1;
    add(standard_model(n), CubeRegion(std::vector<double>(static_cast<std::size_t>(d), -2.0),
                                      std::vector<double>(static_cast<std::size_t>(d), 2.0)));
  }
  return out;
}

inline std::vector<Report> custom_reports(const CustomScenario& c, Rng& rng, int threads = 1) {
  ChartPtr chart = make_chart("custom", c.coordinates);
  const auto dim = static_cast<std::size_t>(chart->dim());
  CubeRegion region(std::vector<double>(dim, c.lo), std::vector<double>(dim, c.hi));
  std::vector<Report> out;
  if (c.alpha.empty()) return out;
  std::vector<std::pair<std::vector<std::string>, std::string>> terms;
  for (const auto& [coord, text] : c.alpha) terms.push_back({{coord}, text});
  KForm alpha = KForm::from_terms(chart, 1, terms);
  Report cc = contact_condition_report(ContactModel("custom", alpha), c.samples, region, rng);
  cc.check = "custom_contact_condition";
  out.push_back(std::move(cc));
  if (!c.field.empty() && c.g) {
    std::vector<std::string> comps(dim, "0");
    for (const auto& [coord, text] : c.field) comps[static_cast<std::size_t>(chart->require_index(coord))] = text;
    Report cs = verify_conformal_scaling(VectorField::parse(chart, comps), alpha, ScalarField::parse(chart, *c.g), c.samples,
                                         region, rng, 1e-7, threads);
    cs.check = "custom_conformal_scaling";
    out.push_back(std::move(cs));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Running a scenario

inline std::uint64_t suite_seed(std::uint64_t seed, std::size_t suite_index) {
  return seed + 0x9E3779B97F4A7C15ULL * (suite_index + 1);
}

inline std::vector<Report> run_one_suite(const std::string& name, const ScenarioConfig& cfg) {
  const auto& names = suite_names();
  const auto idx = static_cast<std::size_t>(std::find(names.begin(), names.end(), name) - names.begin());
  if (idx == names.size()) throw UnknownKind("unknown suite '" + name + "'");
  Rng rng(suite_seed(cfg.seed, idx));
  std::vector<Report> out;
  try {
    if (name == "constants") out = {constants_report()};
    else if (name == "g_profile") out = {g_profile_report(cfg.g_profile.points, cfg.g_profile.delta)};
    else if (name == "bound_on_G")
      out = {bound_on_G_report(cfg.bound_on_G.radii, cfg.threads), G_closed_form_report(cfg.bound_on_G.closed_form_radii, cfg.threads)};
    else if (name == "conformal_scaling") out = {conformal_scaling_report(cfg, rng)};
    else if (name == "squeeze") out = {squeeze_report(cfg, rng)};
    else if (name == "unwrap") out = unwrap_reports(cfg, rng);
    else if (name == "legendrian") out = legendrian_reports(cfg, rng);
    else if (name == "exterior_calculus") out = exterior_calculus_reports(cfg, rng);
    else if (name == "pointwise_solvers") out = pointwise_solver_reports(cfg, rng);
    else if (name == "contact_condition") out = contact_condition_reports(cfg, rng);
    else if (name == "custom" && cfg.custom) out = custom_reports(*cfg.custom, rng, cfg.threads);
  } catch (const std::exception& e) {
    out = {error_report(name, e.what())};
  }
  for (auto& r : out) r.seed = cfg.seed;
  return out;
}

inline std::vector<std::string> selected_suites(const ScenarioConfig& cfg) {
  std::vector<std::string> out;
  for (const auto& n : suite_names()) {
    const bool chosen = cfg.suites.empty() ? (n != "custom" || cfg.custom.has_value())
                                           : std::find(cfg.suites.begin(), cfg.suites.end(), n) != cfg.suites.end();
    if (chosen) out.push_back(n);
  }
  return out;
}

// Runs the selected suites (concurrently if `parallel`) and returns the
// reports sorted by check name.
inline std::vector<Report> run_scenario(const ScenarioConfig& cfg, bool parallel = false) {
  const auto suites = selected_suites(cfg);
  std::vector<std::vector<Report>> parts(suites.size());
  if (parallel) {
    std::vector<std::future<std::vector<Report>>> futs;
    for (const auto& s : suites) futs.push_back(std::async(std::launch::async, [&cfg, s] { return run_one_suite(s, cfg); }));
    for (std::size_t i = 0; i < futs.size(); ++i) parts[i] = futs[i].get();
  } else {
    for (std::size_t i = 0; i < suites.size(); ++i) parts[i] = run_one_suite(suites[i], cfg);
  }
  std::vector<Report> all;
  for (auto& p : parts)
    for (auto& r : p) all.push_back(std::move(r));
  std::stable_sort(all.begin(), all.end(), [](const Report& a, const Report& b) { return a.check < b.check; });
  return all;
}

// 0 if every report passed, 2 if any errored, else 1.
inline int exit_code(const std::vector<Report>& reports) {
  int code = 0;
  for (const auto& r : reports) {
    if (r.status == Status::Error) return 2;
    if (r.status == Status::Fail) code = 1;
  }
  return code;
}

inline json reports_json(const std::vector<Report>& reports) {
  json j;
  j["schema"] = kReportSchema;
  j["reports"] = json::array();
  for (const auto& r : reports) j["reports"].push_back(to_json(r));
  return j;
}

}  // namespace cforge
