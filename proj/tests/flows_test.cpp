#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "contact_forge/flows.hpp"
#include "test_support.hpp"

using namespace cforge;
using std::numbers::pi;

namespace {

// Fixed-step classical RK4 on the radial equation, used as an independent oracle.
std::pair<double, double> rk4_radial(double r, double T, int steps) {
  auto f = [](double y) { return std::array<double, 2>{radial_coefficient(y), scaling_factor(y)}; };
  double y = r, G = 0, h = T / steps;
  for (int k = 0; k < steps; ++k) {
    auto k1 = f(y);
    auto k2 = f(y + 0.5 * h * k1[0]);
    auto k3 = f(y + 0.5 * h * k2[0]);
    auto k4 = f(y + h * k3[0]);
    G += h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]);
    y += h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]);
  }
  return {y, G};
}

}  // namespace

TEST(IntegrateFlow, LinearContraction) {
  auto c = make_chart("line", {"z"});
  VectorField v = VectorField::parse(c, {"-z"});
  FlowResult res = integrate_flow(v, Point{1.0}, 1.0);
  EXPECT_NEAR(res.end[0], std::exp(-1.0), 1e-9);
  EXPECT_GT(res.stats.accepted, 0u);
  FlowResult back = integrate_flow(v, Point{res.end[0]}, -1.0);
  EXPECT_NEAR(back.end[0], 1.0, 1e-9);
}

TEST(IntegrateFlow, CriticalCylinder) {
  VectorField X = make_field_X();
  for (double T : {1.0, 10.0, 50.0}) EXPECT_NEAR(integrate_flow(X, Point{pi, 0.2, 0.0}, T).end[0], pi, 1e-9);
}

TEST(IntegrateFlow, Attractor) {
  VectorField X = make_field_X();
  FlowResult res = integrate_flow(X, Point{2.0, 0.0, 0.5}, 20.0);
  EXPECT_NEAR(res.end[0], pi, 1e-6);
  EXPECT_NEAR(res.end[2], 0.5 * std::exp(-20.0), 1e-12);
  EXPECT_NEAR(res.end[0], rk4_radial(2.0, 20.0, 20000).first, 1e-9);
}

TEST(IntegrateFlow, CompanionIntegral) {
  FlowResult res = integrate_flow(make_field_X(), Point{1.8, 0.0, 0.0}, 3.0, {}, make_scaling_g());
  auto [F, G] = rk4_radial(1.8, 3.0, 30000);
  EXPECT_NEAR(res.end[0], F, 1e-9);
  EXPECT_NEAR(res.G, G, 1e-9);
}

TEST(IntegrateFlow, Errors) {
  auto c = make_chart("line", {"z"}, {}, [](std::span<const double> x) { return x[0] < 2.0; });
  VectorField grow = VectorField::parse(c, {"1"});
  EXPECT_THROW(integrate_flow(grow, Point{0.0}, 5.0), LeftDomain);
  auto c2 = make_chart("line2", {"z"});
  VectorField blow = VectorField::parse(c2, {"z^2"});
  EXPECT_THROW(integrate_flow(blow, Point{1.0}, 2.0), StepSizeUnderflow);
}

TEST(RadialF, Examples) {
  EXPECT_NEAR(radial_F(pi / 2, 5), pi / 2, 1e-9);
  double prev = 1.0;
  for (int k = 1; k <= 20; ++k) {
    double F = radial_F(1.0, 0.5 * k);
    EXPECT_LT(F, prev);
    EXPECT_GT(F, 0);
    prev = F;
  }
  EXPECT_NEAR(radial_F(2.5, 30), pi, 1e-6);
}

TEST(GValue, Examples) {
  for (double r : {0.0, 0.5, 2.0, 3.1}) EXPECT_EQ(G_value(r, 0.0), 0.0);
  EXPECT_LT(G_value(1.0, 10.0), 0.0);
  const double rM = find_r_M();
  const double Tr = hitting_time(2.0, rM).T;
  double prev = G_value(2.0, Tr);
  for (int k = 1; k <= 20; ++k) {
    double G = G_value(2.0, Tr + 0.5 * k);
    EXPECT_LE(G, prev + 1e-12);
    prev = G;
  }
}

TEST(Constants, RM) {
  const double rM = find_r_M();
  EXPECT_NEAR(rM, 2.0288, 5e-5);
  EXPECT_LT(std::abs(u_of_r(rM)), 1e-12);
  EXPECT_GT(rM, pi / 2);
  EXPECT_LT(rM, pi);
  EXPECT_NEAR(rM, -std::tan(rM), 1e-11);
}

TEST(Constants, Invariants) {
  Constants c = compute_constants();
  EXPECT_GT(c.sharp_bound, 0);
  EXPECT_LT(c.sharp_bound, c.ln76);
  EXPECT_LT(c.ln76, 0.1542);
  EXPECT_GT(c.g_max, 0);
  EXPECT_LT(c.g_max, 0.1);
  // grid oracle for g_max
  double gm = 0;
  for (int k = 0; k <= 100000; ++k) gm = std::max(gm, scaling_factor((pi + 0.1) * k / 100000));
  EXPECT_NEAR(c.g_max, gm, 1e-9);
}

TEST(GClosedForm, Examples) {
  const double rM = find_r_M();
  const double sharp = std::log(2 * rM * std::sin(rM) / pi);
  EXPECT_EQ(G_closed_form(rM, rM), 0.0);
  EXPECT_NEAR(G_closed_form(pi / 2 + 1e-9, rM), sharp, 1e-6);
  HittingTime ht = hitting_time(1.8, rM);
  EXPECT_LT(std::abs(G_closed_form(1.8, rM) - ht.G), 1e-6);
  EXPECT_NEAR(radial_F(1.8, ht.T), rM, 1e-9);
  EXPECT_THROW(G_closed_form(1.0, rM), DomainError);
  EXPECT_THROW(G_closed_form(2.5, rM), DomainError);
}

TEST(GClosedForm, MonotoneMaximumAtHittingTime) {
  const double rM = find_r_M();
  for (double r : {1.6, 1.7, 1.9, 2.0}) {
    HittingTime ht = hitting_time(r, rM);
    for (int k = 1; k <= 10; ++k) {
      const double dt = 0.2 * k;
      EXPECT_LE(G_value(r, ht.T + dt), ht.G + 1e-12);
      if (ht.T - dt > 0) {
        EXPECT_LE(G_value(r, ht.T - dt), ht.G + 1e-12);
      }
    }
  }
}

TEST(SupGScan, BoundAndWitness) {
  const double rM = find_r_M();
  const double sharp = std::log(2 * rM * std::sin(rM) / pi);
  ScanResult s = sup_G_scan(1000, {}, 4);
  EXPECT_LT(s.max_G, std::log(7.0 / 6.0));
  EXPECT_LE(s.max_G, sharp + 1e-4);
  EXPECT_GE(s.max_G, sharp - 1e-2);
  EXPECT_GT(s.r, pi / 2);
  EXPECT_LT(s.r, rM);
  EXPECT_EQ(s.rows.size(), 1000u);
  // deterministic regardless of thread count
  ScanResult s1 = sup_G_scan(1000, {}, 1);
  EXPECT_EQ(s1.max_G, s.max_G);
  EXPECT_EQ(s1.r, s.r);
}

TEST(FixedPoints, StayPut) {
  for (int k = 0; k <= 2; ++k)
    for (double t : {0.0, 1.0, 10.0, 100.0}) EXPECT_LT(std::abs(radial_F(k * pi / 2, t) - k * pi / 2), 1e-9);
}

TEST(FixedPoints, AttractionAndRepulsion) {
  cftest::Rng rng(3);
  for (int k = 0; k < 20; ++k) {
    double r = rng.uniform(pi / 2 + 0.01, pi + 0.1);
    double prev_gap = std::abs(r - pi);
    for (int j = 1; j <= 10; ++j) {
      double gap = std::abs(radial_F(r, 3.0 * j) - pi);
      EXPECT_LE(gap, prev_gap + 1e-12);
      prev_gap = gap;
    }
    EXPECT_LT(prev_gap, 1e-6);
    double s = rng.uniform(0.01, pi / 2 - 0.01);
    double prev = s;
    for (int j = 1; j <= 10; ++j) {
      double F = radial_F(s, 5.0 * j);
      EXPECT_LE(F, prev);
      prev = F;
    }
    EXPECT_LT(prev, 1e-3);
  }
}

TEST(Solver, HalvingTolerancesIsStable) {
  OdeSolverConfig loose, tight;
  tight.rtol = loose.rtol / 2;
  tight.atol = loose.atol / 2;
  for (double r : {0.3, 1.0, 1.6, 1.8, 2.0, 2.5, 3.2}) {
    for (double t : {1.0, 5.0, 20.0}) {
      auto a = radial_flow(r, t, loose);
      auto b = radial_flow(r, t, tight);
      EXPECT_LT(std::abs(a.end[0] - b.end[0]), 1e-8);
      EXPECT_LT(std::abs(a.G - b.G), 1e-8);
    }
  }
}

TEST(Squeeze, PointExamples) {
  Point p{1.3, 0.4, 0.7, 0.1, 0.5};
  Point img = squeeze_point(std::exp(1.0), 1.0, p);
  EXPECT_NEAR(img[2], std::exp(-1.0) * 0.7, 1e-9);
  EXPECT_NEAR(img[0], radial_F(1.3, 1.0), 1e-15);
  EXPECT_EQ(img[1], 0.4);
  EXPECT_EQ(img[3], 0.1);
  EXPECT_NEAR(img[4], std::exp(G_value(1.3, 1.0)) * 0.5, 1e-15);
  const double sup = sup_G_scan(200).max_G;
  for (double r : {0.5, 1.6, 1.7, 2.0, 3.0}) {
    Point q{r, 0, 0.2, 0.0, 0.9};
    Point im = squeeze_point(5.0, 1.0, q);
    EXPECT_LE(std::abs(im[4]), std::exp(sup) * 0.9 + 1e-12);
    EXPECT_LT(std::abs(im[4]), 7.0 / 6.0 * 0.9);
  }
}

TEST(Squeeze, MatchesFullFlow) {
  // the decomposition Φ^{X̂}_T = (Φ^X_T, e^{G} p) against direct integration of X̂
  VectorField Xh = make_field_X_hat(2);
  cftest::Rng rng(5);
  for (int k = 0; k < 10; ++k) {
    Point p{rng.uniform(0.05, pi + 0.09), rng.uniform(-pi, pi), rng.uniform(-5, 5),
            rng.uniform(-pi, pi), rng.uniform(-pi, pi), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)};
    Point a = squeeze_point(5.0, 1.0, p);
    Point b = integrate_flow(Xh, p, std::log(5.0)).end;
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-8) << i;
  }
}

TEST(Squeeze, Verify) {
  Rng rng(7);
  Report rep = verify_squeeze(5, 1, 1, 2000, rng);
  EXPECT_EQ(rep.status, Status::Pass) << rep.message;
  EXPECT_LT(rep.metrics["max_fiber_factor"].get<double>(), 7.0 / 6.0);
  EXPECT_GT(rep.metrics["empirical_mu0"].get<double>(), 1.14);
  EXPECT_LT(rep.metrics["empirical_mu0"].get<double>(), 7.0 / 6.0);

  Rng r2(7);
  Report id = verify_squeeze(1, 1, 1, 200, r2, {.track_sup = false});
  EXPECT_EQ(id.status, Status::Pass);
  EXPECT_EQ(id.parameters["T"].get<double>(), 0.0);

  Rng r3(7);
  Report bad = verify_squeeze(5, 0.05, 1, 2000, r3, {.target_factor = 1.01, .track_sup = false});
  EXPECT_EQ(bad.status, Status::Fail);
  ASSERT_TRUE(bad.witness);
  EXPECT_GT((*bad.witness)[0], pi / 2);
  EXPECT_LT((*bad.witness)[0], 1.8);
  EXPECT_GT(bad.metrics["max_fiber_factor"].get<double>(), 1.15);
}

TEST(LieDerivative, FlowOracle) {
  // (Φ_t^* a − a)/t against L_v a at t = 1e-5, DΦ_t by central differences of the flow
  auto c = make_chart("c3", {"x", "y", "w"});
  VectorField v = VectorField::parse(c, {"sin(y)", "x*w", "cos(x) - w"});
  KForm a = KForm::from_terms(c, 1, {{{"x"}, "y*w"}, {{"y"}, "exp(x)"}, {{"w"}, "x^2"}});
  KForm L = lie_derivative(v, a);
  OdeSolverConfig cfg;
  cfg.rtol = 1e-14;
  cfg.atol = 1e-16;
  const double t = 1e-5, h = 1e-4;
  cftest::Rng rng(9);
  for (int k = 0; k < 10; ++k) {
    Point p = rng.vec(3, -1, 1);
    Point q = integrate_flow(v, p, t, cfg).end;
    for (int i = 0; i < 3; ++i) {
      Point pp = p, pm = p;
      pp[static_cast<std::size_t>(i)] += h;
      pm[static_cast<std::size_t>(i)] -= h;
      Point fp = integrate_flow(v, pp, t, cfg).end, fm = integrate_flow(v, pm, t, cfg).end;
      Vector col(3);
      for (int j = 0; j < 3; ++j) col[static_cast<std::size_t>(j)] = (fp[static_cast<std::size_t>(j)] - fm[static_cast<std::size_t>(j)]) / (2 * h);
      const double pulled = evaluate_form(a, q, {col});
      const double fd = (pulled - evaluate_form(a, p, {basis_vector(3, i)})) / t;
      EXPECT_NEAR(fd, evaluate_form(L, p, {basis_vector(3, i)}), 1e-4);
    }
  }
}

TEST(Portrait, Attractor) {
  auto rows = flow_portrait({0.5, 1.5, 2.5}, 50.0, 51);
  EXPECT_EQ(rows.size(), 153u);
  EXPECT_NEAR(rows.back().r, pi, 1e-4);
  EXPECT_EQ(rows.back().t, 50.0);
}
