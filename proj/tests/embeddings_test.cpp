#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "contact_forge/embeddings.hpp"
#include "test_support.hpp"

using namespace cforge;
using std::numbers::pi;

namespace {

double max_abs_coefficient(const KForm& a, std::span<const double> x) {
  double m = 0;
  for (const auto& [I, v] : a.values_at(x)) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

TEST(ChooseHbars, Examples) {
  auto h1 = choose_hbars(1, 0.1, 10, 0.5);
  ASSERT_EQ(h1.size(), 1u);
  EXPECT_LT(h1[0], 0.01);
  EXPECT_NEAR(h1[0], 0.009, 1e-15);

  auto h2 = choose_hbars(2, 0.1, 10, 0.5);
  EXPECT_NEAR(h2[1] / h2[0], std::sqrt(1.5), 1e-14);

  cftest::Rng rng(11);
  for (int k = 0; k < 200; ++k) {
    const int n = static_cast<int>(rng.integer(1, 3));
    const double eps = rng.uniform(1e-3, 1), C = rng.uniform(0.1, 50), delta = rng.uniform(1e-3, 1);
    auto h = choose_hbars(n, eps, C, delta);
    double sum = 0;
    for (double v : h) {
      EXPECT_GT(v, 0);
      EXPECT_LE(v, 0.9 * delta / (2 * std::sqrt(n)) * (1 + 1e-14));
      sum += v;
    }
    EXPECT_LE(sum, 0.9 * eps / C * (1 + 1e-14));
    EXPECT_NO_THROW((UnwrapParams{n, h, C, eps, delta}.validate()));
  }
}

TEST(UnwrapParams, Validation) {
  EXPECT_THROW((UnwrapParams{1, {0.02}, 10, 0.1, 0.5}.validate()), std::invalid_argument);
  EXPECT_THROW((UnwrapParams{1, {0.3}, 1, 1.0, 0.5}.validate()), std::invalid_argument);
  EXPECT_THROW((UnwrapParams{2, {0.001}, 1, 1.0, 0.5}.validate()), std::invalid_argument);
  EXPECT_THROW((UnwrapParams{1, {-0.001}, 1, 1.0, 0.5}.validate()), std::invalid_argument);
  EXPECT_NO_THROW((UnwrapParams{1, {0.01}, 10, 0.1, 0.5}.validate()));
}

TEST(UnwrapMap, Examples) {
  UnwrapParams p{1, {0.01}, 10, 0.1, 0.5};
  SmoothMap m = unwrap_map(p);
  Point y = m(Point{pi, 0, 0, 0});
  ASSERT_EQ(y.size(), 5u);
  EXPECT_EQ(y[0], pi);
  EXPECT_EQ(y[1], 0.0);
  EXPECT_EQ(y[2], 0.0);
  EXPECT_EQ(y[3], 0.0);
  EXPECT_NEAR(y[4], -0.01, 1e-17);

  UnwrapParams p3 = make_unwrap_params(3, 10, 0.1);
  SmoothMap m3 = unwrap_map(p3);
  cftest::Rng rng(12);
  auto dom = unwrap_domain(p3);
  Rng r(12);
  for (int k = 0; k < 100; ++k) {
    Point x = dom->sample(r);
    EXPECT_EQ(jacobian_rank(m3, x), 8);
    for (int j = 0; j < 3; ++j) x[static_cast<std::size_t>(2 + j)] = 0;
    EXPECT_EQ(m3(x)[2], 0.0);
  }
}

TEST(UnwrapMap, PullbackIdentity) {
  for (int n = 1; n <= 3; ++n) {
    UnwrapParams p = make_unwrap_params(n, 10, 0.1);
    SmoothMap m = unwrap_map(p);
    KForm diff = pullback(m, alpha_ot_plus_lambda(n)) + (-make_beta(n));
    Rng rng(13);
    double worst = 0;
    for (const auto& x : unwrap_domain(p)->sample_many(rng, 1000)) worst = std::max(worst, max_abs_coefficient(diff, x));
    EXPECT_LT(worst, 1e-8) << n;
  }
}

TEST(UnwrapMap, CompositeCoherence) {
  for (int n = 1; n <= 3; ++n) {
    UnwrapParams p = make_unwrap_params(n, 10, 0.1);
    SmoothMap m = unwrap_map(p);
    SmoothMap rs = named_auxiliary_map("rescale_st", 1.7, n);
    KForm a = alpha_ot_plus_lambda(n);
    KForm two_step = pullback(rs, pullback(m, a));
    KForm one_step = pullback(compose(m, rs), a);
    Rng rng(14);
    for (const auto& x : unwrap_domain(p)->sample_many(rng, 100))
      EXPECT_LT(max_abs_coefficient(two_step + (-one_step), x), 1e-8);
  }
}

TEST(VerifyUnwrap, OneCircleAtPaperConstraint) {
  UnwrapParams p{1, {0.1 / 10}, 10, 0.1, 0.5};
  Rng rng(15);
  Report rep = verify_unwrap(p, 1000, rng);
  EXPECT_EQ(rep.status, Status::Pass) << rep.message;
  EXPECT_LT(rep.max_residual, 1e-8);
  EXPECT_LT(rep.metrics["max_abs_z"].get<double>(), 0.1);
  EXPECT_EQ(rep.samples, 1000);
}

TEST(VerifyUnwrap, ThreeTorus) {
  UnwrapParams p = make_unwrap_params(3, 10, 0.1);
  Rng rng(16);
  Report rep = verify_unwrap(p, 1000, rng, 4);
  EXPECT_EQ(rep.status, Status::Pass) << rep.message;
  EXPECT_EQ(rep.metrics["relation_bound_K"].get<int>(), 4);
  EXPECT_GT(rep.metrics["min_relation_value"].get<double>(), 1e-9);
}

TEST(VerifyUnwrap, RationalRatioFails) {
  UnwrapParams p{2, {0.001, 0.002}, 10, 0.1, 0.5};
  Rng rng(17);
  Report rep = verify_unwrap(p, 500, rng);
  EXPECT_EQ(rep.status, Status::Fail);
  ASSERT_TRUE(rep.witness);
  EXPECT_EQ(*rep.witness, (std::vector<double>{2, -1}));
  EXPECT_LT(rep.max_residual, 1e-8);
}

TEST(VerifyUnwrap, Deterministic) {
  UnwrapParams p = make_unwrap_params(2, 5, 0.1);
  Rng a(18), b(18);
  Report x = verify_unwrap(p, 300, a, 1), y = verify_unwrap(p, 300, b, 3);
  json jx = to_json(x), jy = to_json(y);
  jx.erase("wall_time");
  jy.erase("wall_time");
  EXPECT_EQ(jx.dump(), jy.dump());
}

TEST(IntegerRelation, SqrtPrimes) {
  std::vector<double> w{std::sqrt(2.0), std::sqrt(3.0), std::sqrt(5.0)};
  IntegerRelation rel = integer_relation_search(w, 20);
  EXPECT_FALSE(rel.found);
  // brute-force oracle, unnormalised
  double best = 1e300;
  for (int a = -20; a <= 20; ++a)
    for (int b = -20; b <= 20; ++b)
      for (int c = -20; c <= 20; ++c)
        if (a || b || c) best = std::min(best, std::abs(a * w[0] + b * w[1] + c * w[2]));
  EXPECT_GT(best, 1e-9);
  EXPECT_NEAR(rel.min_value * std::sqrt(5.0), best, 1e-12);
  for (int n = 1; n <= 3; ++n) {
    std::vector<double> v(w.begin(), w.begin() + n);
    EXPECT_FALSE(integer_relation_search(v, 20).found);
  }
}

TEST(IntegerRelation, RationalWitness) {
  IntegerRelation rel = integer_relation_search({1.0, 2.0}, 3);
  EXPECT_TRUE(rel.found);
  EXPECT_EQ(rel.argmin, (std::vector<int>{2, -1}));
  IntegerRelation rel3 = integer_relation_search({0.5, 1.5, 0.7}, 5);
  EXPECT_TRUE(rel3.found);
  EXPECT_EQ(rel3.argmin, (std::vector<int>{3, -1, 0}));
}

TEST(Bump, ClampAndMonotone) {
  BumpFunction g;
  for (double u : {0.0, 0.05, 0.1}) EXPECT_EQ(g(u), 0.0);
  for (double u : {0.9, 0.95, 1.0, 3.0}) EXPECT_EQ(g(u), 1.0);
  EXPECT_NEAR(g(0.5), 0.5, 1e-15);
  double prev = 0;
  for (int k = 0; k <= 10000; ++k) {
    double u = k / 10000.0;
    EXPECT_GE(g(u), prev);
    prev = g(u);
  }
  for (double u : {0.12, 0.3, 0.5, 0.77, 0.88}) {
    const double h = 1e-6;
    EXPECT_NEAR(g.derivative(u), (g(u + h) - g(u - h)) / (2 * h), 1e-6);
    D1 x(u, 1.0);
    EXPECT_NEAR(g.value(x).derivative, g.derivative(u), 1e-12);
  }
  EXPECT_THROW(BumpFunction(0.6, 0.4), std::invalid_argument);
}

TEST(Unknot, Examples) {
  LegendrianEmbedding e = unknot_embedding(2);
  Point y = e.map(Point{1, 0, 0});
  EXPECT_EQ(y, (Point{1, 0, -0.0, 0, 0}));
  EXPECT_NEAR(e.map(Point{0, 0, 1})[4], 1.0 / 3, 1e-15);
  EXPECT_NEAR(e.map(Point{0, 0, -1})[4], -1.0 / 3, 1e-15);
  for (int n = 1; n <= 4; ++n) {
    Rng rng(20 + n);
    Report rep = verify_legendrian(unknot_embedding(n), 500, rng);
    EXPECT_EQ(rep.status, Status::Pass) << n << rep.message;
    EXPECT_LT(rep.max_residual, 1e-8);
    EXPECT_LT(rep.metrics["max_constraint"].get<double>(), 1e-10);
  }
}

TEST(DeformedSphere, ClampRegions) {
  BumpFunction g;
  LegendrianEmbedding d = deformed_sphere_embedding(2, g);
  LegendrianEmbedding u = unknot_embedding(3);
  cftest::Rng rng(22);
  for (int k = 0; k < 200; ++k) {
    // |x|^2 < 0.1: p = 0
    double x0 = rng.uniform(-0.5, 0.5), x1 = rng.uniform(-0.2, 0.2), x2 = rng.uniform(-0.2, 0.2), s = rng.uniform(-0.5, 0.5);
    Point img = d.map(Point{x0, x1, x2, s});
    EXPECT_EQ(img[5], 0.0);
    EXPECT_EQ(img[6], 0.0);
    // |x|^2 > 0.9: agrees with the unknot in one dimension higher
    double a = rng.uniform(0.96, 1.0), phi = rng.uniform(0, 2 * pi);
    Point q{rng.uniform(-0.2, 0.2), a * std::cos(phi), a * std::sin(phi), rng.uniform(-0.2, 0.2)};
    Point di = d.map(q);
    Point ui = u.map(Point{q[0], q[1], q[2], q[3]});
    // unknot3 order: x1 x2 x3 y1 y2 y3 z ; deformed: x y z q1 q2 p1 p2
    EXPECT_NEAR(di[0], ui[0], 1e-15);
    EXPECT_NEAR(di[1], ui[3], 1e-15);
    EXPECT_NEAR(di[2], ui[6], 1e-15);
    EXPECT_NEAR(di[3], ui[1], 1e-15);
    EXPECT_NEAR(di[5], ui[4], 1e-15);
    EXPECT_NEAR(di[6], ui[5], 1e-15);
  }
}

TEST(DeformedSphere, Legendrian) {
  for (int n = 1; n <= 3; ++n) {
    Rng rng(30 + n);
    Report rep = verify_legendrian(deformed_sphere_embedding(n), 500, rng);
    EXPECT_EQ(rep.status, Status::Pass) << n << rep.message;
    EXPECT_LT(rep.max_residual, 1e-8);
  }
}

TEST(DeformedSphere, InterpolatedFamilyIsSmooth) {
  Rng rng(40);
  Report rep = verify_constraint_family(2, BumpFunction{}, {0, 0.25, 0.5, 0.75, 1}, 200, rng);
  EXPECT_EQ(rep.status, Status::Pass) << rep.message;
  EXPECT_EQ(rep.samples, 1000);
  EXPECT_EQ(rep.metrics["min_gradient_norm"].size(), 5u);
}

TEST(Legendrian, NonLegendrianFails) {
  ChartPtr src = make_chart("circle", {"x", "s"});
  KForm alpha = make_standard_form(1);
  LegendrianEmbedding e{"flat", alpha, SmoothMap::parse(src, alpha.chart(), {"x", "0", "s"}),
                        ScalarField::parse(src, "x^2 + s^2 - 1")};
  Rng rng(41);
  Report rep = verify_legendrian(e, 100, rng);
  EXPECT_EQ(rep.status, Status::Fail);
  ASSERT_TRUE(rep.witness);
  EXPECT_EQ(rep.witness->size(), 2u);
  EXPECT_NEAR(rep.max_residual, 1.0, 0.05);
}

TEST(Legendrian, DegenerateParametrization) {
  ChartPtr src = make_chart("circle2", {"x", "s"});
  KForm alpha = make_standard_form(1);
  LegendrianEmbedding e{"squared", alpha, SmoothMap::parse(src, alpha.chart(), {"x", "-s*x", "s^3/3"}),
                        ScalarField::parse(src, "(x^2 + s^2 - 1)^3")};
  Rng rng(42);
  EXPECT_THROW(verify_legendrian(e, 10, rng), DegenerateParametrization);
}

TEST(AuxiliaryMaps, Invariance) {
  cftest::Rng rng(50);
  for (int n = 1; n <= 3; ++n) {
    KForm st = make_beta(n) + (-KForm::from_terms(sigma_chart(n), 1, {{{"theta"}, "r*sin(r)"}}));
    KForm pulled = pullback(named_auxiliary_map("rescale_st", 2.5, n), st);
    KForm lam = make_lambda_can(n);
    KForm lp = pullback(named_auxiliary_map("stretch_qp", 0.8, n), lam);
    for (int k = 0; k < 50; ++k) {
      Point x = rng.vec(static_cast<std::size_t>(2 + 2 * n), -2, 2);
      x[0] = std::abs(x[0]) + 0.1;
      EXPECT_LT(max_abs_coefficient(pulled + (-st), x), 1e-12);
      Point y = rng.vec(static_cast<std::size_t>(2 * n), -2, 2);
      EXPECT_LT(max_abs_coefficient(lp + (-lam), y), 1e-12);
    }
  }
  EXPECT_THROW(named_auxiliary_map("twist", 1.0), UnknownKind);
  EXPECT_THROW(named_auxiliary_map("rescale_st", -1.0), std::invalid_argument);
}

TEST(AuxiliaryMaps, FiberRescaleConformal) {
  for (int n = 1; n <= 3; ++n) {
    ScalarField f = ScalarField::parse(darboux_chart(1), "0.3*sin(x)*cos(z)");
    SmoothMap m = named_auxiliary_map("fiber_rescale", f, n);
    ChartPtr c = darboux_cotangent_chart(n);
    ScalarField ef = ScalarField::parse(c, "exp(0.3*sin(x)*cos(z))");
    KForm lam = make_lambda_can(n).embed(c);
    KForm base = KForm::from_terms(c, 1, {{{"z"}, "1"}, {{"x"}, "-y"}});
    KForm lhs = pullback(m, ef * base + lam);
    KForm rhs = ef * make_darboux_cotangent_form(n);
    ContactModel plain("plain", make_darboux_cotangent_form(n));
    ContactModel scaled("scaled", lhs);
    Rng rng(51);
    CubeRegion box(std::vector<double>(static_cast<std::size_t>(c->dim()), -2.0),
                   std::vector<double>(static_cast<std::size_t>(c->dim()), 2.0));
    for (const auto& x : box.sample_many(rng, n == 3 ? 50 : 500)) {
      EXPECT_LT(max_abs_coefficient(lhs + (-rhs), x), 1e-8);
      const double factor = std::exp((plain.half_dim() + 1) * 0.3 * std::sin(x[0]) * std::cos(x[2]));
      EXPECT_GT(factor, 0);
      EXPECT_NEAR(scaled.top_coefficient(x) / plain.top_coefficient(x), factor, 1e-6 * factor);
    }
  }
}
