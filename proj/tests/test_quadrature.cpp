#include <gtest/gtest.h>

#include <cmath>

#include "dssy/quadrature.hpp"
#include "support/oracles.hpp"

using dssy::Point2;

namespace {

dssy::IntermediateQuad random_iq(oracle::Sampler& s, double lo = -2.0, double hi = -0.05) {
  return {s.uniform(lo, hi), s.uniform(lo, hi)};
}

double closed_form_r(double u, double v) {
  return 1.25 * v * (2.0 / 90.0 * u * u - 0.4 * u + 185.0 / 999.0 * v * v - 0.6 * v + 1.0);
}

/// Residuals of the two homogeneous quadratic equations for the offset (X, Y).
std::array<double, 2> explicit_system_residual(double a, double b, int L, Point2 xi) {
  const double x = xi.x1, y = xi.x2;
  const double r1 = L * closed_form_r(a, b), r2 = L * closed_form_r(b, a);
  const double e1 = 10 * b * x * x + 14 * a * x * y + 7 * b * y * y;
  const double e2 = 7 * a * x * x + 14 * b * x * y + 10 * a * y * y;
  return {(e1 - r1) / std::max(std::abs(r1), 1.0), (e2 - r2) / std::max(std::abs(r2), 1.0)};
}

bool same_up_to_sign(Point2 a, Point2 b, double tol) {
  return dssy::norm(a - b) <= tol || dssy::norm(a + b) <= tol;
}

} // namespace

TEST(ExactMoment, AreaAndSymmetry) {
  oracle::Sampler s(31);
  for (int t = 0; t < 20; ++t) {
    const auto iq = random_iq(s);
    EXPECT_NEAR(dssy::exact_moment(0, 0, iq), iq.area(), 1e-15);
  }
  const dssy::IntermediateQuad sq(-1, -1);
  EXPECT_NEAR(dssy::exact_moment(1, 0, sq), 0.0, 1e-16);
  EXPECT_NEAR(dssy::exact_moment(3, 2, sq), 0.0, 1e-16);
  EXPECT_THROW(dssy::exact_moment(-1, 0, sq), std::invalid_argument);
}

TEST(ExactMoment, MatchesTriangleSplitOracle) {
  oracle::Sampler s(32);
  for (int t = 0; t < 20; ++t) {
    const auto iq = random_iq(s);
    for (int j = 0; j <= 6; ++j) {
      for (int k = 0; j + k <= 6; ++k) {
        const double ref = oracle::kbar_integral(
            [&](Point2 x) { return std::pow(x.x1, j) * std::pow(x.x2, k); }, iq.hbar1(), iq.hbar2());
        EXPECT_NEAR(dssy::exact_moment(j, k, iq), ref, 1e-10 * std::max(1.0, std::abs(ref))) << j << "," << k;
      }
    }
  }
}

TEST(Poly2Type, BubbleExpansionAndIntegral) {
  oracle::Sampler s(33);
  const auto iq = random_iq(s);
  const auto mu = dssy::mu_bar_poly(iq);
  for (int t = 0; t < 20; ++t) {
    const Point2 x = s.point(-2, 2);
    EXPECT_NEAR(mu(x), dssy::mu_bar(iq, x), 1e-13);
    const Point2 g = dssy::grad_mu_bar(iq, x);
    EXPECT_NEAR(mu.d1()(x), g.x1, 1e-12);
    EXPECT_NEAR(mu.d2()(x), g.x2, 1e-12);
  }
  const double ref = oracle::kbar_integral([&](Point2 x) { return dssy::mu_bar(iq, x); }, iq.hbar1(), iq.hbar2());
  EXPECT_NEAR(dssy::integrate(mu, iq), ref, 1e-12);
}

TEST(OnePointRule, SquareAndPrecision) {
  const auto sq = dssy::one_point_rule({-1, -1});
  ASSERT_EQ(sq.size(), 1u);
  EXPECT_EQ(sq.nodes[0].x1, 0.0);
  EXPECT_EQ(sq.nodes[0].x2, 0.0);
  EXPECT_DOUBLE_EQ(sq.weights[0], 2.0);

  oracle::Sampler s(34);
  const auto iq = random_iq(s);
  const auto r = dssy::one_point_rule(iq);
  EXPECT_NEAR(r.weights[0] * iq.hh1() / 3.0, dssy::exact_moment(1, 0, iq), 1e-15);
  EXPECT_NEAR(r.weights[0] * iq.hh2() / 3.0, dssy::exact_moment(0, 1, iq), 1e-15);
  const double quad = r.weights[0] * r.nodes[0].x1 * r.nodes[0].x1;
  EXPECT_GT(std::abs(quad - dssy::exact_moment(2, 0, iq)), 1e-3);
}

TEST(SymmetricRule, SquareOffsets) {
  // Both quadratic forms vanish; offsets lie on 252 X^2 + 360 Y^2 = 45 L, branch X = 0.
  const auto r2 = dssy::symmetric_rule({-1, -1}, 2);
  ASSERT_EQ(r2.size(), 2u);
  EXPECT_NEAR(r2.nodes[0].x1, 0.0, 1e-15);
  EXPECT_NEAR(r2.nodes[0].x2, 0.5, 1e-15);
  EXPECT_NEAR(r2.nodes[1].x2, -0.5, 1e-15);
  EXPECT_DOUBLE_EQ(r2.weights[0], 1.0);
  EXPECT_DOUBLE_EQ(r2.weights[1], 1.0);

  const auto r3 = dssy::symmetric_rule({-1, -1}, 3);
  ASSERT_EQ(r3.size(), 3u);
  EXPECT_NEAR(r3.nodes[1].x2, std::sqrt(135.0 / 360.0), 1e-15);
  EXPECT_NEAR(r3.nodes[1].x2, 0.61237, 1e-5);
  const auto off = dssy::symmetric_offsets({-1, -1}, 2);
  EXPECT_TRUE(off.parallelogram_fallback);
}

TEST(SymmetricRule, DegenerateLineMatchesExplicitSystem) {
  // hh2 = 0: 252 X^2 + 360 Y^2 = (L/3)(25 hh1^2 - 81 hh1 + 135), and X Y = 0.
  for (double a : {-0.8, -0.3, 0.2, 0.6}) {
    for (int L : {2, 3}) {
      const auto off = dssy::symmetric_offsets({a - 1.0, -1.0}, L, dssy::NodePlacement::allow_outside);
      ASSERT_EQ(off.candidates.size(), 2u);
      const double rhs = L / 3.0 * (25 * a * a - 81 * a + 135);
      for (const Point2& xi : off.candidates) {
        EXPECT_NEAR(xi.x1 * xi.x2, 0.0, 1e-12);
        EXPECT_NEAR(252 * xi.x1 * xi.x1 + 360 * xi.x2 * xi.x2, rhs, 1e-10 * rhs);
      }
    }
  }
}

TEST(SymmetricRule, ExactnessAndStructure) {
  oracle::Sampler s(35);
  int built = 0;
  for (int t = 0; t < 300; ++t) {
    const auto iq = random_iq(s);
    for (int L : {2, 3}) {
      dssy::QuadratureRule rule;
      try {
        rule = dssy::symmetric_rule(iq, L);
      } catch (const dssy::RuleConstructionError&) {
        continue;
      }
      ++built;
      ASSERT_EQ(rule.size(), static_cast<std::size_t>(L));
      double wsum = 0.0;
      for (double w : rule.weights) {
        EXPECT_GT(w, 0.0);
        wsum += w;
      }
      EXPECT_NEAR(wsum, iq.area(), 1e-14 * iq.area());
      for (const Point2& x : rule.nodes) EXPECT_TRUE(iq.contains(x));
      const Point2 c = iq.barycenter();
      const Point2 mean = 0.5 * (rule.nodes[L - 2] + rule.nodes[L - 1]);
      EXPECT_NEAR(mean.x1, c.x1, 1e-15);
      EXPECT_NEAR(mean.x2, c.x2, 1e-15);
      if (L == 3) {
        EXPECT_EQ(rule.nodes[0].x1, c.x1);
        EXPECT_EQ(rule.nodes[0].x2, c.x2);
      }
      // exactness against the triangle-split oracle, independent of exact_moment
      const auto mu = dssy::mu_bar_poly(iq);
      const std::array<dssy::Poly2, 2> g{mu.d1(), mu.d2()};
      for (const auto& gi : g) {
        const double ref = oracle::kbar_integral([&](Point2 x) { return gi(x); }, iq.hbar1(), iq.hbar2(), 6);
        double q = 0.0;
        for (std::size_t l = 0; l < rule.size(); ++l) q += rule.weights[l] * gi(rule.nodes[l]);
        EXPECT_NEAR(q, ref, 1e-10 * std::max(std::abs(ref), iq.area()));
      }
      EXPECT_LE(dssy::verify_exactness(rule, iq), 1e-10);
    }
  }
  EXPECT_GT(built, 450);
}

TEST(SymmetricRule, SelectsSmallerAdmissibleOffset) {
  oracle::Sampler s(36);
  for (int t = 0; t < 300; ++t) {
    const auto iq = random_iq(s);
    const auto off = dssy::symmetric_offsets(iq, 2, dssy::NodePlacement::allow_outside);
    int best = -1;
    for (int i = 0; i < static_cast<int>(off.candidates.size()); ++i) {
      if (off.admissible[i] && (best < 0 || dssy::norm(off.candidates[i]) < dssy::norm(off.candidates[best]))) best = i;
    }
    if (best < 0) {
      EXPECT_FALSE(off.inside);
      continue;
    }
    EXPECT_TRUE(off.inside);
    EXPECT_NEAR(dssy::norm(off.candidates[off.chosen]), dssy::norm(off.candidates[best]), 1e-14);
  }
}

TEST(SymmetricRule, NoAdmissibleCandidate) {
  // Scan a grid for a Kbar where every exact node pair leaves the domain.
  std::optional<dssy::IntermediateQuad> found;
  for (double h1 = -1.95; h1 < -0.05 && !found; h1 += 0.05) {
    for (double h2 = -1.95; h2 < -0.05 && !found; h2 += 0.05) {
      const dssy::IntermediateQuad iq(h1, h2);
      const auto off = dssy::symmetric_offsets(iq, 3, dssy::NodePlacement::allow_outside);
      if (!off.inside) found = iq;
    }
  }
  ASSERT_TRUE(found.has_value());
  try {
    (void)dssy::symmetric_rule(*found, 3);
    FAIL() << "expected RuleConstructionError";
  } catch (const dssy::RuleConstructionError& e) {
    EXPECT_NE(std::string(e.what()).find("candidates"), std::string::npos);
  }
  const auto rule = dssy::symmetric_rule(*found, 3, dssy::NodePlacement::allow_outside);
  EXPECT_LE(dssy::verify_exactness(rule, *found), 1e-10);
  EXPECT_FALSE(found->contains(rule.nodes[1]) && found->contains(rule.nodes[2]));
  // assembly path uses the permissive placement
  EXPECT_NO_THROW(dssy::make_rule(dssy::RuleKind::three_point, *found));
}

TEST(SymmetricRule, RejectsBadPointCount) {
  EXPECT_THROW(dssy::symmetric_rule({-1, -1}, 4), std::invalid_argument);
}

TEST(ClosedForm, SolvesExplicitSystemAndMatchesMomentDerivation) {
  oracle::Sampler s(37);
  int compared = 0;
  for (int t = 0; t < 1000; ++t) {
    const double a = s.uniform(-0.9, 0.9), b = s.uniform(-0.9, 0.9);
    if (std::abs(a) < 0.05 || std::abs(b) < 0.05) continue;
    for (int L : {2, 3}) {
      const auto cf = dssy::closed_form_offsets(a, b, L);
      if (!cf) continue;
      const auto off = dssy::symmetric_offsets({a - 1.0, b - 1.0}, L, dssy::NodePlacement::allow_outside);
      for (const auto& p : *cf) {
        if (!p) continue;
        const auto res = explicit_system_residual(a, b, L, *p);
        EXPECT_LE(std::abs(res[0]), 1e-9);
        EXPECT_LE(std::abs(res[1]), 1e-9);
        bool matched = false;
        for (const Point2& c : off.candidates) matched = matched || same_up_to_sign(c, *p, 1e-8 * (1 + dssy::norm(c)));
        EXPECT_TRUE(matched) << "hh=(" << a << "," << b << ") L=" << L;
        ++compared;
      }
      for (const Point2& c : off.candidates) {
        const auto res = explicit_system_residual(a, b, L, c);
        EXPECT_LE(std::abs(res[0]), 1e-9);
        EXPECT_LE(std::abs(res[1]), 1e-9);
      }
    }
  }
  EXPECT_GT(compared, 1000);
}

TEST(ClosedForm, SwapSymmetry) {
  oracle::Sampler s(38);
  for (int t = 0; t < 500; ++t) {
    const double a = s.uniform(-0.9, 0.9), b = s.uniform(-0.9, 0.9);
    if (std::abs(a) < 0.05 || std::abs(b) < 0.05) continue;
    const auto ab = dssy::closed_form_offsets(a, b, 2);
    const auto ba = dssy::closed_form_offsets(b, a, 2);
    if (!ab || !ba) continue;
    // each solution pair for (a, b) reappears with X and Y exchanged for (b, a)
    for (const auto& p : *ab) {
      if (!p) continue;
      bool matched = false;
      for (const auto& q : *ba) matched = matched || (q && same_up_to_sign({p->x2, p->x1}, *q, 1e-9));
      EXPECT_TRUE(matched);
    }
  }
}

TEST(ClosedForm, DegenerateLinesReturnNothing) {
  EXPECT_FALSE(dssy::closed_form_offsets(0.0, 0.3, 2).has_value());
  EXPECT_FALSE(dssy::closed_form_offsets(0.0, 0.0, 3).has_value());
}

TEST(SymmetricRule, SwapSymmetryOnDegenerateLines) {
  // exchanging the roles of the two coordinates maps one degenerate line onto the other
  for (double a : {-0.7, 0.4}) {
    const auto p = dssy::symmetric_offsets({a - 1.0, -1.0}, 3, dssy::NodePlacement::allow_outside);
    const auto q = dssy::symmetric_offsets({-1.0, a - 1.0}, 3, dssy::NodePlacement::allow_outside);
    ASSERT_EQ(p.candidates.size(), q.candidates.size());
    for (const Point2& c : p.candidates) {
      bool matched = false;
      for (const Point2& d : q.candidates) matched = matched || same_up_to_sign({c.x2, c.x1}, d, 1e-12);
      EXPECT_TRUE(matched);
    }
  }
}

TEST(VerifyExactness, TensorAndOnePointRules) {
  oracle::Sampler s(39);
  for (int t = 0; t < 50; ++t) {
    const auto iq = random_iq(s);
    EXPECT_LE(dssy::verify_exactness(dssy::tensor_rule_on_intermediate(3, iq), iq), 1e-12);
    const auto res = dssy::exactness_residuals(dssy::one_point_rule(iq), iq);
    EXPECT_LE(res[0], 1e-15);
    EXPECT_LE(res[1], 1e-15);
    EXPECT_LE(res[2], 1e-15);
    EXPECT_GT(std::max(res[3], res[4]), 1e-6);
  }
}

TEST(GaussLegendre, PolynomialDegree) {
  for (int n = 1; n <= 10; ++n) {
    const auto gl = dssy::gauss_legendre(n);
    for (int p = 0; p <= 2 * n - 1; ++p) {
      double q = 0.0;
      for (int i = 0; i < n; ++i) q += gl.weights[i] * std::pow(gl.nodes[i], p);
      EXPECT_NEAR(q, p % 2 ? 0.0 : 2.0 / (p + 1), 1e-14) << "n=" << n << " p=" << p;
    }
  }
  EXPECT_THROW(dssy::gauss_legendre(0), std::invalid_argument);
}

TEST(TensorGauss, NodesWeightsAndExactness) {
  const auto g2 = dssy::tensor_gauss(2);
  ASSERT_EQ(g2.size(), 4u);
  for (std::size_t l = 0; l < 4; ++l) {
    EXPECT_NEAR(std::abs(g2.nodes[l].x1), 1 / std::sqrt(3.0), 1e-15);
    EXPECT_NEAR(std::abs(g2.nodes[l].x2), 1 / std::sqrt(3.0), 1e-15);
    EXPECT_NEAR(g2.weights[l], 1.0, 1e-15);
  }
  const auto g = dssy::gauss_legendre(3);
  EXPECT_NEAR(g.nodes[0], -std::sqrt(0.6), 1e-15);
  EXPECT_EQ(g.nodes[1], 0.0);
  EXPECT_NEAR(g.weights[1], 8.0 / 9.0, 1e-15);
  EXPECT_NEAR(g.weights[0], 5.0 / 9.0, 1e-15);
  const auto g3 = dssy::tensor_gauss(3);
  double q = 0.0;
  for (std::size_t l = 0; l < g3.size(); ++l) q += g3.weights[l] * std::pow(g3.nodes[l].x1 * g3.nodes[l].x2, 4);
  EXPECT_NEAR(q, 0.16, 1e-14);
  EXPECT_EQ(g3.frame, dssy::Frame::reference_bilinear);
}

TEST(MapRule, AreaOfPhysicalElement) {
  oracle::Sampler s(40);
  for (int t = 0; t < 50; ++t) {
    const auto q = s.convex_quad(0.45);
    const auto iq = dssy::intermediate_params(q);
    const auto pr = dssy::map_rule_to_physical(dssy::symmetric_rule(iq, 2, dssy::NodePlacement::allow_outside), q);
    double a = 0.0;
    for (double w : pr.weights) {
      EXPECT_GT(w, 0.0);
      a += w;
    }
    EXPECT_NEAR(a, oracle::shoelace(q), 1e-13);
    // bilinear frame: the Jacobian is bilinear, 2x2 Gauss integrates it exactly
    const auto pg = dssy::map_rule_to_physical(dssy::tensor_gauss(2), q);
    double b = 0.0;
    for (double w : pg.weights) b += w;
    EXPECT_NEAR(b, oracle::shoelace(q), 1e-13);
  }
}

TEST(MapRule, RectangleBilinear) {
  const double h = 0.37;
  const dssy::Quadrilateral rect{{Point2{h, h}, Point2{0, h}, Point2{0, 0}, Point2{h, 0}}};
  const auto rule = dssy::tensor_gauss(2);
  const auto f = dssy::build_bilinear(rect);
  EXPECT_NEAR(f.jacobian({0.2, -0.4}).det(), h * h / 4, 1e-16);
  const auto pr = dssy::map_rule_to_physical(rule, rect);
  EXPECT_NEAR(dssy::apply_rule(pr, [](Point2 x) { return x.x1 * x.x2; }), std::pow(h, 4) / 4, 1e-16);
}

TEST(MapRule, Errors) {
  const dssy::Quadrilateral dart{{Point2{1, 1}, Point2{0, 1}, Point2{0.8, 0.8}, Point2{1, 0}}};
  EXPECT_THROW(dssy::map_rule_to_physical(dssy::tensor_gauss(3), dart), dssy::GeometryError);
  const dssy::Quadrilateral sq{{Point2{1, 1}, Point2{0, 1}, Point2{0, 0}, Point2{1, 0}}};
  EXPECT_THROW(dssy::map_rule_to_physical(dssy::one_point_rule({-0.5, -0.5}), sq), dssy::GeometryError);
}

TEST(QuadratureError, PhysicalToIntermediateRelation) {
  oracle::Sampler s(41);
  for (int t = 0; t < 30; ++t) {
    const auto q = s.convex_quad(0.45);
    const auto iq = dssy::intermediate_params(q);
    const auto a = dssy::build_affine(q);
    const auto inv = a.inverse();
    double c[5][5] = {};
    for (int j = 0; j < 5; ++j)
      for (int k = 0; j + k <= 4; ++k) c[j][k] = s.uniform(-1, 1);
    auto fbar = [&](Point2 x) {
      double v = 0.0;
      for (int j = 0; j < 5; ++j)
        for (int k = 0; j + k <= 4; ++k) v += c[j][k] * std::pow(x.x1, j) * std::pow(x.x2, k);
      return v;
    };
    auto f = [&](Point2 x) { return fbar(inv(x)); };
    const auto rule = dssy::symmetric_rule(iq, 3, dssy::NodePlacement::allow_outside);
    const double ek = dssy::quadrature_error(rule, q, f);
    const double exact_bar = oracle::kbar_integral(fbar, iq.hbar1(), iq.hbar2(), 6);
    double qbar = 0.0;
    for (std::size_t l = 0; l < rule.size(); ++l) qbar += rule.weights[l] * fbar(rule.nodes[l]);
    EXPECT_NEAR(ek, std::abs(a.det()) * (exact_bar - qbar), 1e-11);
  }
}

TEST(QuadratureError, LinearsOnParallelogramAndBubbleOnePoint) {
  const dssy::Quadrilateral p{{Point2{3, 2}, Point2{1, 1.5}, Point2{0, 0}, Point2{2, 0.5}}};
  const auto iq = dssy::intermediate_params(p);
  auto lin = [](Point2 x) { return 2.0 * x.x1 - x.x2 + 0.3; };
  for (auto kind : dssy::kAllRuleKinds) {
    EXPECT_NEAR(dssy::quadrature_error(dssy::make_rule(kind, iq), p, lin), 0.0, 1e-12) << dssy::to_string(kind);
  }
  const dssy::Quadrilateral q{{Point2{1.2, 0.9}, Point2{-0.1, 1.1}, Point2{0, 0}, Point2{1, 0.1}}};
  const auto iq2 = dssy::intermediate_params(q);
  const auto inv = dssy::build_affine(q).inverse();
  auto mu = [&](Point2 x) { return dssy::mu_bar(iq2, inv(x)); };
  EXPECT_GT(std::abs(dssy::quadrature_error(dssy::one_point_rule(iq2), q, mu)), 1e-6);
}

TEST(RuleKinds, NamesRoundTrip) {
  for (auto k : dssy::kAllRuleKinds) EXPECT_EQ(dssy::parse_rule_kind(dssy::to_string(k)), k);
  EXPECT_THROW(dssy::parse_rule_kind("4pt"), std::invalid_argument);
  const dssy::IntermediateQuad iq(-0.7, -1.3);
  EXPECT_EQ(dssy::make_rule(dssy::RuleKind::gauss3x3, iq).size(), 9u);
  EXPECT_EQ(dssy::make_rule(dssy::RuleKind::gauss2x2, iq).frame, dssy::Frame::reference_bilinear);
  EXPECT_EQ(dssy::make_rule(dssy::RuleKind::two_point, iq).frame, dssy::Frame::intermediate_affine);
}
