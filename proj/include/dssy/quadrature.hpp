#pragma once
//
// Quadrature on the intermediate quadrilateral Kbar.
//
// The symmetric L-point rules (L = 2, 3) use equal weights |Kbar|/L and nodes
// {c +- xi} (plus c itself for L = 3), c the barycenter of Kbar. They are
// exact for span{1, xb1, xb2, d mu/d xb1, d mu/d xb2}. Linear functions are
// integrated exactly by symmetry, so only the two cubic gradient components
// constrain xi. For a cubic g,
//     g(c + xi) + g(c - xi) = 2 g(c) + xi^T H_g(c) xi,
// so exactness reduces to two homogeneous quadratic equations in xi:
//     (1/2) xi^T H_g(c) xi = (L/2) (mean_Kbar(g) - g(c)),   g = d mu/d xb_i.
// Both sides are assembled here from exact monomial moments; the explicit
// closed-form solution is kept as an independent cross-check.
//
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dssy/element.hpp"
#include "dssy/geometry.hpp"

namespace dssy {

inline double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

/// Exact integral of xb1^j xb2^k over Kbar:
///   j! k! / (2+j+k)! * (1 - hbar1^(j+1)) (1 - hbar2^(k+1)).
inline double exact_moment(int j, int k, const IntermediateQuad& iq) {
  if (j < 0 || k < 0) throw std::invalid_argument("exact_moment: negative exponent");
  return factorial(j) * factorial(k) / factorial(2 + j + k) * (1.0 - std::pow(iq.hbar1(), j + 1)) *
         (1.0 - std::pow(iq.hbar2(), k + 1));
}

/// Bivariate polynomial sum c[j][k] x1^j x2^k of degree <= 6 per variable.
struct Poly2 {
  static constexpr int kMax = 7;
  std::array<std::array<double, kMax>, kMax> c{};

  double operator()(Point2 x) const {
    double s = 0.0;
    double p1 = 1.0;
    for (int j = 0; j < kMax; ++j, p1 *= x.x1) {
      double p2 = 1.0;
      for (int k = 0; k < kMax; ++k, p2 *= x.x2) {
        if (c[j][k] != 0.0) s += c[j][k] * p1 * p2;
      }
    }
    return s;
  }

  Poly2 d1() const {
    Poly2 r;
    for (int j = 1; j < kMax; ++j)
      for (int k = 0; k < kMax; ++k) r.c[j - 1][k] = j * c[j][k];
    return r;
  }
  Poly2 d2() const {
    Poly2 r;
    for (int j = 0; j < kMax; ++j)
      for (int k = 1; k < kMax; ++k) r.c[j][k - 1] = k * c[j][k];
    return r;
  }

  static Poly2 monomial(int j, int k, double coef = 1.0) {
    Poly2 p;
    p.c[j][k] = coef;
    return p;
  }
};

/// Exact integral over Kbar by summing monomial moments.
inline double integrate(const Poly2& p, const IntermediateQuad& iq) {
  double s = 0.0;
  for (int j = 0; j < Poly2::kMax; ++j)
    for (int k = 0; k < Poly2::kMax; ++k)
      if (p.c[j][k] != 0.0) s += p.c[j][k] * exact_moment(j, k, iq);
  return s;
}

/// Monomial expansion of mu (cbar = 1).
inline Poly2 mu_bar_poly(const IntermediateQuad& iq) {
  const double h1 = iq.hbar1();
  const double h2 = iq.hbar2();
  Poly2 p;
  p.c[3][1] = 1.0;
  p.c[1][3] = 1.0;
  p.c[2][1] = -0.3 * (1.0 + h1);
  p.c[1][2] = -0.3 * (1.0 + h2);
  p.c[1][1] = 0.15 * (h1 + h2);
  return p;
}

enum class Frame {
  intermediate_affine, ///< nodes on Kbar, mapped to K by Abar_K
  reference_bilinear,  ///< nodes on [-1,1]^2, mapped to K by F_K
};

struct QuadratureRule {
  std::vector<Point2> nodes;
  std::vector<double> weights;
  Frame frame = Frame::intermediate_affine;
  /// The Kbar the nodes live on (intermediate frame only).
  std::optional<IntermediateQuad> domain;

  std::size_t size() const { return nodes.size(); }
};

inline QuadratureRule one_point_rule(const IntermediateQuad& iq) {
  return {{iq.barycenter()}, {iq.area()}, Frame::intermediate_affine, iq};
}

/// Binary quadratic form a X^2 + b XY + c Y^2.
struct QuadForm {
  double a = 0.0, b = 0.0, c = 0.0;
  double operator()(Point2 x) const { return a * x.x1 * x.x1 + b * x.x1 * x.x2 + c * x.x2 * x.x2; }
  double scale() const { return std::max({std::abs(a), std::abs(b), std::abs(c)}); }
};

/// One equation (1/2) xi^T H_g(c) xi = target of the symmetric-rule system.
struct MomentEquation {
  QuadForm form;
  double target = 0.0;
};

/// Builds the two exactness equations for the L-point symmetric rule directly
/// from the polynomial g and the moments of Kbar.
inline std::array<MomentEquation, 2> symmetric_rule_equations(const IntermediateQuad& iq, int L) {
  const Poly2 mu = mu_bar_poly(iq);
  const std::array<Poly2, 2> g{mu.d1(), mu.d2()};
  const Point2 c = iq.barycenter();
  std::array<MomentEquation, 2> eq;
  for (int i = 0; i < 2; ++i) {
    const double gc = g[i](c);
    auto half_second_difference = [&](Point2 xi) { return 0.5 * (g[i](c + xi) + g[i](c - xi)) - gc; };
    const double q10 = half_second_difference({1.0, 0.0});
    const double q01 = half_second_difference({0.0, 1.0});
    const double q11 = half_second_difference({1.0, 1.0});
    const double q1m = half_second_difference({1.0, -1.0});
    eq[i].form = {q10, 0.5 * (q11 - q1m), q01};
    eq[i].target = 0.5 * L * (integrate(g[i], iq) / iq.area() - gc);
  }
  return eq;
}

/// Candidate offsets xi (one per solution pair +-xi) and the chosen one.
struct SymmetricOffsets {
  std::vector<Point2> candidates;
  std::vector<bool> admissible;
  int chosen = -1;
  bool parallelogram_fallback = false;
  /// False when no candidate was admissible and allow_outside picked one.
  bool inside = true;
};

/// What to do when no candidate keeps every node inside the closed Kbar.
enum class NodePlacement {
  inside_only,   ///< throw RuleConstructionError
  allow_outside, ///< take the smallest |xi|; the rule stays exact
};

namespace detail {

/// Canonical sign of a solution pair: Y > 0, or Y == 0 and X > 0.
inline Point2 canonical_sign(Point2 xi) {
  if (xi.x2 < 0.0 || (xi.x2 == 0.0 && xi.x1 < 0.0)) return -xi;
  return xi;
}

inline bool nodes_inside(const IntermediateQuad& iq, Point2 xi) {
  const Point2 c = iq.barycenter();
  return iq.contains(c + xi) && iq.contains(c - xi);
}

inline std::string describe(const std::vector<Point2>& cands) {
  std::string s;
  for (const Point2& p : cands) {
    s += " (" + std::to_string(p.x1) + ", " + std::to_string(p.x2) + ")";
  }
  return s.empty() ? " none" : s;
}

} // namespace detail

/// Radicands in [-kRootClamp, 0) are treated as roundoff and clamped to 0.
inline constexpr double kRootClamp = 1e-12;

/// Solves the exactness system for xi and applies the selection rule: among
/// candidates whose nodes lie in the closed Kbar, take the smallest |xi|
/// (ties go to the candidate with larger |Y|). If none is admissible the
/// placement policy decides between an error and the smallest |xi|.
///
/// When both quadratic forms vanish (hh1 = hh2 = 0, a parallelogram) every xi
/// satisfies the gradient equations; the offsets then lie on the ellipse
/// 252 X^2 + 360 Y^2 = 45 L, the limit of the degenerate-line solution, and
/// the branch X = 0 is taken.
inline SymmetricOffsets symmetric_offsets(const IntermediateQuad& iq, int L,
                                          NodePlacement placement = NodePlacement::inside_only) {
  if (L != 2 && L != 3) throw std::invalid_argument("symmetric_offsets: L must be 2 or 3");
  const auto eq = symmetric_rule_equations(iq, L);
  const double form_scale = std::max(eq[0].form.scale(), eq[1].form.scale());

  SymmetricOffsets out;
  if (form_scale <= 1e-13) {
    out.parallelogram_fallback = true;
    out.candidates = {{0.0, std::sqrt(45.0 * L / 360.0)}, {std::sqrt(45.0 * L / 252.0), 0.0}};
  } else {
    // Directions d with T2 P1(d) = T1 P2(d), then |xi|^2 from either equation.
    const QuadForm m{eq[1].target * eq[0].form.a - eq[0].target * eq[1].form.a,
                     eq[1].target * eq[0].form.b - eq[0].target * eq[1].form.b,
                     eq[1].target * eq[0].form.c - eq[0].target * eq[1].form.c};
    const double target_scale = std::max(std::abs(eq[0].target), std::abs(eq[1].target));
    if (m.scale() <= 1e-14 * form_scale * target_scale) {
      throw RuleConstructionError("symmetric_offsets: exactness equations are dependent");
    }
    const double theta = 0.5 * std::atan2(m.b, m.a - m.c);
    const Point2 ep{std::cos(theta), std::sin(theta)};
    const Point2 em{-ep.x2, ep.x1};
    const double lp = m(ep);
    const double lm = m(em);
    if (lp * lm > 0.0) {
      throw RuleConstructionError("symmetric_offsets: no real solution of the exactness equations");
    }
    const double u = std::sqrt(std::abs(lm));
    const double v = std::sqrt(std::abs(lp));
    const double len = std::hypot(u, v);
    std::array<Point2, 2> dirs{(u * ep + v * em) / len, (u * ep - v * em) / len};
    for (const Point2& d : dirs) {
      const double p0 = eq[0].form(d);
      const double p1 = eq[1].form(d);
      const bool use0 = std::abs(p0) >= std::abs(p1);
      const double den = use0 ? p0 : p1;
      const double num = use0 ? eq[0].target : eq[1].target;
      if (std::abs(den) <= 1e-300) continue;
      double rho2 = num / den;
      if (rho2 < 0.0) {
        if (rho2 < -kRootClamp) continue;
        rho2 = 0.0;
      }
      out.candidates.push_back(detail::canonical_sign(std::sqrt(rho2) * d));
    }
    if (out.candidates.empty()) {
      throw RuleConstructionError("symmetric_offsets: no real solution of the exactness equations");
    }
  }

  for (const Point2& xi : out.candidates) {
    out.admissible.push_back(detail::nodes_inside(iq, xi));
  }
  auto pick = [&](bool require_inside) {
    int chosen = -1;
    for (int i = 0; i < static_cast<int>(out.candidates.size()); ++i) {
      if (require_inside && !out.admissible[i]) continue;
      if (chosen < 0) {
        chosen = i;
        continue;
      }
      const Point2 a = out.candidates[i];
      const Point2 b = out.candidates[chosen];
      const double na = norm(a), nb = norm(b);
      if (na < nb - 1e-14 || (std::abs(na - nb) <= 1e-14 && std::abs(a.x2) > std::abs(b.x2))) chosen = i;
    }
    return chosen;
  };
  out.chosen = pick(true);
  if (out.chosen < 0 && placement == NodePlacement::allow_outside) {
    out.chosen = pick(false);
    out.inside = false;
  }
  if (out.chosen < 0) {
    throw RuleConstructionError("symmetric rule: no candidate keeps all nodes inside Kbar; candidates:" +
                                detail::describe(out.candidates));
  }
  return out;
}

/// Equal-weight L-point rule (L = 2 or 3), symmetric about the barycenter.
inline QuadratureRule symmetric_rule(const IntermediateQuad& iq, int L,
                                     NodePlacement placement = NodePlacement::inside_only) {
  const SymmetricOffsets off = symmetric_offsets(iq, L, placement);
  const Point2 xi = off.candidates[off.chosen];
  const Point2 c = iq.barycenter();
  QuadratureRule rule{{}, {}, Frame::intermediate_affine, iq};
  if (L == 3) rule.nodes.push_back(c);
  rule.nodes.push_back(c + xi);
  rule.nodes.push_back(c - xi);
  rule.weights.assign(rule.nodes.size(), iq.area() / L);
  return rule;
}

/// Right-hand side r(u, v) of the explicit form of the symmetric-rule system.
inline double closed_form_rhs(double u, double v) {
  return 1.25 * v * (2.0 / 90.0 * u * u - 0.4 * u + 185.0 / 999.0 * v * v - 0.6 * v + 1.0);
}

/// Closed-form solution pairs (X^(j), Y^(j)), j = 1, 2, in terms of
/// hh = 1 + hbar. A branch is empty when a radicand is negative beyond the
/// roundoff clamp. Returns nullopt on the degenerate lines, where T1 or T2
/// vanishes.
inline std::optional<std::array<std::optional<Point2>, 2>> closed_form_offsets(double hh1, double hh2, int L) {
  const double a = hh1, b = hh2;
  const double r1 = L * closed_form_rhs(a, b);
  const double r2 = L * closed_form_rhs(b, a);
  const double t1 = 7.0 * r1 * a - 10.0 * r2 * b;
  const double t2 = 13720.0 * std::pow(a, 4) - 26603.0 * a * a * b * b + 13720.0 * std::pow(b, 4);
  const double t3 = -70.0 * (r1 * r1 * a * a + r2 * r2 * b * b) + 49.0 * (r1 * r1 * b * b + r2 * r2 * a * a) +
                    51.0 * r1 * r2 * a * b;
  const double t4 = 7.0 * (r1 * b - r2 * a);
  const double t5 = -1043.0 * r1 * a * a * b + 980.0 * r1 * b * b * b + 686.0 * r2 * a * a * a -
                    470.0 * r2 * a * b * b;
  const double t6 = 14.0 * (7.0 * a * a - 10.0 * b * b);
  if (std::abs(t1) <= 1e-12 || t2 <= 1e-12) return std::nullopt;

  auto clamped_sqrt = [](double x) -> std::optional<double> {
    if (x >= 0.0) return std::sqrt(x);
    if (x >= -kRootClamp) return 0.0;
    return std::nullopt;
  };
  std::array<std::optional<Point2>, 2> out;
  const auto sq3 = clamped_sqrt(t3);
  if (!sq3) return out;
  for (int j = 0; j < 2; ++j) {
    const double s = j == 0 ? 1.0 : -1.0;
    const auto y = clamped_sqrt((t5 + s * t6 * *sq3) / t2);
    if (!y) continue;
    out[j] = Point2{-(t4 + s * *sq3) / t1 * *y, *y};
  }
  return out;
}

/// The functions a precision-1 gradient-exact rule must integrate:
/// 1, xb1, xb2, d mu/d xb1, d mu/d xb2.
inline std::array<Poly2, 5> exactness_targets(const IntermediateQuad& iq) {
  const Poly2 mu = mu_bar_poly(iq);
  return {Poly2::monomial(0, 0), Poly2::monomial(1, 0), Poly2::monomial(0, 1), mu.d1(), mu.d2()};
}

/// Per-function residuals |Q(g) - I(g)| / max(|I(g)|, |Kbar|).
inline std::array<double, 5> exactness_residuals(const QuadratureRule& rule, const IntermediateQuad& iq) {
  if (rule.frame != Frame::intermediate_affine) {
    throw std::invalid_argument("exactness_residuals: rule must live on Kbar");
  }
  const auto targets = exactness_targets(iq);
  std::array<double, 5> res{};
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double exact = integrate(targets[i], iq);
    double approx = 0.0;
    for (std::size_t l = 0; l < rule.size(); ++l) approx += rule.weights[l] * targets[i](rule.nodes[l]);
    res[i] = std::abs(approx - exact) / std::max(std::abs(exact), iq.area());
  }
  return res;
}

inline double verify_exactness(const QuadratureRule& rule, const IntermediateQuad& iq) {
  double m = 0.0;
  for (double r : exactness_residuals(rule, iq)) m = std::max(m, r);
  return m;
}

/// Gauss-Legendre nodes and weights on [-1, 1] (Newton on P_n).
struct GaussLegendre1d {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline GaussLegendre1d gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be positive");
  GaussLegendre1d gl{std::vector<double>(n), std::vector<double>(n)};
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1.0, p0 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double pm = p0;
        p0 = p1;
        p1 = ((2.0 * j - 1.0) * z * p0 - (j - 1.0) * pm) / j;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    gl.nodes[i] = -z;
    gl.nodes[n - 1 - i] = z;
    gl.weights[i] = gl.weights[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  if (n % 2 == 1) gl.nodes[n / 2] = 0.0;
  return gl;
}

/// n x n tensor-product Gauss rule on [-1,1]^2.
inline QuadratureRule tensor_gauss(int n) {
  const GaussLegendre1d gl = gauss_legendre(n);
  QuadratureRule rule{{}, {}, Frame::reference_bilinear, std::nullopt};
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      rule.nodes.push_back({gl.nodes[i], gl.nodes[j]});
      rule.weights.push_back(gl.weights[i] * gl.weights[j]);
    }
  }
  return rule;
}

/// Pushes a reference-square rule onto Kbar through the bilinear map of
/// Kbar's own vertices, giving an intermediate-frame rule.
inline QuadratureRule tensor_rule_on_intermediate(int n, const IntermediateQuad& iq) {
  const Quadrilateral kbar{{iq.vertex(0), iq.vertex(1), iq.vertex(2), iq.vertex(3)}};
  const BilinearMap f = build_bilinear(kbar);
  const QuadratureRule ref = tensor_gauss(n);
  QuadratureRule rule{{}, {}, Frame::intermediate_affine, iq};
  for (std::size_t l = 0; l < ref.size(); ++l) {
    rule.nodes.push_back(f(ref.nodes[l]));
    rule.weights.push_back(ref.weights[l] * std::abs(f.jacobian(ref.nodes[l]).det()));
  }
  return rule;
}

/// Nodes and weights on the physical element.
struct PhysicalRule {
  std::vector<Point2> points;
  std::vector<double> weights;
};

inline bool same_domain(const IntermediateQuad& a, const IntermediateQuad& b) {
  return std::abs(a.hbar1() - b.hbar1()) <= 1e-10 * std::max(1.0, std::abs(a.hbar1())) &&
         std::abs(a.hbar2() - b.hbar2()) <= 1e-10 * std::max(1.0, std::abs(a.hbar2()));
}

inline PhysicalRule map_rule_to_physical(const QuadratureRule& rule, const Quadrilateral& q) {
  PhysicalRule out;
  out.points.reserve(rule.size());
  out.weights.reserve(rule.size());
  if (rule.frame == Frame::intermediate_affine) {
    if (rule.domain && !same_domain(*rule.domain, intermediate_params(q))) {
      throw GeometryError("map_rule_to_physical: rule was built for a different Kbar");
    }
    const AffineMap2 a = build_affine(q);
    const double jac = std::abs(a.det());
    for (std::size_t l = 0; l < rule.size(); ++l) {
      out.points.push_back(a(rule.nodes[l]));
      out.weights.push_back(jac * rule.weights[l]);
    }
  } else {
    const BilinearMap f = build_bilinear(q);
    for (std::size_t l = 0; l < rule.size(); ++l) {
      const double jac = f.jacobian(rule.nodes[l]).det();
      if (!(jac > 0.0)) {
        throw GeometryError("map_rule_to_physical: non-positive bilinear Jacobian at a node");
      }
      out.points.push_back(f(rule.nodes[l]));
      out.weights.push_back(jac * rule.weights[l]);
    }
  }
  return out;
}

/// Reference integral over K with 6x6 Gauss through F_K.
template <class F>
double reference_integral(const Quadrilateral& q, const F& f) {
  static const QuadratureRule high = tensor_gauss(6);
  const PhysicalRule pr = map_rule_to_physical(high, q);
  double s = 0.0;
  for (std::size_t l = 0; l < pr.points.size(); ++l) s += pr.weights[l] * f(pr.points[l]);
  return s;
}

template <class F>
double apply_rule(const PhysicalRule& pr, const F& f) {
  double s = 0.0;
  for (std::size_t l = 0; l < pr.points.size(); ++l) s += pr.weights[l] * f(pr.points[l]);
  return s;
}

/// E_K(f) = int_K f - sum_l w_l f(b_l).
template <class F>
double quadrature_error(const QuadratureRule& rule, const Quadrilateral& q, const F& f) {
  return reference_integral(q, f) - apply_rule(map_rule_to_physical(rule, q), f);
}

enum class RuleKind { one_point, two_point, three_point, gauss2x2, gauss3x3 };

inline constexpr std::array<RuleKind, 5> kAllRuleKinds{RuleKind::one_point, RuleKind::two_point,
                                                       RuleKind::three_point, RuleKind::gauss2x2,
                                                       RuleKind::gauss3x3};

inline std::string_view to_string(RuleKind k) {
  switch (k) {
    case RuleKind::one_point: return "1pt";
    case RuleKind::two_point: return "2pt";
    case RuleKind::three_point: return "3pt";
    case RuleKind::gauss2x2: return "gauss2x2";
    case RuleKind::gauss3x3: return "gauss3x3";
  }
  return "?";
}

inline RuleKind parse_rule_kind(std::string_view s) {
  for (RuleKind k : kAllRuleKinds) {
    if (s == to_string(k)) return k;
  }
  throw std::invalid_argument("unknown rule '" + std::string(s) + "'");
}

/// The rule of the given kind for an element with intermediate domain iq.
/// Assembly uses allow_outside: on strongly distorted cells the exact
/// symmetric nodes may leave Kbar.
inline QuadratureRule make_rule(RuleKind kind, const IntermediateQuad& iq,
                                NodePlacement placement = NodePlacement::allow_outside) {
  switch (kind) {
    case RuleKind::one_point: return one_point_rule(iq);
    case RuleKind::two_point: return symmetric_rule(iq, 2, placement);
    case RuleKind::three_point: return symmetric_rule(iq, 3, placement);
    case RuleKind::gauss2x2: return tensor_gauss(2);
    case RuleKind::gauss3x3: return tensor_gauss(3);
  }
  throw std::invalid_argument("make_rule: bad kind");
}

} // namespace dssy
