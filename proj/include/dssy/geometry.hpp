#pragma once
//
// Quadrilateral geometry: the two line functionals through the diagonals,
// the MCL-type intermediate quadrilateral Kbar with vertices
// (1,0), (0,1), (hbar1,0), (0,hbar2), the affine map Kbar -> K and the
// standard bilinear map [-1,1]^2 -> K.
//
// Vertex convention: v1..v4 counter-clockwise, v1/v3 and v2/v4 are the
// diagonal pairs. On a reference square this is v1=(1,1), v2=(-1,1),
// v3=(-1,-1), v4=(1,-1).
//
#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "dssy/errors.hpp"

namespace dssy {

struct Point2 {
  double x1 = 0.0;
  double x2 = 0.0;

  friend constexpr Point2 operator+(Point2 a, Point2 b) { return {a.x1 + b.x1, a.x2 + b.x2}; }
  friend constexpr Point2 operator-(Point2 a, Point2 b) { return {a.x1 - b.x1, a.x2 - b.x2}; }
  friend constexpr Point2 operator-(Point2 a) { return {-a.x1, -a.x2}; }
  friend constexpr Point2 operator*(double s, Point2 a) { return {s * a.x1, s * a.x2}; }
  friend constexpr Point2 operator*(Point2 a, double s) { return {s * a.x1, s * a.x2}; }
  friend constexpr Point2 operator/(Point2 a, double s) { return {a.x1 / s, a.x2 / s}; }
  friend constexpr bool operator==(Point2 a, Point2 b) = default;
};

constexpr double dot(Point2 a, Point2 b) { return a.x1 * b.x1 + a.x2 * b.x2; }
/// z-component of the planar cross product.
constexpr double cross(Point2 a, Point2 b) { return a.x1 * b.x2 - a.x2 * b.x1; }
inline double norm(Point2 a) { return std::hypot(a.x1, a.x2); }

/// 2x2 matrix stored by columns: [c1 c2].
struct Mat2 {
  Point2 c1;
  Point2 c2;

  constexpr Point2 operator*(Point2 x) const { return x.x1 * c1 + x.x2 * c2; }
  constexpr double det() const { return cross(c1, c2); }
  constexpr Mat2 transpose() const { return {{c1.x1, c2.x1}, {c1.x2, c2.x2}}; }
  Mat2 inverse() const {
    const double d = det();
    if (d == 0.0 || !std::isfinite(d)) {
      throw GeometryError("singular 2x2 matrix");
    }
    return {{c2.x2 / d, -c1.x2 / d}, {-c2.x1 / d, c1.x1 / d}};
  }
};

struct Quadrilateral {
  std::array<Point2, 4> v;

  const Point2& operator[](int j) const { return v[static_cast<std::size_t>(j)]; }
};

/// Shoelace area, positive for counter-clockwise vertex order.
inline double signed_area(const Quadrilateral& q) {
  double s = 0.0;
  for (int j = 0; j < 4; ++j) {
    s += cross(q[j], q[(j + 1) % 4]);
  }
  return 0.5 * s;
}

/// Threshold below which hbar_i is considered negative enough.
inline constexpr double kConvexityThreshold = 1e-10;

/// Parameters of the intermediate quadrilateral Kbar.
class IntermediateQuad {
public:
  IntermediateQuad(double hbar1, double hbar2) : hbar1_(hbar1), hbar2_(hbar2) {
    if (!std::isfinite(hbar1) || !std::isfinite(hbar2)) {
      throw GeometryError("non-finite intermediate parameters");
    }
    if (hbar1 > -kConvexityThreshold || hbar2 > -kConvexityThreshold) {
      std::ostringstream os;
      os << "non-convex quadrilateral: hbar = (" << hbar1 << ", " << hbar2 << ")";
      throw NonConvexError(os.str());
    }
  }

  double hbar1() const { return hbar1_; }
  double hbar2() const { return hbar2_; }
  /// hh_i = 1 + hbar_i; both vanish exactly for parallelograms.
  double hh1() const { return 1.0 + hbar1_; }
  double hh2() const { return 1.0 + hbar2_; }

  Point2 barycenter() const { return {hh1() / 3.0, hh2() / 3.0}; }
  double area() const { return 0.5 * (1.0 - hbar1_) * (1.0 - hbar2_); }

  /// Vertices (1,0), (0,1), (hbar1,0), (0,hbar2); j = 0..3.
  Point2 vertex(int j) const {
    switch (j) {
      case 0: return {1.0, 0.0};
      case 1: return {0.0, 1.0};
      case 2: return {hbar1_, 0.0};
      default: return {0.0, hbar2_};
    }
  }

  /// Midpoint of local edge j, which joins vertex j and vertex j+1 (mod 4).
  Point2 midpoint(int j) const { return 0.5 * (vertex(j) + vertex((j + 1) % 4)); }

  /// Closed-domain membership with absolute tolerance `tol`.
  bool contains(Point2 x, double tol = 1e-12) const {
    for (int j = 0; j < 4; ++j) {
      const Point2 a = vertex(j);
      const Point2 b = vertex((j + 1) % 4);
      // Kbar is counter-clockwise, so interior points sit left of every edge.
      if (cross(b - a, x - a) < -tol * norm(b - a)) {
        return false;
      }
    }
    return true;
  }

  friend bool operator==(const IntermediateQuad&, const IntermediateQuad&) = default;

private:
  double hbar1_;
  double hbar2_;
};

/// l1 vanishes on the line v1v3 and equals 1 at v2.
inline double line_functional_1(const Quadrilateral& q, Point2 x) {
  const Point2 d13 = q[0] - q[2];
  const double den = cross(q[1] - q[2], d13);
  if (std::abs(den) <= 1e-300 || !std::isfinite(den)) {
    throw GeometryError("line_functional_1: v2 is collinear with v1, v3");
  }
  return cross(x - q[2], d13) / den;
}

/// l2 vanishes on the line v2v4 and equals 1 at v1.
inline double line_functional_2(const Quadrilateral& q, Point2 x) {
  const Point2 d24 = q[1] - q[3];
  const double den = cross(q[0] - q[3], d24);
  if (std::abs(den) <= 1e-300 || !std::isfinite(den)) {
    throw GeometryError("line_functional_2: v1 is collinear with v2, v4");
  }
  return cross(x - q[3], d24) / den;
}

/// (hbar1, hbar2) = (l2(v3), l1(v4)). Throws NonConvexError unless both are
/// below -kConvexityThreshold. Orientation is not checked here; reflected
/// quadrilaterals give the same parameters.
inline IntermediateQuad intermediate_params(const Quadrilateral& q) {
  return IntermediateQuad(line_functional_2(q, q[2]), line_functional_1(q, q[3]));
}

struct AffineMap2 {
  Mat2 m;
  Point2 shift;

  Point2 operator()(Point2 x) const { return m * x + shift; }
  double det() const { return m.det(); }
  AffineMap2 inverse() const {
    const Mat2 mi = m.inverse();
    return {mi, -(mi * shift)};
  }
};

/// The two expressions for the diagonal intersection xi, one per diagonal.
struct DiagonalIntersection {
  Point2 from_diagonal_13;
  Point2 from_diagonal_24;
};

inline DiagonalIntersection diagonal_intersection(const Quadrilateral& q, const IntermediateQuad& iq) {
  const double h1 = iq.hbar1();
  const double h2 = iq.hbar2();
  return {(q[2] - h1 * q[0]) / (1.0 - h1), (q[3] - h2 * q[1]) / (1.0 - h2)};
}

/// Affine map Abar_K taking Kbar onto K vertex by vertex. Its inverse is
/// x -> (l2(x), l1(x)).
inline AffineMap2 build_affine(const Quadrilateral& q) {
  const IntermediateQuad iq = intermediate_params(q);
  const double h1 = iq.hbar1();
  const double h2 = iq.hbar2();
  AffineMap2 a{{(q[0] - q[2]) / (1.0 - h1), (q[1] - q[3]) / (1.0 - h2)},
               diagonal_intersection(q, iq).from_diagonal_13};
  const double d = a.det();
  if (!std::isfinite(d) || std::abs(d) <= 1e-14 * norm(a.m.c1) * norm(a.m.c2)) {
    throw GeometryError("build_affine: singular map");
  }
  return a;
}

/// F_K(xh) = b + A xh + d xh1 xh2 on the reference square [-1,1]^2.
struct BilinearMap {
  Mat2 a;
  Point2 d;
  Point2 b;

  Point2 operator()(Point2 xh) const { return b + a * xh + (xh.x1 * xh.x2) * d; }
  Mat2 jacobian(Point2 xh) const { return {a.c1 + xh.x2 * d, a.c2 + xh.x1 * d}; }
};

inline BilinearMap build_bilinear(const Quadrilateral& q) {
  const Point2 &v1 = q[0], &v2 = q[1], &v3 = q[2], &v4 = q[3];
  BilinearMap f{{0.25 * (v1 - v2 - v3 + v4), 0.25 * (v1 + v2 - v3 - v4)},
                0.25 * (v1 - v2 + v3 - v4),
                0.25 * (v1 + v2 + v3 + v4)};
  if (f.a.det() == 0.0) {
    throw GeometryError("build_bilinear: degenerate quadrilateral");
  }
  return f;
}

/// Reference-square vertex j (0-based) matching the physical labelling.
constexpr Point2 reference_vertex(int j) {
  constexpr std::array<Point2, 4> v{{{1.0, 1.0}, {-1.0, 1.0}, {-1.0, -1.0}, {1.0, -1.0}}};
  return v[static_cast<std::size_t>(j)];
}

inline double diameter(const Quadrilateral& q) {
  double d = 0.0;
  for (int i = 0; i < 4; ++i) {
    for (int j = i + 1; j < 4; ++j) {
      d = std::max(d, norm(q[i] - q[j]));
    }
  }
  return d;
}

} // namespace dssy
