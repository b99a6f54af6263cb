#pragma once
//
// Nonparametric DSSY element on the intermediate quadrilateral Kbar.
//
// Local space: span{1, xb1, xb2, mu} with the quartic bubble
//   mu(xb) = xb1 xb2 (q(xb1; hbar1) + cbar q(xb2; hbar2)),
//   q(x; h) = x^2 - (3/10)(1+h) x + (3/20) h,
// which has equal edge means and edge midpoint values on every edge of Kbar.
// Degrees of freedom are the four edge midpoint values, local edge j joining
// Kbar vertices j and j+1.
//
#include <array>
#include <cmath>
#include <cstdlib>
#include <iostream>

#include "dssy/geometry.hpp"

namespace dssy {

inline double qbar(double x, double h) { return x * x - 0.3 * (1.0 + h) * x + 0.15 * h; }
inline double qbar_derivative(double x, double h) { return 2.0 * x - 0.3 * (1.0 + h); }

inline double mu_bar(const IntermediateQuad& iq, Point2 x, double cbar = 1.0) {
  return x.x1 * x.x2 * (qbar(x.x1, iq.hbar1()) + cbar * qbar(x.x2, iq.hbar2()));
}

inline Point2 grad_mu_bar(const IntermediateQuad& iq, Point2 x, double cbar = 1.0) {
  const double qsum = qbar(x.x1, iq.hbar1()) + cbar * qbar(x.x2, iq.hbar2());
  return {x.x2 * qsum + x.x1 * x.x2 * qbar_derivative(x.x1, iq.hbar1()),
          x.x1 * qsum + cbar * x.x1 * x.x2 * qbar_derivative(x.x2, iq.hbar2())};
}

/// Closed-form determinant of the midpoint interpolation matrix
/// a_jk = psi_k(mbar_j). Nonzero iff
/// hbar1^2 + hbar1 + 1 + cbar (hbar2^2 + hbar2 + 1) != 0.
inline double unisolvency_det(const IntermediateQuad& iq, double cbar) {
  const double h1 = iq.hbar1();
  const double h2 = iq.hbar2();
  const double s = (1.0 - h1) * (1.0 - h2);
  return -(1.0 / 160.0) * s * s * (h1 * h1 + h1 + 1.0 + cbar * (h2 * h2 + h2 + 1.0));
}

using Mat4 = std::array<std::array<double, 4>, 4>;

/// a_jk = psi_k(mbar_j) with psi = (1, xb1, xb2, mu(.; cbar)).
inline Mat4 interpolation_matrix(const IntermediateQuad& iq, double cbar = 1.0) {
  Mat4 a{};
  for (int j = 0; j < 4; ++j) {
    const Point2 m = iq.midpoint(j);
    a[j] = {1.0, m.x1, m.x2, mu_bar(iq, m, cbar)};
  }
  return a;
}

namespace detail {

/// Solves M X = B for 4x4 M by Gaussian elimination with partial pivoting.
inline Mat4 solve4(Mat4 m, Mat4 b) {
  for (int col = 0; col < 4; ++col) {
    int piv = col;
    for (int r = col + 1; r < 4; ++r) {
      if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
    }
    if (m[piv][col] == 0.0) {
      throw GeometryError("solve4: singular matrix");
    }
    std::swap(m[piv], m[col]);
    std::swap(b[piv], b[col]);
    for (int r = col + 1; r < 4; ++r) {
      const double f = m[r][col] / m[col][col];
      for (int c = col; c < 4; ++c) m[r][c] -= f * m[col][c];
      for (int c = 0; c < 4; ++c) b[r][c] -= f * b[col][c];
    }
  }
  for (int col = 3; col >= 0; --col) {
    for (int c = 0; c < 4; ++c) {
      double s = b[col][c];
      for (int k = col + 1; k < 4; ++k) s -= m[col][k] * b[k][c];
      b[col][c] = s / m[col][col];
    }
  }
  return b;
}

inline Mat4 transpose(const Mat4& a) {
  Mat4 t{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) t[i][j] = a[j][i];
  return t;
}

} // namespace detail

/// Coefficients c_jk with phi_j = sum_k c_jk psi_k, from the closed-form
/// inverse of A^T (cbar = 1).
inline Mat4 basis_coefficients_closed_form(const IntermediateQuad& iq) {
  const double h1 = iq.hbar1();
  const double h2 = iq.hbar2();
  const double d = 2.0 + h1 + h2 + h1 * h1 + h2 * h2;
  const double hs[2] = {h1, h2};
  auto n = [&](int j, int k) {
    const double hj = hs[j - 1];
    const double hk = hs[k - 1];
    return (hj * hj + hj + hk * hk + 1.0) * hk / d;
  };
  auto nh = [&](int j) {
    const double hj = hs[j - 1];
    return (hj * hj + hj + 2.0) / d;
  };
  const double s = 2.0 / ((1.0 - h1) * (1.0 - h2));
  // The bubble column alternates +-20/D; the (4,4) entry is -20/D (the
  // inverse of A^T, checked in debug builds below).
  Mat4 c{{{0.5 * h1 * h2, -n(1, 2), -n(2, 1), 20.0 / d},
          {-0.5 * h2, n(1, 2), nh(2), -20.0 / d},
          {0.5, -nh(1), -nh(2), 20.0 / d},
          {-0.5 * h1, nh(1), n(2, 1), -20.0 / d}}};
  for (auto& row : c)
    for (double& x : row) x *= s;
  return c;
}

/// Coefficients from a numeric solve of A^T C^T = I, i.e. C = (A^T)^{-1}.
inline Mat4 basis_coefficients_numeric(const IntermediateQuad& iq) {
  Mat4 id{};
  for (int i = 0; i < 4; ++i) id[i][i] = 1.0;
  // C A^T = I  <=>  A C^T = I.
  return detail::transpose(detail::solve4(interpolation_matrix(iq), id));
}

/// The four DSSY shape functions on Kbar in the monomial basis
/// (1, xb1, xb2, mu). cbar is fixed to 1.
struct DssyBasis {
  IntermediateQuad iq;
  double cbar = 1.0;
  Mat4 coeff{};

  std::array<double, 4> values(Point2 xb) const {
    const double psi[4] = {1.0, xb.x1, xb.x2, mu_bar(iq, xb, cbar)};
    std::array<double, 4> out{};
    for (int j = 0; j < 4; ++j) {
      out[j] = coeff[j][0] * psi[0] + coeff[j][1] * psi[1] + coeff[j][2] * psi[2] + coeff[j][3] * psi[3];
    }
    return out;
  }

  /// Gradients with respect to the Kbar coordinates.
  std::array<Point2, 4> gradients(Point2 xb) const {
    const Point2 gm = grad_mu_bar(iq, xb, cbar);
    std::array<Point2, 4> out{};
    for (int j = 0; j < 4; ++j) {
      out[j] = Point2{coeff[j][1], coeff[j][2]} + coeff[j][3] * gm;
    }
    return out;
  }
};

inline DssyBasis build_basis(const IntermediateQuad& iq) {
  DssyBasis b{iq, 1.0, basis_coefficients_closed_form(iq)};
#ifndef NDEBUG
  const Mat4 check = basis_coefficients_numeric(iq);
  for (int j = 0; j < 4; ++j) {
    for (int k = 0; k < 4; ++k) {
      if (std::abs(check[j][k] - b.coeff[j][k]) > 1e-9 * std::max(1.0, std::abs(check[j][k]))) {
        std::cerr << "build_basis: closed-form coefficient (" << j << "," << k << ") = " << b.coeff[j][k]
                  << " disagrees with numeric inverse " << check[j][k] << '\n';
        std::abort();
      }
    }
  }
#endif
  return b;
}

enum class EdgeFunctionalKind { mean_integral, midpoint_value };

/// Edge functional of f on the segment [a, b]. The mean integral uses
/// three-point Gauss-Legendre, exact for quartics along the edge.
template <class F>
double edge_functional(EdgeFunctionalKind kind, const F& f, Point2 a, Point2 b) {
  const Point2 m = 0.5 * (a + b);
  if (kind == EdgeFunctionalKind::midpoint_value) {
    return f(m);
  }
  const Point2 half = 0.5 * (b - a);
  const double g = std::sqrt(0.6);
  // (1/|e|) int_e f ds = (1/2) int_{-1}^{1} f(m + t half) dt
  return 0.5 * ((8.0 / 9.0) * f(m) + (5.0 / 9.0) * (f(m - g * half) + f(m + g * half)));
}

/// DSSY element on a physical quadrilateral K: phi_j = phibar_j o Abar_K^{-1}.
class MappedElement {
public:
  explicit MappedElement(const Quadrilateral& q)
      : quad_(q),
        iq_(intermediate_params(q)),
        to_physical_(build_affine(q)),
        to_intermediate_(to_physical_.inverse()),
        basis_(build_basis(iq_)),
        inv_t_(to_physical_.m.inverse().transpose()) {}

  const Quadrilateral& quad() const { return quad_; }
  const IntermediateQuad& iq() const { return iq_; }
  const AffineMap2& to_physical() const { return to_physical_; }
  const AffineMap2& to_intermediate() const { return to_intermediate_; }
  const DssyBasis& basis() const { return basis_; }
  /// |det J| of Abar_K.
  double jacobian() const { return std::abs(to_physical_.det()); }

  std::array<double, 4> values(Point2 x) const { return basis_.values(to_intermediate_(x)); }
  std::array<Point2, 4> gradients(Point2 x) const { return gradients_at_intermediate(to_intermediate_(x)); }

  /// Physical gradients evaluated at a point given in Kbar coordinates.
  std::array<Point2, 4> gradients_at_intermediate(Point2 xb) const {
    auto g = basis_.gradients(xb);
    for (auto& p : g) p = inv_t_ * p;
    return g;
  }

  /// Physical midpoint of local edge j (vertices j, j+1).
  Point2 edge_midpoint(int j) const { return 0.5 * (quad_[j] + quad_[(j + 1) % 4]); }

private:
  Quadrilateral quad_;
  IntermediateQuad iq_;
  AffineMap2 to_physical_;
  AffineMap2 to_intermediate_;
  DssyBasis basis_;
  Mat2 inv_t_;
};

} // namespace dssy
