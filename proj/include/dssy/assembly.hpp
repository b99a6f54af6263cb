#pragma once
//
// Quadrature-approximated stiffness matrix and load vector for
//   -div(kappa grad u) = f in Omega,  u = 0 on the boundary,
// over the nonconforming DSSY space, plain conjugate gradients, and broken
// H1 / L2 error norms.
//
#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "dssy/element.hpp"
#include "dssy/mesh.hpp"
#include "dssy/quadrature.hpp"

namespace dssy {

using ScalarField = std::function<double(Point2)>;
using VectorField = std::function<Point2(Point2)>;

/// Diffusion coefficient: scalar multiple of the identity, or a symmetric
/// tensor field when `tensor` is set.
struct Coefficient {
  ScalarField scalar;
  std::function<Mat2(Point2)> tensor;

  static Coefficient constant(double k) {
    return {[k](Point2) { return k; }, {}};
  }

  double apply(Point2 x, Point2 gu, Point2 gv) const {
    if (tensor) return dot(tensor(x) * gu, gv);
    return scalar(x) * dot(gu, gv);
  }
};

struct ElementContribution {
  Mat4 stiffness{};
  std::array<double, 4> load{};
};

/// K_e[i][j] = sum_l w_l kappa(b_l) grad phi_i(b_l) . grad phi_j(b_l),
/// F_e[i] = sum_l w_l f(b_l) phi_i(b_l), with w_l, b_l the physical rule.
inline ElementContribution element_matrices(const MappedElement& el, const QuadratureRule& rule,
                                            const Coefficient& kappa, const ScalarField& f) {
  ElementContribution out;
  auto accumulate = [&](Point2 x, double w, const std::array<double, 4>& phi, const std::array<Point2, 4>& grad) {
    for (int i = 0; i < 4; ++i) {
      for (int j = i; j < 4; ++j) out.stiffness[i][j] += w * kappa.apply(x, grad[i], grad[j]);
    }
    if (f) {
      const double fx = f(x);
      for (int i = 0; i < 4; ++i) out.load[i] += w * fx * phi[i];
    }
  };

  if (rule.frame == Frame::intermediate_affine) {
    if (rule.domain && !same_domain(*rule.domain, el.iq())) {
      throw GeometryError("element_matrices: rule/element frame mismatch");
    }
    const double jac = el.jacobian();
    for (std::size_t l = 0; l < rule.size(); ++l) {
      const Point2 xb = rule.nodes[l];
      accumulate(el.to_physical()(xb), jac * rule.weights[l], el.basis().values(xb), el.gradients_at_intermediate(xb));
    }
  } else {
    const PhysicalRule pr = map_rule_to_physical(rule, el.quad());
    for (std::size_t l = 0; l < pr.points.size(); ++l) {
      const Point2 x = pr.points[l];
      accumulate(x, pr.weights[l], el.values(x), el.gradients(x));
    }
  }
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < i; ++j) out.stiffness[i][j] = out.stiffness[j][i];
  return out;
}

/// Compressed-row sparse matrix.
struct CsrMatrix {
  int n = 0;
  std::vector<int> row_ptr{0};
  std::vector<int> col;
  std::vector<double> val;

  void multiply(const std::vector<double>& x, std::vector<double>& y) const {
    y.assign(static_cast<std::size_t>(n), 0.0);
    for (int r = 0; r < n; ++r) {
      double s = 0.0;
      for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k) s += val[k] * x[col[k]];
      y[r] = s;
    }
  }

  double at(int r, int c) const {
    const auto first = col.begin() + row_ptr[r];
    const auto last = col.begin() + row_ptr[r + 1];
    const auto it = std::lower_bound(first, last, c);
    return (it != last && *it == c) ? val[static_cast<std::size_t>(it - col.begin())] : 0.0;
  }

  std::vector<std::vector<double>> to_dense() const {
    std::vector<std::vector<double>> d(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n)));
    for (int r = 0; r < n; ++r)
      for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k) d[r][col[k]] = val[k];
    return d;
  }
};

struct Triplet {
  int row;
  int col;
  double value;
};

/// Sums duplicates in insertion order.
inline CsrMatrix csr_from_triplets(int n, std::vector<Triplet> t) {
  std::stable_sort(t.begin(), t.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  CsrMatrix m;
  m.n = n;
  m.row_ptr.assign(static_cast<std::size_t>(n) + 1, 0);
  for (std::size_t k = 0; k < t.size();) {
    std::size_t e = k;
    double s = 0.0;
    while (e < t.size() && t[e].row == t[k].row && t[e].col == t[k].col) s += t[e++].value;
    m.col.push_back(t[k].col);
    m.val.push_back(s);
    ++m.row_ptr[static_cast<std::size_t>(t[k].row) + 1];
    k = e;
  }
  std::partial_sum(m.row_ptr.begin(), m.row_ptr.end(), m.row_ptr.begin());
  return m;
}

struct SparseSystem {
  CsrMatrix matrix;
  std::vector<double> rhs;
};

enum class AssemblyOrder { forward, reversed };

inline SparseSystem assemble(const Mesh& mesh, const DofMap& dofs, RuleKind kind, const Coefficient& kappa,
                             const ScalarField& f, AssemblyOrder order = AssemblyOrder::forward) {
  SparseSystem sys;
  sys.rhs.assign(static_cast<std::size_t>(dofs.num_dofs), 0.0);
  std::vector<Triplet> trip;
  trip.reserve(mesh.cells.size() * 16);
  const std::size_t nc = mesh.cells.size();
  for (std::size_t k = 0; k < nc; ++k) {
    const std::size_t c = order == AssemblyOrder::forward ? k : nc - 1 - k;
    const MappedElement el(mesh.cell_quad(c));
    const ElementContribution ec = element_matrices(el, make_rule(kind, el.iq()), kappa, f);
    std::array<int, 4> g{};
    for (int j = 0; j < 4; ++j) g[j] = dofs.dof(mesh.cell_edges[c][j]);
    for (int i = 0; i < 4; ++i) {
      if (g[i] < 0) continue;
      sys.rhs[g[i]] += ec.load[i];
      for (int j = 0; j < 4; ++j) {
        if (g[j] >= 0) trip.push_back({g[i], g[j], ec.stiffness[i][j]});
      }
    }
  }
  sys.matrix = csr_from_triplets(dofs.num_dofs, std::move(trip));
  return sys;
}

struct SolveReport {
  int iterations = 0;
  double relative_residual = 0.0; ///< ||b - A x|| / ||b||, recomputed at exit
  bool converged = false;
};

struct SolveResult {
  std::vector<double> x;
  SolveReport report;
};

/// Unpreconditioned conjugate gradients from x = 0, stopping on the relative
/// residual ||b - A x|| / ||b|| <= tol. max_iter <= 0 means 10 * n.
inline SolveResult cg_solve(const SparseSystem& sys, double tol = 1e-7, int max_iter = 0) {
  const auto n = static_cast<std::size_t>(sys.matrix.n);
  if (max_iter <= 0) max_iter = std::max(1, 10 * sys.matrix.n);
  SolveResult res;
  res.x.assign(n, 0.0);
  auto dotv = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  };
  const double bnorm = std::sqrt(dotv(sys.rhs, sys.rhs));
  if (n == 0 || bnorm == 0.0) {
    res.report.converged = true;
    return res;
  }
  std::vector<double> r = sys.rhs, p = r, ap(n);
  double rr = dotv(r, r);
  int it = 0;
  while (it < max_iter && std::sqrt(rr) > tol * bnorm) {
    sys.matrix.multiply(p, ap);
    const double pap = dotv(p, ap);
    if (!(pap > 0.0)) break; // not positive definite along p
    const double alpha = rr / pap;
    for (std::size_t i = 0; i < n; ++i) {
      res.x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    const double rr_new = dotv(r, r);
    const double beta = rr_new / rr;
    rr = rr_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
    ++it;
  }
  sys.matrix.multiply(res.x, ap);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += (sys.rhs[i] - ap[i]) * (sys.rhs[i] - ap[i]);
  res.report.iterations = it;
  res.report.relative_residual = std::sqrt(s) / bnorm;
  res.report.converged = res.report.relative_residual <= tol;
  return res;
}

/// Midpoint-value DOFs of u on the interior edges.
inline std::vector<double> interpolate(const Mesh& mesh, const DofMap& dofs, const ScalarField& u) {
  std::vector<double> x(static_cast<std::size_t>(dofs.num_dofs), 0.0);
  for (std::size_t e = 0; e < mesh.edges.size(); ++e) {
    const int d = dofs.dof(static_cast<int>(e));
    if (d >= 0) x[d] = u(0.5 * (mesh.vertices[mesh.edges[e].a] + mesh.vertices[mesh.edges[e].b]));
  }
  return x;
}

struct ErrorNorms {
  double h1_semi = 0.0; ///< broken H1 seminorm |u - u_h|_{1,h}
  double l2 = 0.0;      ///< ||u - u_h||_0
};

/// Element-wise 3x3 Gauss through the bilinear map of each cell.
inline ErrorNorms compute_errors(const Mesh& mesh, const DofMap& dofs, const std::vector<double>& solution,
                                 const ScalarField& u, const VectorField& grad_u) {
  static const QuadratureRule rule = tensor_gauss(3);
  double h1 = 0.0, l2 = 0.0;
  for (std::size_t c = 0; c < mesh.cells.size(); ++c) {
    const MappedElement el(mesh.cell_quad(c));
    std::array<double, 4> coef{};
    for (int j = 0; j < 4; ++j) {
      const int d = dofs.dof(mesh.cell_edges[c][j]);
      coef[j] = d >= 0 ? solution[static_cast<std::size_t>(d)] : 0.0;
    }
    const PhysicalRule pr = map_rule_to_physical(rule, el.quad());
    for (std::size_t l = 0; l < pr.points.size(); ++l) {
      const Point2 x = pr.points[l];
      const Point2 xb = el.to_intermediate()(x);
      const auto phi = el.basis().values(xb);
      const auto grad = el.gradients_at_intermediate(xb);
      double uh = 0.0;
      Point2 guh{};
      for (int j = 0; j < 4; ++j) {
        uh += coef[j] * phi[j];
        guh = guh + coef[j] * grad[j];
      }
      const double eu = u(x) - uh;
      const Point2 eg = grad_u(x) - guh;
      l2 += pr.weights[l] * eu * eu;
      h1 += pr.weights[l] * dot(eg, eg);
    }
  }
  return {std::sqrt(h1), std::sqrt(l2)};
}

} // namespace dssy
