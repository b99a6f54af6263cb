#pragma once
//
// Convergence study on randomly perturbed meshes of the unit square:
//   kappa = 1 + (1+x1)(1+x2) + eps sin(10 pi x1) sin(5 pi x2),
//   u     = sin(3 pi x1) x2 (1-x2) + eps sin(pi x1/eps) sin(pi x2/eps),
//   eps   = 0.2, f = -div(kappa grad u).
//
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "dssy/assembly.hpp"
#include "dssy/mesh.hpp"
#include "dssy/quadrature.hpp"

namespace dssy {

struct Problem {
  Coefficient kappa;
  ScalarField f;
  ScalarField u;
  VectorField grad_u;
};

inline Problem builtin_problem() {
  constexpr double pi = std::numbers::pi;
  constexpr double eps = 0.2;
  auto kappa = [](Point2 x) {
    return 1.0 + (1.0 + x.x1) * (1.0 + x.x2) + eps * std::sin(10.0 * pi * x.x1) * std::sin(5.0 * pi * x.x2);
  };
  auto grad_kappa = [](Point2 x) -> Point2 {
    return {(1.0 + x.x2) + 10.0 * pi * eps * std::cos(10.0 * pi * x.x1) * std::sin(5.0 * pi * x.x2),
            (1.0 + x.x1) + 5.0 * pi * eps * std::sin(10.0 * pi * x.x1) * std::cos(5.0 * pi * x.x2)};
  };
  auto u = [](Point2 x) {
    return std::sin(3.0 * pi * x.x1) * x.x2 * (1.0 - x.x2) +
           eps * std::sin(pi * x.x1 / eps) * std::sin(pi * x.x2 / eps);
  };
  auto grad_u = [](Point2 x) -> Point2 {
    return {3.0 * pi * std::cos(3.0 * pi * x.x1) * x.x2 * (1.0 - x.x2) +
                pi * std::cos(pi * x.x1 / eps) * std::sin(pi * x.x2 / eps),
            std::sin(3.0 * pi * x.x1) * (1.0 - 2.0 * x.x2) + pi * std::sin(pi * x.x1 / eps) * std::cos(pi * x.x2 / eps)};
  };
  auto laplace_u = [](Point2 x) {
    const double s3 = std::sin(3.0 * pi * x.x1);
    const double bump = std::sin(pi * x.x1 / eps) * std::sin(pi * x.x2 / eps);
    return -9.0 * pi * pi * s3 * x.x2 * (1.0 - x.x2) - 2.0 * s3 - 2.0 * pi * pi / eps * bump;
  };
  auto f = [=](Point2 x) { return -(kappa(x) * laplace_u(x) + dot(grad_kappa(x), grad_u(x))); };
  return {{kappa, {}}, f, u, grad_u};
}

struct ExperimentConfig {
  std::vector<int> n_list{4, 8, 16, 32, 64, 128};
  RuleKind rule = RuleKind::three_point;
  double perturbation = 0.2;
  int ensembles = 20;
  std::uint64_t seed = 1;
  double cg_tol = 1e-7;
  /// Run ensembles on one thread (also forced by DSSY_SEQUENTIAL=1).
  bool sequential = false;
  /// 0 = hardware concurrency.
  int threads = 0;

  void validate() const {
    if (n_list.empty()) throw std::invalid_argument("N-list is empty");
    for (std::size_t i = 0; i < n_list.size(); ++i) {
      if (n_list[i] < 1) throw std::invalid_argument("N must be positive");
      if (i > 0 && n_list[i] <= n_list[i - 1]) throw std::invalid_argument("N-list must be strictly increasing");
    }
    if (ensembles < 1) throw std::invalid_argument("ensembles must be >= 1");
    if (!(perturbation >= 0.0 && perturbation < 0.5)) throw std::invalid_argument("perturbation must lie in [0, 0.5)");
    if (!(cg_tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
  }
};

struct EnsembleResult {
  ErrorNorms errors;
  SolveReport solve;
  bool ok = false; ///< solve converged and every rule was constructible
  std::string failure;
  int outside_cells = 0; ///< cells whose symmetric nodes leave Kbar
};

struct TableRow {
  int n = 0;
  double h1_error = 0.0;
  std::optional<double> h1_order;
  double l2_error = 0.0;
  std::optional<double> l2_order;
  /// Orders averaged over ensembles (each ensemble's own error ratio).
  std::optional<double> h1_order_mean;
  std::optional<double> l2_order_mean;
  double cg_iterations = 0.0;
  int failures = 0;
  int outside_cells = 0; ///< summed over ensembles
  std::vector<EnsembleResult> ensembles;
};

/// Number of cells on which the symmetric rule has no node set inside Kbar.
inline int count_outside_cells(const Mesh& mesh, RuleKind rule) {
  if (rule != RuleKind::two_point && rule != RuleKind::three_point) return 0;
  const int L = rule == RuleKind::two_point ? 2 : 3;
  int count = 0;
  for (std::size_t c = 0; c < mesh.cells.size(); ++c) {
    const IntermediateQuad iq = intermediate_params(mesh.cell_quad(c));
    if (!symmetric_offsets(iq, L, NodePlacement::allow_outside).inside) ++count;
  }
  return count;
}

/// One solve of the built-in problem on a given mesh.
inline EnsembleResult solve_on_mesh(const Mesh& mesh, RuleKind rule, double tol, const Problem& prob) {
  EnsembleResult res;
  try {
    const DofMap dofs = build_dofmap(mesh);
    const SparseSystem sys = assemble(mesh, dofs, rule, prob.kappa, prob.f);
    const SolveResult sol = cg_solve(sys, tol);
    res.solve = sol.report;
    res.outside_cells = count_outside_cells(mesh, rule);
    res.errors = compute_errors(mesh, dofs, sol.x, prob.u, prob.grad_u);
    res.ok = sol.report.converged;
    if (!res.ok) res.failure = "CG did not converge";
  } catch (const std::exception& e) {
    res.failure = e.what();
  }
  return res;
}

inline bool sequential_forced() {
  const char* s = std::getenv("DSSY_SEQUENTIAL");
  return s != nullptr && *s != '\0' && std::string(s) != "0";
}

/// order = log(e_prev / e) / log(N / N_prev), i.e. log2 of the ratio when N doubles.
inline double convergence_order(double e_prev, double e, int n_prev, int n) {
  return std::log(e_prev / e) / std::log(static_cast<double>(n) / n_prev);
}

inline std::vector<TableRow> run_convergence(const ExperimentConfig& cfg) {
  cfg.validate();
  const Problem prob = builtin_problem();
  const bool seq = cfg.sequential || sequential_forced();
  unsigned nthreads = seq ? 1u : (cfg.threads > 0 ? static_cast<unsigned>(cfg.threads) : std::thread::hardware_concurrency());
  nthreads = std::max(1u, std::min(nthreads, static_cast<unsigned>(cfg.ensembles)));

  std::vector<TableRow> rows;
  for (int n : cfg.n_list) {
    TableRow row;
    row.n = n;
    row.ensembles.resize(static_cast<std::size_t>(cfg.ensembles));
    const Mesh base = uniform_mesh(n);
    auto run_one = [&](int e) {
      try {
        const Mesh mesh = perturb(base, cfg.perturbation, cfg.seed + static_cast<std::uint64_t>(e));
        row.ensembles[static_cast<std::size_t>(e)] = solve_on_mesh(mesh, cfg.rule, cfg.cg_tol, prob);
      } catch (const std::exception& ex) {
        row.ensembles[static_cast<std::size_t>(e)].failure = ex.what();
      }
    };
    if (nthreads == 1) {
      for (int e = 0; e < cfg.ensembles; ++e) run_one(e);
    } else {
      std::atomic<int> next{0};
      std::vector<std::thread> pool;
      for (unsigned t = 0; t < nthreads; ++t) {
        pool.emplace_back([&] {
          for (int e = next++; e < cfg.ensembles; e = next++) run_one(e);
        });
      }
      for (auto& th : pool) th.join();
    }
    // Reduction in ensemble order keeps the table independent of threading.
    int good = 0;
    for (const EnsembleResult& er : row.ensembles) {
      row.outside_cells += er.outside_cells;
      if (!er.ok) {
        ++row.failures;
        continue;
      }
      ++good;
      row.h1_error += er.errors.h1_semi;
      row.l2_error += er.errors.l2;
      row.cg_iterations += er.solve.iterations;
    }
    if (good > 0) {
      row.h1_error /= good;
      row.l2_error /= good;
      row.cg_iterations /= good;
    } else {
      row.h1_error = row.l2_error = std::nan("");
    }
    if (!rows.empty()) {
      const TableRow& prev = rows.back();
      row.h1_order = convergence_order(prev.h1_error, row.h1_error, prev.n, n);
      row.l2_order = convergence_order(prev.l2_error, row.l2_error, prev.n, n);
      double s1 = 0.0, s2 = 0.0;
      int cnt = 0;
      for (std::size_t e = 0; e < row.ensembles.size(); ++e) {
        const auto& a = prev.ensembles[e];
        const auto& b = row.ensembles[e];
        if (!a.ok || !b.ok) continue;
        s1 += convergence_order(a.errors.h1_semi, b.errors.h1_semi, prev.n, n);
        s2 += convergence_order(a.errors.l2, b.errors.l2, prev.n, n);
        ++cnt;
      }
      if (cnt > 0) {
        row.h1_order_mean = s1 / cnt;
        row.l2_order_mean = s2 / cnt;
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace detail {

inline std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

inline std::string fmt_opt(const char* spec, const std::optional<double>& v) { return v ? fmt(spec, *v) : ""; }

} // namespace detail

inline std::string format_csv(const std::vector<TableRow>& rows) {
  std::ostringstream os;
  os << "N,h1_error,h1_order,l2_error,l2_order,h1_order_mean,l2_order_mean,cg_iterations,failures,outside_cells\n";
  for (const TableRow& r : rows) {
    os << r.n << ',' << detail::fmt("%.9e", r.h1_error) << ',' << detail::fmt_opt("%.6f", r.h1_order) << ','
       << detail::fmt("%.9e", r.l2_error) << ',' << detail::fmt_opt("%.6f", r.l2_order) << ','
       << detail::fmt_opt("%.6f", r.h1_order_mean) << ',' << detail::fmt_opt("%.6f", r.l2_order_mean) << ','
       << detail::fmt("%.1f", r.cg_iterations) << ',' << r.failures << ',' << r.outside_cells << '\n';
  }
  return os.str();
}

inline std::string format_text(const std::vector<TableRow>& rows, RuleKind rule) {
  std::ostringstream os;
  char line[256];
  os << "rule: " << to_string(rule) << '\n';
  std::snprintf(line, sizeof line, "%6s  %12s  %7s  %12s  %7s  %9s  %4s  %7s\n", "N", "|u-uh|_1,h", "order",
                "||u-uh||_0", "order", "CG iters", "fail", "outside");
  os << line;
  for (const TableRow& r : rows) {
    std::snprintf(line, sizeof line, "%6d  %12.4e  %7s  %12.4e  %7s  %9.1f  %4d  %7d\n", r.n, r.h1_error,
                  detail::fmt_opt("%.3f", r.h1_order).c_str(), r.l2_error, detail::fmt_opt("%.3f", r.l2_order).c_str(),
                  r.cg_iterations, r.failures, r.outside_cells);
    os << line;
  }
  return os.str();
}

/// One JSON object per row.
inline std::string format_jsonl(const std::vector<TableRow>& rows, RuleKind rule) {
  std::ostringstream os;
  for (const TableRow& r : rows) {
    nlohmann::json j;
    j["rule"] = std::string(to_string(rule));
    j["N"] = r.n;
    j["h1_error"] = r.h1_error;
    j["l2_error"] = r.l2_error;
    j["h1_order"] = r.h1_order ? nlohmann::json(*r.h1_order) : nlohmann::json(nullptr);
    j["l2_order"] = r.l2_order ? nlohmann::json(*r.l2_order) : nlohmann::json(nullptr);
    j["h1_order_mean"] = r.h1_order_mean ? nlohmann::json(*r.h1_order_mean) : nlohmann::json(nullptr);
    j["l2_order_mean"] = r.l2_order_mean ? nlohmann::json(*r.l2_order_mean) : nlohmann::json(nullptr);
    j["cg_iterations"] = r.cg_iterations;
    j["failures"] = r.failures;
    j["outside_cells"] = r.outside_cells;
    os << j.dump() << '\n';
  }
  return os.str();
}

/// Text listing of an L-point rule on Kbar (L = 1, 2, 3): one "x1 x2 weight"
/// line per node at full precision, the mapped physical nodes when a
/// quadrilateral is given, then the exactness residuals as comments.
inline std::string emit_rule(const IntermediateQuad& iq, int points, const std::optional<Quadrilateral>& quad = {},
                             NodePlacement placement = NodePlacement::inside_only) {
  QuadratureRule rule = points == 1 ? one_point_rule(iq) : symmetric_rule(iq, points, placement);
  std::ostringstream os;
  os.precision(17);
  os << "# rule points=" << points << " hbar1=" << iq.hbar1() << " hbar2=" << iq.hbar2() << " area=" << iq.area()
     << '\n';
  os << "# intermediate nodes: x1 x2 weight\n";
  for (std::size_t l = 0; l < rule.size(); ++l) {
    os << rule.nodes[l].x1 << ' ' << rule.nodes[l].x2 << ' ' << rule.weights[l] << '\n';
  }
  if (quad) {
    const PhysicalRule pr = map_rule_to_physical(rule, *quad);
    os << "# physical nodes: x1 x2 weight\n";
    for (std::size_t l = 0; l < pr.points.size(); ++l) {
      os << pr.points[l].x1 << ' ' << pr.points[l].x2 << ' ' << pr.weights[l] << '\n';
    }
  }
  static constexpr const char* names[5] = {"1", "x1", "x2", "dmu/dx1", "dmu/dx2"};
  const auto res = exactness_residuals(rule, iq);
  os.precision(3);
  for (int i = 0; i < 5; ++i) os << "# residual " << names[i] << ' ' << res[i] << '\n';
  return os.str();
}

} // namespace dssy
