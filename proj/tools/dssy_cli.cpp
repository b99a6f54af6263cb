// Command-line driver: convergence tables, rule listings and mesh export.
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dssy/dssy.hpp"

namespace {

int run_bench(const dssy::ExperimentConfig& cfg, const std::string& out, const std::string& format) {
  const auto rows = dssy::run_convergence(cfg);
  std::cout << dssy::format_text(rows, cfg.rule);
  if (!out.empty()) {
    std::ofstream os(out);
    if (!os) {
      std::cerr << "cannot open " << out << '\n';
      return 1;
    }
    if (format == "csv") {
      os << dssy::format_csv(rows);
    } else if (format == "text") {
      os << dssy::format_text(rows, cfg.rule);
    } else {
      os << dssy::format_jsonl(rows, cfg.rule);
    }
  }
  int failures = 0;
  for (const auto& r : rows) failures += r.failures;
  if (failures > 0) {
    std::cerr << failures << " ensemble solve(s) failed; see the 'fail' column\n";
    for (const auto& r : rows) {
      for (const auto& e : r.ensembles) {
        if (!e.ok) {
          std::cerr << "  N=" << r.n << ": " << e.failure << '\n';
          break;
        }
      }
    }
  }
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonparametric DSSY element with symmetric 2/3-point quadrature"};
  app.require_subcommand(1);

  dssy::ExperimentConfig cfg;
  std::string rule_name = "3pt";
  std::string out;
  std::string format = "csv";
  bool include_256 = false;
  auto* bench = app.add_subcommand("bench", "convergence study on perturbed meshes");
  bench->add_option("--rule", rule_name, "1pt|2pt|3pt|gauss2x2|gauss3x3")
      ->check(CLI::IsMember({"1pt", "2pt", "3pt", "gauss2x2", "gauss3x3"}));
  bench->add_option("--n", cfg.n_list, "comma-separated mesh sizes")->delimiter(',');
  bench->add_flag("--include-256", include_256, "append N=256 to the list");
  bench->add_option("--perturb", cfg.perturbation, "perturbation amplitude r (cell units)");
  bench->add_option("--ensembles", cfg.ensembles, "random meshes per N");
  bench->add_option("--seed", cfg.seed, "base seed; ensemble e uses seed+e");
  bench->add_option("--tol", cfg.cg_tol, "CG relative residual tolerance");
  bench->add_option("--out", out, "output file");
  bench->add_option("--format", format, "csv|text|jsonl")->check(CLI::IsMember({"csv", "text", "jsonl"}));
  bench->add_option("--threads", cfg.threads, "worker threads (0 = all cores)");
  bench->add_flag("--sequential", cfg.sequential, "single-threaded (same as DSSY_SEQUENTIAL=1)");

  double h1 = -1.0, h2 = -1.0;
  int points = 2;
  std::vector<double> quad_coords;
  auto* dump = app.add_subcommand("rule-dump", "print nodes and weights of a rule on Kbar");
  dump->add_option("--h1", h1, "hbar1 < 0");
  dump->add_option("--h2", h2, "hbar2 < 0");
  dump->add_option("--points", points, "1, 2 or 3")->check(CLI::IsMember({1, 2, 3}));
  dump->add_option("--quad", quad_coords, "x1,y1,...,x4,y4 of a physical quadrilateral")
      ->delimiter(',')
      ->expected(8);
  bool allow_outside = false;
  dump->add_flag("--allow-outside", allow_outside, "use the smallest offset if no node set fits inside Kbar");

  int mesh_n = 4;
  double mesh_r = 0.0;
  std::uint64_t mesh_seed = 1;
  std::string mesh_out;
  auto* mesh_cmd = app.add_subcommand("mesh", "write a (perturbed) structured mesh");
  mesh_cmd->add_option("--n", mesh_n, "cells per side")->required();
  mesh_cmd->add_option("--perturb", mesh_r, "perturbation amplitude r");
  mesh_cmd->add_option("--seed", mesh_seed, "seed");
  mesh_cmd->add_option("--out", mesh_out, "output file (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*bench) {
      cfg.rule = dssy::parse_rule_kind(rule_name);
      if (include_256) cfg.n_list.push_back(256);
      return run_bench(cfg, out, format);
    }
    if (*dump) {
      std::optional<dssy::Quadrilateral> quad;
      if (!quad_coords.empty()) {
        dssy::Quadrilateral q{};
        for (int j = 0; j < 4; ++j) q.v[static_cast<std::size_t>(j)] = {quad_coords[2 * j], quad_coords[2 * j + 1]};
        quad = q;
      }
      const dssy::IntermediateQuad iq = quad ? dssy::intermediate_params(*quad) : dssy::IntermediateQuad(h1, h2);
      std::cout << dssy::emit_rule(iq, points, quad,
                                   allow_outside ? dssy::NodePlacement::allow_outside
                                                 : dssy::NodePlacement::inside_only);
      return 0;
    }
    if (*mesh_cmd) {
      const dssy::Mesh mesh = dssy::perturb(dssy::uniform_mesh(mesh_n), mesh_r, mesh_seed);
      if (mesh_out.empty()) {
        dssy::write_mesh(std::cout, mesh);
      } else {
        std::ofstream os(mesh_out);
        if (!os) {
          std::cerr << "cannot open " << mesh_out << '\n';
          return 1;
        }
        dssy::write_mesh(os, mesh);
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
