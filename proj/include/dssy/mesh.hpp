#pragma once
//
// Structured quadrilateral meshes of the unit square, random interior-vertex
// perturbation and the edge-based DOF numbering of the nonconforming space.
//
// Cell-local vertices follow the element convention: v1 top-right,
// v2 top-left, v3 bottom-left, v4 bottom-right. Local edge j joins local
// vertices j and j+1 (mod 4): top, left, bottom, right.
//
#include <array>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dssy/errors.hpp"
#include "dssy/geometry.hpp"

namespace dssy {

struct Edge {
  int a = 0; ///< smaller global vertex index
  int b = 0; ///< larger global vertex index
  bool boundary = false;
};

struct Mesh {
  int n = 0; ///< cells per side of the structured grid (0 if unstructured)
  std::vector<Point2> vertices;
  std::vector<std::array<int, 4>> cells;
  std::vector<Edge> edges;
  std::vector<std::array<int, 4>> cell_edges;

  Quadrilateral cell_quad(std::size_t c) const {
    const auto& ids = cells[c];
    return {{vertices[ids[0]], vertices[ids[1]], vertices[ids[2]], vertices[ids[3]]}};
  }
};

/// Rebuilds edges and cell-edge incidence from vertices and cells.
inline void build_topology(Mesh& mesh) {
  mesh.edges.clear();
  mesh.cell_edges.assign(mesh.cells.size(), {});
  std::map<std::pair<int, int>, int> index;
  std::vector<int> count;
  for (std::size_t c = 0; c < mesh.cells.size(); ++c) {
    for (int j = 0; j < 4; ++j) {
      int a = mesh.cells[c][j];
      int b = mesh.cells[c][(j + 1) % 4];
      if (a > b) std::swap(a, b);
      auto [it, inserted] = index.try_emplace({a, b}, static_cast<int>(mesh.edges.size()));
      if (inserted) {
        mesh.edges.push_back({a, b, false});
        count.push_back(0);
      }
      ++count[it->second];
      mesh.cell_edges[c][j] = it->second;
    }
  }
  for (std::size_t e = 0; e < mesh.edges.size(); ++e) {
    if (count[e] > 2) throw MeshError("edge shared by more than two cells");
    mesh.edges[e].boundary = count[e] == 1;
  }
}

/// Throws MeshError if a cell is clockwise or not strictly convex.
inline void validate_cells(const Mesh& mesh) {
  for (std::size_t c = 0; c < mesh.cells.size(); ++c) {
    const Quadrilateral q = mesh.cell_quad(c);
    if (!(signed_area(q) > 0.0)) {
      throw MeshError("cell " + std::to_string(c) + " is not counter-clockwise");
    }
    try {
      (void)intermediate_params(q);
    } catch (const GeometryError& e) {
      throw MeshError("cell " + std::to_string(c) + ": " + e.what());
    }
  }
}

inline int grid_vertex(int n, int i, int j) { return j * (n + 1) + i; }

/// (n+1)^2 vertices at (i, j)/n, n^2 cells, 2n(n+1) edges.
inline Mesh uniform_mesh(int n) {
  if (n < 1) throw MeshError("uniform_mesh: N must be >= 1");
  Mesh mesh;
  mesh.n = n;
  mesh.vertices.reserve(static_cast<std::size_t>((n + 1) * (n + 1)));
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) {
      mesh.vertices.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n});
    }
  }
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      mesh.cells.push_back({grid_vertex(n, i + 1, j + 1), grid_vertex(n, i, j + 1), grid_vertex(n, i, j),
                            grid_vertex(n, i + 1, j)});
    }
  }
  build_topology(mesh);
  return mesh;
}

/// Counter-based generator: draw k of stream `seed` is splitmix64 applied to
/// seed + (k + 1) * 0x9E3779B97F4A7C15. Doubles take the top 53 bits, so
/// sequences are identical on every platform.
class CounterRng {
public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t bits(std::uint64_t counter) const {
    std::uint64_t z = seed_ + (counter + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  /// Uniform in [0, 1).
  double uniform(std::uint64_t counter) const { return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53; }
  /// Uniform in [-r, r).
  double symmetric(std::uint64_t counter, double r) const { return r * (2.0 * uniform(counter) - 1.0); }

private:
  std::uint64_t seed_;
};

inline constexpr int kMaxPerturbRetries = 16;

/// Moves interior vertex (i, j) to ((i + r1)/N, (j + r2)/N) with r1, r2
/// uniform in [-r, r]. Draws go in row-major vertex order: vertex v of a
/// grid with V vertices uses counters 2v, 2v+1 on attempt 0 and
/// 2(attempt*V + v), 2(attempt*V + v) + 1 when a non-convex cell forces a
/// resample. Boundary vertices stay fixed.
inline Mesh perturb(const Mesh& base, double r, std::uint64_t seed) {
  if (base.n < 1) throw MeshError("perturb: structured mesh required");
  if (!(r >= 0.0 && r < 0.5)) throw MeshError("perturb: r must lie in [0, 0.5)");
  Mesh mesh = base;
  const int n = base.n;
  if (r == 0.0) return mesh;
  const double h = 1.0 / n;
  const CounterRng rng(seed);
  const auto nv = static_cast<std::uint64_t>(mesh.vertices.size());

  auto place = [&](int i, int j, std::uint64_t attempt) {
    const auto v = static_cast<std::uint64_t>(grid_vertex(n, i, j));
    const std::uint64_t k = 2 * (attempt * nv + v);
    mesh.vertices[v] = {(i + rng.symmetric(k, r)) * h, (j + rng.symmetric(k + 1, r)) * h};
  };
  for (int j = 1; j < n; ++j)
    for (int i = 1; i < n; ++i) place(i, j, 0);

  auto cell_ok = [&](std::size_t c) {
    const Quadrilateral q = mesh.cell_quad(c);
    if (!(signed_area(q) > 0.0)) return false;
    try {
      (void)intermediate_params(q);
      return true;
    } catch (const GeometryError&) {
      return false;
    }
  };
  for (int attempt = 1;; ++attempt) {
    std::vector<int> bad;
    for (std::size_t c = 0; c < mesh.cells.size(); ++c) {
      if (!cell_ok(c)) {
        for (int id : mesh.cells[c]) bad.push_back(id);
      }
    }
    if (bad.empty()) break;
    if (attempt > kMaxPerturbRetries) throw MeshError("perturb: could not keep all cells convex");
    for (int id : bad) {
      const int i = id % (n + 1);
      const int j = id / (n + 1);
      if (i > 0 && i < n && j > 0 && j < n) place(i, j, static_cast<std::uint64_t>(attempt));
    }
  }
  return mesh;
}

/// Global numbering of the interior edges; boundary edges carry -1
/// (homogeneous Dirichlet).
struct DofMap {
  std::vector<int> edge_to_dof;
  int num_dofs = 0;

  int dof(int edge) const { return edge_to_dof[static_cast<std::size_t>(edge)]; }
};

inline DofMap build_dofmap(const Mesh& mesh) {
  DofMap map;
  map.edge_to_dof.assign(mesh.edges.size(), -1);
  for (std::size_t e = 0; e < mesh.edges.size(); ++e) {
    if (!mesh.edges[e].boundary) map.edge_to_dof[e] = map.num_dofs++;
  }
  return map;
}

/// "ncmesh v1 N", then (N+1)^2 lines "x1 x2", then N^2 lines of four vertex
/// indices. Coordinates are written with 17 significant digits.
inline void write_mesh(std::ostream& os, const Mesh& mesh) {
  os << "ncmesh v1 " << mesh.n << '\n';
  os.precision(17);
  for (const Point2& p : mesh.vertices) os << p.x1 << ' ' << p.x2 << '\n';
  for (const auto& c : mesh.cells) os << c[0] << ' ' << c[1] << ' ' << c[2] << ' ' << c[3] << '\n';
}

inline Mesh read_mesh(std::istream& is) {
  std::string magic, version;
  Mesh mesh;
  if (!(is >> magic >> version >> mesh.n) || magic != "ncmesh" || version != "v1" || mesh.n < 1) {
    throw MeshError("read_mesh: bad header (expected 'ncmesh v1 N')");
  }
  const auto nv = static_cast<std::size_t>((mesh.n + 1) * (mesh.n + 1));
  const auto nc = static_cast<std::size_t>(mesh.n * mesh.n);
  mesh.vertices.resize(nv);
  for (auto& p : mesh.vertices) {
    if (!(is >> p.x1 >> p.x2)) throw MeshError("read_mesh: truncated vertex list");
  }
  mesh.cells.resize(nc);
  for (auto& c : mesh.cells) {
    for (int& id : c) {
      if (!(is >> id)) throw MeshError("read_mesh: truncated cell list");
      if (id < 0 || static_cast<std::size_t>(id) >= nv) throw MeshError("read_mesh: vertex index out of range");
    }
  }
  build_topology(mesh);
  validate_cells(mesh);
  return mesh;
}

} // namespace dssy
