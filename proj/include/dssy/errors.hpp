#pragma once

#include <stdexcept>
#include <string>

namespace dssy {

/// Raised for degenerate or inadmissible quadrilateral geometry.
class GeometryError : public std::runtime_error {
public:
  explicit GeometryError(const std::string& what) : std::runtime_error(what) {}
};

/// The quadrilateral is not strictly convex (some hbar_i >= -threshold).
class NonConvexError : public GeometryError {
public:
  explicit NonConvexError(const std::string& what) : GeometryError(what) {}
};

/// No admissible symmetric rule (every candidate leaves the domain, or the
/// moment equations have no real solution).
class RuleConstructionError : public std::runtime_error {
public:
  explicit RuleConstructionError(const std::string& what) : std::runtime_error(what) {}
};

class MeshError : public std::runtime_error {
public:
  explicit MeshError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace dssy
