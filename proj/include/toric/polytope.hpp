#pragma once

#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "toric/rational.hpp"

namespace toric {

// Reflexive lattice polytope: integer vertices plus primitive inward facet
// normals v_r encoding the inequalities lambda_r(y) = <v_r, y> >= -1.
// Instances are immutable after construction and safe for concurrent reads.
struct LatticePolytope {
  int dim = 0;
  std::vector<IntVec> vertices;  // deduplicated, lexicographically sorted
  std::vector<IntVec> facets;    // canonical (lexicographically sorted)
  std::string name;

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int num_facets() const { return static_cast<int>(facets.size()); }

  Int lambda(int r, const IntVec& y) const { return dot(facets[r], y); }
  Rational lambda(int r, const RatVec& y) const { return dot(facets[r], y); }

  bool contains(const IntVec& y) const;
  bool contains(const RatVec& y) const;
};

// A face of the polytope identified by its active facet set. The improper
// face (an interior point's "face") is representable but flagged; downstream
// consumers must reject it.
struct FaceDescriptor {
  std::set<int> active_facets;
  std::vector<IntVec> face_vertices;
  int dim = -1;
  bool improper = false;
};

// Exact Fano invariants of a reflexive polytope.
struct FanoInvariants {
  RatVec barycenter;                         // P_c
  std::optional<RatVec> q;                   // boundary point Q, absent iff P_c = O
  Rational r;                                // R(X) in (0, 1]
  std::optional<FaceDescriptor> minimal_face;
  bool ke_exists = false;                    // true iff P_c = O
};

// Validates and canonicalizes a polytope description. When `facets` is empty
// they are computed by exact hull enumeration (dim <= 3 only). Throws
// NonReflexive / OriginNotInterior / InconsistentDescription /
// UnsupportedDimension.
LatticePolytope make_polytope(int dim, std::vector<IntVec> vertices,
                              std::vector<IntVec> facets = {},
                              std::string name = {});

// All lattice points of the polytope (bounding-box scan, exact membership).
std::vector<IntVec> lattice_points(const LatticePolytope& p);

// Boundary triangulation used for volume/barycenter: each simplex is a list
// of n vertex indices; the implied apex is the origin. Deterministic (fans
// from the lexicographically smallest vertex of each face).
std::vector<std::vector<int>> triangulate_boundary(const LatticePolytope& p);

Rational volume(const LatticePolytope& p);
RatVec barycenter(const LatticePolytope& p);

// Intersection Q of the ray from P_c through the origin with the boundary,
// plus the facets active at Q. Requires P_c != O (else BarycenterAtOrigin).
std::pair<RatVec, std::set<int>> ray_boundary_intersection(
    const LatticePolytope& p, const RatVec& pc);

// Greatest Ricci lower bound and associated data. R = mu/(1+mu) with
// mu = 1 / max_r lambda_r(P_c); equivalently R = |OQ|/|P_cQ|.
FanoInvariants compute_R(const LatticePolytope& p);

// Minimal face containing y (y must lie in the polytope). For interior y the
// improper face is returned with `improper` set.
FaceDescriptor minimal_face(const LatticePolytope& p, const RatVec& y);

}  // namespace toric
