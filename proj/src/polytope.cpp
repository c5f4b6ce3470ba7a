#include "toric/polytope.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "toric/errors.hpp"

namespace toric {

Rational rational_from_string(const std::string& s) {
  auto slash = s.find('/');
  try {
    if (slash == std::string::npos) return Rational(std::stoll(s));
    Int num = std::stoll(s.substr(0, slash));
    Int den = std::stoll(s.substr(slash + 1));
    if (den == 0) throw ValidationError("zero denominator in '" + s + "'");
    return Rational(num, den);
  } catch (const std::invalid_argument&) {
    throw ValidationError("malformed rational '" + s + "'");
  } catch (const std::out_of_range&) {
    throw ValidationError("rational out of range '" + s + "'");
  }
}

Int det_exact(std::vector<IntVec> m) {
  const int n = static_cast<int>(m.size());
  Int sign = 1;
  Int prev = 1;
  for (int k = 0; k + 1 < n; ++k) {
    if (m[k][k] == 0) {
      int piv = -1;
      for (int i = k + 1; i < n; ++i)
        if (m[i][k] != 0) {
          piv = i;
          break;
        }
      if (piv < 0) return 0;
      std::swap(m[k], m[piv]);
      sign = -sign;
    }
    for (int i = k + 1; i < n; ++i) {
      for (int j = k + 1; j < n; ++j)
        m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) / prev;
      m[i][k] = 0;
    }
    prev = m[k][k];
  }
  return n == 0 ? 1 : sign * m[n - 1][n - 1];
}

namespace {

// Rank of a set of integer vectors, fraction-free elimination.
int linear_rank(std::vector<IntVec> rows) {
  if (rows.empty()) return 0;
  const int cols = static_cast<int>(rows[0].size());
  int rank = 0;
  int row = 0;
  for (int col = 0; col < cols && row < static_cast<int>(rows.size()); ++col) {
    int piv = -1;
    for (int i = row; i < static_cast<int>(rows.size()); ++i)
      if (rows[i][col] != 0) {
        piv = i;
        break;
      }
    if (piv < 0) continue;
    std::swap(rows[row], rows[piv]);
    for (int i = row + 1; i < static_cast<int>(rows.size()); ++i) {
      if (rows[i][col] == 0) continue;
      const Int a = rows[row][col];
      const Int b = rows[i][col];
      const Int g = std::gcd(a < 0 ? -a : a, b < 0 ? -b : b);
      const Int fa = b / g;
      const Int fb = a / g;
      for (int j = col; j < cols; ++j) rows[i][j] = rows[i][j] * fb - rows[row][j] * fa;
    }
    ++row;
    ++rank;
  }
  return rank;
}

std::string vec_str(const IntVec& v) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  os << ")";
  return os.str();
}

IntVec primitive(IntVec v, Int* scale = nullptr) {
  const Int g = gcd_all(v);
  if (scale) *scale = g;
  if (g > 1)
    for (Int& x : v) x /= g;
  return v;
}

// Supporting hyperplane: primitive inward normal plus right-hand side, i.e.
// all vertices satisfy <normal, y> >= rhs with equality on the facet.
struct Plane {
  IntVec normal;
  Rational rhs;
  bool operator<(const Plane& o) const {
    if (normal != o.normal) return normal < o.normal;
    return rhs < o.rhs;
  }
  bool operator==(const Plane& o) const { return normal == o.normal && rhs == o.rhs; }
};

std::vector<Plane> hull_planes_1d(const std::vector<IntVec>& vs) {
  Int lo = vs.front()[0], hi = vs.back()[0];
  return {Plane{{1}, Rational(lo)}, Plane{{-1}, Rational(-hi)}};
}

std::vector<Plane> hull_planes_2d(const std::vector<IntVec>& vs) {
  std::set<Plane> planes;
  const int m = static_cast<int>(vs.size());
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      IntVec d = sub(vs[j], vs[i]);
      IntVec n = {d[1], -d[0]};
      bool any_pos = false, any_neg = false;
      for (const auto& v : vs) {
        Int s = dot(n, sub(v, vs[i]));
        any_pos |= s > 0;
        any_neg |= s < 0;
      }
      if (any_pos && any_neg) continue;
      if (any_neg) for (Int& x : n) x = -x;  // make inward
      Int g;
      IntVec np = primitive(n, &g);
      planes.insert(Plane{np, Rational(dot(n, vs[i]), g)});
    }
  }
  return {planes.begin(), planes.end()};
}

std::vector<Plane> hull_planes_3d(const std::vector<IntVec>& vs) {
  std::set<Plane> planes;
  const int m = static_cast<int>(vs.size());
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      for (int k = j + 1; k < m; ++k) {
        IntVec a = sub(vs[j], vs[i]), b = sub(vs[k], vs[i]);
        IntVec n = {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2],
                    a[0] * b[1] - a[1] * b[0]};
        if (n[0] == 0 && n[1] == 0 && n[2] == 0) continue;
        bool any_pos = false, any_neg = false;
        for (const auto& v : vs) {
          Int s = dot(n, sub(v, vs[i]));
          any_pos |= s > 0;
          any_neg |= s < 0;
        }
        if (any_pos && any_neg) continue;
        if (any_neg) for (Int& x : n) x = -x;
        Int g;
        IntVec np = primitive(n, &g);
        planes.insert(Plane{np, Rational(dot(n, vs[i]), g)});
      }
    }
  }
  return {planes.begin(), planes.end()};
}

std::vector<Plane> hull_planes(int dim, const std::vector<IntVec>& vs) {
  switch (dim) {
    case 1: return hull_planes_1d(vs);
    case 2: return hull_planes_2d(vs);
    case 3: return hull_planes_3d(vs);
    default:
      throw UnsupportedDimension(
          "facet enumeration implemented for dim <= 3; supply facets explicitly");
  }
}

// Vertex ids of p lying on facet r.
std::vector<int> facet_vertex_ids(const LatticePolytope& p, int r) {
  std::vector<int> ids;
  for (int i = 0; i < p.num_vertices(); ++i)
    if (p.lambda(r, p.vertices[i]) == -1) ids.push_back(i);
  return ids;
}

// Recursive fan triangulation of a face given by vertex ids. Fans from the
// smallest id (vertices are lex sorted, so this is the lex-min vertex).
void triangulate_face(const LatticePolytope& p, const std::vector<int>& ids,
                      int face_dim, std::vector<std::vector<int>>& out,
                      std::vector<int>& prefix) {
  if (face_dim == 0) {
    if (ids.size() != 1)
      throw InconsistentDescription("0-face with " + std::to_string(ids.size()) +
                                    " vertices");
    auto s = prefix;
    s.push_back(ids[0]);
    out.push_back(std::move(s));
    return;
  }
  if (face_dim == 1) {
    if (ids.size() != 2)
      throw InconsistentDescription("1-face with " + std::to_string(ids.size()) +
                                    " vertices");
    auto s = prefix;
    s.push_back(ids[0]);
    s.push_back(ids[1]);
    out.push_back(std::move(s));
    return;
  }
  const int apex = ids.front();
  // Subfaces arise as intersections with further facet hyperplanes.
  std::set<std::vector<int>> seen;
  for (int s = 0; s < p.num_facets(); ++s) {
    std::vector<int> sub;
    bool apex_on = false;
    for (int id : ids) {
      if (p.lambda(s, p.vertices[id]) == -1) {
        sub.push_back(id);
        apex_on |= (id == apex);
      }
    }
    if (apex_on || static_cast<int>(sub.size()) < face_dim) continue;
    if (sub.size() == ids.size()) continue;  // hyperplane contains the whole face
    std::vector<IntVec> pts;
    for (int id : sub) pts.push_back(p.vertices[id]);
    if (affine_rank(pts) != face_dim - 1) continue;
    if (!seen.insert(sub).second) continue;
    prefix.push_back(apex);
    triangulate_face(p, sub, face_dim - 1, out, prefix);
    prefix.pop_back();
  }
}

}  // namespace

int affine_rank(const std::vector<IntVec>& pts) {
  if (pts.empty()) return -1;
  std::vector<IntVec> rows;
  for (std::size_t i = 1; i < pts.size(); ++i) rows.push_back(sub(pts[i], pts[0]));
  return linear_rank(rows);
}

bool LatticePolytope::contains(const IntVec& y) const {
  for (int r = 0; r < num_facets(); ++r)
    if (lambda(r, y) < -1) return false;
  return true;
}

bool LatticePolytope::contains(const RatVec& y) const {
  for (int r = 0; r < num_facets(); ++r)
    if (lambda(r, y) < Rational(-1)) return false;
  return true;
}

LatticePolytope make_polytope(int dim, std::vector<IntVec> vertices,
                              std::vector<IntVec> facets, std::string name) {
  if (dim < 1) throw ValidationError("dim must be >= 1");
  if (vertices.empty()) throw ValidationError("no vertices");
  for (const auto& v : vertices)
    if (static_cast<int>(v.size()) != dim)
      throw ValidationError("vertex arity mismatch at " + vec_str(v));
  for (const auto& f : facets)
    if (static_cast<int>(f.size()) != dim)
      throw ValidationError("facet arity mismatch at " + vec_str(f));

  // Canonical form: dedup + lex sort.
  std::sort(vertices.begin(), vertices.end());
  vertices.erase(std::unique(vertices.begin(), vertices.end()), vertices.end());

  if (affine_rank(vertices) != dim)
    throw InconsistentDescription("vertices do not span dimension " +
                                  std::to_string(dim));

  const bool facets_given = !facets.empty();
  std::vector<Plane> hull;
  if (dim <= 3) {
    hull = hull_planes(dim, vertices);
    for (const auto& pl : hull) {
      if (pl.rhs >= Rational(0)) throw OriginNotInterior("supporting hyperplane " +
                                                         vec_str(pl.normal) +
                                                         " does not separate origin");
      if (pl.rhs != Rational(-1))
        throw NonReflexive("facet " + vec_str(pl.normal) + " has right-hand side " +
                           to_string(pl.rhs) + ", expected -1");
    }
  } else if (!facets_given) {
    throw UnsupportedDimension(
        "facet enumeration implemented for dim <= 3; supply facets explicitly");
  }

  if (!facets_given) {
    for (const auto& pl : hull) facets.push_back(pl.normal);
  } else {
    for (const auto& f : facets)
      if (!is_primitive(f))
        throw NonReflexive("facet normal " + vec_str(f) + " is not primitive");
    std::sort(facets.begin(), facets.end());
    facets.erase(std::unique(facets.begin(), facets.end()), facets.end());
    if (dim <= 3) {
      // Full cross-validation against the exact hull.
      std::set<IntVec> given(facets.begin(), facets.end());
      std::set<IntVec> computed;
      for (const auto& pl : hull) computed.insert(pl.normal);
      if (given != computed)
        throw InconsistentDescription(
            "vertex and facet lists describe different bodies");
    }
  }
  std::sort(facets.begin(), facets.end());

  LatticePolytope p{dim, std::move(vertices), std::move(facets), std::move(name)};

  // Facet normals must span R^dim, else the described body is unbounded.
  if (linear_rank(p.facets) != dim)
    throw InconsistentDescription("facet normals do not span dimension " +
                                  std::to_string(dim));

  for (const auto& v : p.vertices) {
    std::vector<IntVec> active;
    for (int r = 0; r < p.num_facets(); ++r) {
      const Int l = p.lambda(r, v);
      if (l < -1)
        throw InconsistentDescription("vertex " + vec_str(v) +
                                      " violates facet " + vec_str(p.facets[r]));
      if (l == -1) active.push_back(p.facets[r]);
    }
    if (static_cast<int>(active.size()) < dim || linear_rank(active) != dim)
      throw InconsistentDescription("vertex " + vec_str(v) + " is not extreme");
  }

  for (int r = 0; r < p.num_facets(); ++r) {
    std::vector<IntVec> on;
    for (const auto& v : p.vertices)
      if (p.lambda(r, v) == -1) on.push_back(v);
    if (static_cast<int>(on.size()) < dim || affine_rank(on) != dim - 1)
      throw InconsistentDescription("facet " + vec_str(p.facets[r]) +
                                    " is not supported by the vertices");
  }

  return p;
}

std::vector<IntVec> lattice_points(const LatticePolytope& p) {
  IntVec lo(p.dim), hi(p.dim);
  for (int d = 0; d < p.dim; ++d) {
    lo[d] = hi[d] = p.vertices[0][d];
    for (const auto& v : p.vertices) {
      lo[d] = std::min(lo[d], v[d]);
      hi[d] = std::max(hi[d], v[d]);
    }
  }
  std::vector<IntVec> pts;
  IntVec y = lo;
  while (true) {
    if (p.contains(y)) pts.push_back(y);
    int d = p.dim - 1;
    while (d >= 0 && y[d] == hi[d]) {
      y[d] = lo[d];
      --d;
    }
    if (d < 0) break;
    ++y[d];
  }
  std::sort(pts.begin(), pts.end());
  return pts;
}

std::vector<std::vector<int>> triangulate_boundary(const LatticePolytope& p) {
  std::vector<std::vector<int>> simplices;
  std::vector<int> prefix;
  for (int r = 0; r < p.num_facets(); ++r) {
    auto ids = facet_vertex_ids(p, r);
    triangulate_face(p, ids, p.dim - 1, simplices, prefix);
  }
  return simplices;
}

Rational volume(const LatticePolytope& p) {
  Rational vol(0);
  Int nfact = 1;
  for (int k = 2; k <= p.dim; ++k) nfact *= k;
  for (const auto& s : triangulate_boundary(p)) {
    std::vector<IntVec> rows;
    for (int id : s) rows.push_back(p.vertices[id]);
    Int d = det_exact(rows);
    vol += Rational(d < 0 ? -d : d, nfact);
  }
  return vol;
}

RatVec barycenter(const LatticePolytope& p) {
  RatVec acc(p.dim, Rational(0));
  Rational vol(0);
  Int nfact = 1;
  for (int k = 2; k <= p.dim; ++k) nfact *= k;
  for (const auto& s : triangulate_boundary(p)) {
    std::vector<IntVec> rows;
    for (int id : s) rows.push_back(p.vertices[id]);
    Int d = det_exact(rows);
    Rational v(d < 0 ? -d : d, nfact);
    vol += v;
    // Simplex barycenter: vertex average including the origin apex.
    for (int dd = 0; dd < p.dim; ++dd) {
      Int coord = 0;
      for (int id : s) coord += p.vertices[id][dd];
      acc[dd] += v * Rational(coord, p.dim + 1);
    }
  }
  for (auto& c : acc) c /= vol;
  return acc;
}

std::pair<RatVec, std::set<int>> ray_boundary_intersection(
    const LatticePolytope& p, const RatVec& pc) {
  bool zero = true;
  for (const auto& c : pc) zero &= (c == Rational(0));
  if (zero) throw BarycenterAtOrigin("ray undefined: barycenter is the origin");

  Rational maxl(0);
  for (int r = 0; r < p.num_facets(); ++r) maxl = std::max(maxl, p.lambda(r, pc));
  if (maxl <= Rational(0))
    throw InconsistentDescription("ray from barycenter never exits the polytope");

  const Rational mu = Rational(1) / maxl;
  RatVec q(p.dim);
  for (int d = 0; d < p.dim; ++d) q[d] = -mu * pc[d];
  std::set<int> active;
  for (int r = 0; r < p.num_facets(); ++r)
    if (p.lambda(r, pc) == maxl) active.insert(r);
  return {q, active};
}

FanoInvariants compute_R(const LatticePolytope& p) {
  FanoInvariants inv;
  inv.barycenter = barycenter(p);
  bool zero = true;
  for (const auto& c : inv.barycenter) zero &= (c == Rational(0));
  if (zero) {
    inv.r = Rational(1);
    inv.ke_exists = true;
    return inv;
  }
  auto [q, active] = ray_boundary_intersection(p, inv.barycenter);
  Rational maxl(0);
  for (int r = 0; r < p.num_facets(); ++r)
    maxl = std::max(maxl, p.lambda(r, inv.barycenter));
  const Rational mu = Rational(1) / maxl;
  inv.q = q;
  inv.r = mu / (Rational(1) + mu);
  inv.minimal_face = minimal_face(p, q);
  inv.ke_exists = false;
  return inv;
}

FaceDescriptor minimal_face(const LatticePolytope& p, const RatVec& y) {
  for (int r = 0; r < p.num_facets(); ++r)
    if (p.lambda(r, y) < Rational(-1))
      throw PointOutsidePolytope("point " + to_string(y) + " outside polytope");

  FaceDescriptor f;
  for (int r = 0; r < p.num_facets(); ++r)
    if (p.lambda(r, y) == Rational(-1)) f.active_facets.insert(r);

  if (f.active_facets.empty()) {
    f.face_vertices = p.vertices;
    f.dim = p.dim;
    f.improper = true;
    return f;
  }
  for (const auto& v : p.vertices) {
    bool on_all = true;
    for (int r : f.active_facets) on_all &= (p.lambda(r, v) == -1);
    if (on_all) f.face_vertices.push_back(v);
  }
  if (f.face_vertices.empty())
    throw InconsistentDescription("active facet set has no supporting vertices");
  f.dim = affine_rank(f.face_vertices);
  return f;
}

}  // namespace toric
