#include "toric/divisor.hpp"

#include <cmath>

#include "toric/errors.hpp"

namespace toric {

DivisorVector section_divisor(const LatticePolytope& p, const IntVec& point) {
  if (!p.contains(point))
    throw PointOutsidePolytope("lattice point outside polytope");
  DivisorVector d;
  d.coefficients.resize(p.num_facets());
  for (int r = 0; r < p.num_facets(); ++r)
    d.coefficients[r] = p.lambda(r, point) + 1;
  return d;
}

std::map<int, Int> base_locus_fixed_components(const LatticePolytope& p,
                                               const FaceDescriptor& f) {
  if (f.improper) throw ImproperFace("base locus undefined for the improper face");
  if (f.face_vertices.empty())
    throw ImproperFace("face has no vertices");
  std::map<int, Int> a;
  for (int r = 0; r < p.num_facets(); ++r) {
    Int m = p.lambda(r, f.face_vertices[0]);
    for (const auto& v : f.face_vertices) m = std::min(m, p.lambda(r, v));
    if (m + 1 > 0) a[r] = m + 1;
  }
  return a;
}

SingularityReport conic_angle_report(const LatticePolytope& p) {
  FanoInvariants inv = compute_R(p);
  if (inv.ke_exists)
    throw KEExists("R = 1: Kaehler-Einstein metric exists, no singular limit");

  SingularityReport rep;
  rep.r = inv.r;
  const Rational one_minus_r = Rational(1) - inv.r;
  auto a = base_locus_fixed_components(p, *inv.minimal_face);
  for (const auto& [facet, mult] : a) {
    SingularityComponent c;
    c.a = mult;
    c.exponent = Rational(2 * mult) * one_minus_r;
    c.angle_fraction = Rational(1) - one_minus_r * Rational(mult);
    c.angle_radians = 2.0 * M_PI * to_double(c.angle_fraction);
    if (c.angle_fraction <= Rational(0))
      rep.warnings.push_back("facet " + std::to_string(facet) +
                             ": angle fraction " + to_string(c.angle_fraction) +
                             " is outside the conic range (0, 1]");
    rep.fixed_components[facet] = c;
  }
  for (const auto& v : inv.minimal_face->face_vertices)
    rep.face_section_divisors.emplace_back(v, section_divisor(p, v));
  return rep;
}

}  // namespace toric
