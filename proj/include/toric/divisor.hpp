#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "toric/polytope.hpp"

namespace toric {

// Divisor of the section attached to a lattice point, as coefficients over
// the toric divisors D_i (one per facet): coefficient_i = <p, v_i> + 1.
struct DivisorVector {
  std::vector<Int> coefficients;
};

DivisorVector section_divisor(const LatticePolytope& p, const IntVec& point);

// Fixed-component multiplicities a_i = 1 + min over face vertices of <p, v_i>,
// restricted to a_i > 0. The face must be proper (else ImproperFace).
std::map<int, Int> base_locus_fixed_components(const LatticePolytope& p,
                                               const FaceDescriptor& f);

struct SingularityComponent {
  Int a = 0;                  // fixed-component multiplicity
  Rational exponent;          // 2 * a * (1 - R)
  Rational angle_fraction;    // 1 - (1 - R) * a
  double angle_radians = 0;   // 2*pi * angle_fraction
};

// Per-facet base-locus multiplicities and predicted conic angles for the
// limit along the continuity path. Angle fractions <= 0 are reported with a
// warning, not an error.
struct SingularityReport {
  Rational r;
  std::map<int, SingularityComponent> fixed_components;
  std::vector<std::string> warnings;
  // Section divisors of the minimal-face vertices (the full base-locus data
  // short of primary decomposition).
  std::vector<std::pair<IntVec, DivisorVector>> face_section_divisors;
};

// Combines compute_R, minimal_face and base_locus_fixed_components.
// Throws KEExists when R = 1 (no singular limit predicted).
SingularityReport conic_angle_report(const LatticePolytope& p);

}  // namespace toric
