#pragma once

#include <boost/rational.hpp>

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "toric/errors.hpp"

namespace toric {

using Int = long long;
using Rational = boost::rational<Int>;

// Integer lattice vector.
using IntVec = std::vector<Int>;

// Vector with exact rational entries. All polytope_core outputs use this; no
// floating point enters that module.
using RatVec = std::vector<Rational>;

inline Int dot(const IntVec& a, const IntVec& b) {
  Int s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline Rational dot(const IntVec& a, const RatVec& b) {
  Rational s(0);
  for (std::size_t i = 0; i < a.size(); ++i) s += Rational(a[i]) * b[i];
  return s;
}

inline IntVec sub(const IntVec& a, const IntVec& b) {
  IntVec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

inline Int gcd_all(const IntVec& v) {
  Int g = 0;
  for (Int x : v) g = std::gcd(g, x < 0 ? -x : x);
  return g;
}

inline bool is_primitive(const IntVec& v) { return gcd_all(v) == 1; }

inline double to_double(const Rational& r) {
  return static_cast<double>(r.numerator()) / static_cast<double>(r.denominator());
}

inline std::vector<double> to_double(const RatVec& v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = to_double(v[i]);
  return out;
}

inline std::string to_string(const Rational& r) {
  if (r.denominator() == 1) return std::to_string(r.numerator());
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

inline std::string to_string(const RatVec& v) {
  std::string s = "(";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += to_string(v[i]);
  }
  return s + ")";
}

// Parses "p/q" or "p". Throws ValidationError on malformed input.
Rational rational_from_string(const std::string& s);

// Exact determinant of a square integer matrix (rows), Bareiss elimination.
Int det_exact(std::vector<IntVec> rows);

// Rank of the affine hull of a point set (0 for a single point).
int affine_rank(const std::vector<IntVec>& pts);

}  // namespace toric
