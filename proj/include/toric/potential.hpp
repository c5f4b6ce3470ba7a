#pragma once

#include <Eigen/Dense>

#include <vector>

#include "toric/polytope.hpp"

namespace toric {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Softmax weights b_alpha at a point: positive, summing to 1.
using SoftmaxWeights = std::vector<double>;

// Weighted log-sum-exp potential  constant + log sum_a w_a e^{<p_a, x>}.
// All evaluations are max-shifted; exponents may reach +-hundreds without
// overflow. The same core backs the reference potential (unit weights plus
// normalization constant), translated references (softmax weights) and limit
// references (face-supported weights).
class LogSumExp {
 public:
  LogSumExp() = default;
  LogSumExp(std::vector<IntVec> points, std::vector<double> log_weights,
            double constant);

  int dim() const { return dim_; }
  int num_points() const { return static_cast<int>(points_.size()); }
  const std::vector<IntVec>& points() const { return points_; }
  const std::vector<double>& log_weights() const { return log_weights_; }
  double constant() const { return constant_; }

  double value(const Vec& x) const;
  Vec gradient(const Vec& x) const;
  Mat hessian(const Vec& x) const;  // sum_a b_a (p_a - g)(p_a - g)^T
  SoftmaxWeights softmax(const Vec& x) const;

  // Piecewise-linear asymptote max_a (<p_a, x> + log w_a).
  double vbar(const Vec& x) const;

  // Quad-precision value and Hessian for solver grid tables, where far-field
  // second differences fall below double resolution.
  __float128 value_q(const __float128* x) const;
  void hessian_q(const __float128* x, __float128* h_packed) const;  // row-major sym

 private:
  int dim_ = 0;
  std::vector<IntVec> points_;
  std::vector<double> log_weights_;
  double constant_ = 0;
};

struct NormalizationResult {
  double c = 0;
  double error = 0;  // certified absolute error bound
};

// Normalization constant C = log( int (sum_a e^{<p_a,x>})^{-1} dx ) - log Vol,
// so that int e^{-u0} dx = Vol. Adaptive quadrature over a box sized by the
// exponential tail certificate from vbar. dim <= 3.
NormalizationResult normalization_constant(const LatticePolytope& p,
                                           double quad_tol = 1e-8,
                                           double tail_tol = 1e-10);

// Reference potential u0 = log sum_a e^{<p_a,x>} + C over the vertex lattice
// points of the polytope. Immutable after construction; evaluation is pure.
class ReferencePotential {
 public:
  ReferencePotential() = default;
  ReferencePotential(const LatticePolytope& p, double quad_tol = 1e-8,
                     double tail_tol = 1e-10);

  const LogSumExp& lse() const { return lse_; }
  int dim() const { return lse_.dim(); }
  int num_points() const { return lse_.num_points(); }
  const std::vector<IntVec>& exponents() const { return lse_.points(); }
  double normalization() const { return c_; }
  double normalization_error() const { return c_error_; }
  const Rational& volume() const { return volume_; }

  double value(const Vec& x) const { return lse_.value(x); }
  Vec gradient(const Vec& x) const { return lse_.gradient(x); }
  Mat hessian(const Vec& x) const { return lse_.hessian(x); }
  SoftmaxWeights softmax(const Vec& x) const { return lse_.softmax(x); }
  double vbar(const Vec& x) const { return lse_.vbar(x); }

 private:
  LogSumExp lse_;
  double c_ = 0;
  double c_error_ = 0;
  Rational volume_;
};

// Reference translated by x_t and normalized to vanish at the origin:
// U~(y) = log sum_a b(p_a, x_t) e^{<p_a, y>} with softmax weights at x_t.
LogSumExp translated_reference(const ReferencePotential& ref, const Vec& x_t);

// Limit reference over the vertex points of a proper face, with prescribed
// positive weights summing to 1. Throws DegenerateWeights.
LogSumExp limit_reference(const FaceDescriptor& f, const std::vector<double>& b);

}  // namespace toric
