#pragma once

#include <functional>
#include <vector>

namespace toric {

struct QuadratureResult {
  double value = 0;
  double error = 0;  // accumulated local error estimates
};

// Adaptive Simpson on [a, b] with absolute tolerance.
QuadratureResult adaptive_simpson(const std::function<double(double)>& f,
                                  double a, double b, double tol,
                                  int max_depth = 40);

// Iterated adaptive Simpson over the box [lo, hi] (any dimension; cost grows
// exponentially with dim, intended for dim <= 3).
QuadratureResult adaptive_box(const std::function<double(const std::vector<double>&)>& f,
                              const std::vector<double>& lo,
                              const std::vector<double>& hi, double tol);

// Upper bound for int_{|x| > radius} e^{-gamma |x|} dx in dimension dim
// (gamma > 0, radius >= 0).
double exp_tail_bound(int dim, double gamma, double radius);

// Composite Simpson weights for an odd number of equispaced nodes.
std::vector<double> simpson_weights(int nodes, double spacing);

}  // namespace toric
