#include "toric/quadrature.hpp"

#include <cmath>
#include <stdexcept>

namespace toric {

namespace {

void simpson_rec(const std::function<double(double)>& f, double a, double b,
                 double fa, double fm, double fb, double whole, double tol,
                 int depth, QuadratureResult& acc) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double h6 = (b - a) / 12.0;
  const double left = h6 * (fa + 4 * flm + fm);
  const double right = h6 * (fm + 4 * frm + fb);
  const double err = (left + right - whole) / 15.0;
  if (depth <= 0 || std::abs(err) <= tol) {
    acc.value += left + right + err;  // Richardson correction
    acc.error += std::abs(err);
    return;
  }
  simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, acc);
  simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, acc);
}

}  // namespace

QuadratureResult adaptive_simpson(const std::function<double(double)>& f,
                                  double a, double b, double tol, int max_depth) {
  QuadratureResult acc;
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4 * fm + fb);
  simpson_rec(f, a, b, fa, fm, fb, whole, tol, max_depth, acc);
  return acc;
}

QuadratureResult adaptive_box(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& lo, const std::vector<double>& hi, double tol) {
  const int dim = static_cast<int>(lo.size());
  if (dim == 0) throw std::invalid_argument("adaptive_box: empty box");
  if (dim == 1) {
    return adaptive_simpson([&](double x) { return f({x}); }, lo[0], hi[0], tol);
  }
  // Integrate the outermost coordinate adaptively; each evaluation is an
  // adaptive integral over the remaining coordinates with a tightened
  // tolerance. Inner error estimates are not tracked per-call, so the
  // reported error is the outer estimate plus the inner tolerance times the
  // outer measure.
  std::vector<double> ilo(lo.begin() + 1, lo.end());
  std::vector<double> ihi(hi.begin() + 1, hi.end());
  const double width = hi[0] - lo[0];
  const double inner_tol = tol / (8.0 * std::max(1.0, width));
  auto outer = adaptive_simpson(
      [&](double x0) {
        auto g = [&](const std::vector<double>& rest) {
          std::vector<double> x(lo.size());
          x[0] = x0;
          for (std::size_t i = 0; i < rest.size(); ++i) x[i + 1] = rest[i];
          return f(x);
        };
        return adaptive_box(g, ilo, ihi, inner_tol).value;
      },
      lo[0], hi[0], tol);
  outer.error += inner_tol * std::max(1.0, width);
  return outer;
}

double exp_tail_bound(int dim, double gamma, double radius) {
  if (gamma <= 0) return INFINITY;
  const double e = std::exp(-gamma * radius);
  switch (dim) {
    case 1:
      return 2.0 * e / gamma;
    case 2:
      return 2.0 * M_PI * e * (radius / gamma + 1.0 / (gamma * gamma));
    case 3:
      return 4.0 * M_PI * e *
             (radius * radius / gamma + 2.0 * radius / (gamma * gamma) +
              2.0 / (gamma * gamma * gamma));
    default: {
      // Coarse bound via surface area of the unit sphere <= 2 pi^(d/2)/Gamma(d/2)
      // and repeated integration by parts; adequate for the guard role.
      double surf = 2.0 * std::pow(M_PI, dim / 2.0) / std::tgamma(dim / 2.0);
      double sum = 0, term = std::pow(radius, dim - 1) / gamma;
      for (int k = dim - 1; k >= 0; --k) {
        sum += term;
        term *= k / (gamma * std::max(radius, 1e-300));
      }
      return surf * e * sum;
    }
  }
}

std::vector<double> simpson_weights(int nodes, double spacing) {
  if (nodes < 3 || nodes % 2 == 0)
    throw std::invalid_argument("simpson_weights: need an odd node count >= 3");
  std::vector<double> w(nodes, 0.0);
  for (int i = 0; i + 2 < nodes; i += 2) {
    w[i] += spacing / 3.0;
    w[i + 1] += 4.0 * spacing / 3.0;
    w[i + 2] += spacing / 3.0;
  }
  return w;
}

}  // namespace toric
