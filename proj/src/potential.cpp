#include "toric/potential.hpp"

#include <quadmath.h>

#include <cmath>
#include <limits>

#include "toric/errors.hpp"
#include "toric/quadrature.hpp"

namespace toric {

LogSumExp::LogSumExp(std::vector<IntVec> points, std::vector<double> log_weights,
                     double constant)
    : points_(std::move(points)), log_weights_(std::move(log_weights)),
      constant_(constant) {
  if (points_.empty()) throw ValidationError("LogSumExp: no points");
  dim_ = static_cast<int>(points_[0].size());
  if (log_weights_.empty()) log_weights_.assign(points_.size(), 0.0);
  if (log_weights_.size() != points_.size())
    throw ValidationError("LogSumExp: weight/point count mismatch");
}

double LogSumExp::vbar(const Vec& x) const {
  double m = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < num_points(); ++a) {
    double e = log_weights_[a];
    for (int d = 0; d < dim_; ++d) e += points_[a][d] * x[d];
    m = std::max(m, e);
  }
  return m;
}

double LogSumExp::value(const Vec& x) const {
  const double m = vbar(x);
  double s = 0;
  for (int a = 0; a < num_points(); ++a) {
    double e = log_weights_[a];
    for (int d = 0; d < dim_; ++d) e += points_[a][d] * x[d];
    s += std::exp(e - m);
  }
  return constant_ + m + std::log(s);
}

SoftmaxWeights LogSumExp::softmax(const Vec& x) const {
  const double m = vbar(x);
  SoftmaxWeights b(num_points());
  double s = 0;
  for (int a = 0; a < num_points(); ++a) {
    double e = log_weights_[a];
    for (int d = 0; d < dim_; ++d) e += points_[a][d] * x[d];
    b[a] = std::exp(e - m);
    s += b[a];
  }
  for (auto& w : b) w /= s;
  return b;
}

Vec LogSumExp::gradient(const Vec& x) const {
  const auto b = softmax(x);
  Vec g = Vec::Zero(dim_);
  for (int a = 0; a < num_points(); ++a)
    for (int d = 0; d < dim_; ++d) g[d] += b[a] * points_[a][d];
  return g;
}

Mat LogSumExp::hessian(const Vec& x) const {
  const auto b = softmax(x);
  Vec g = Vec::Zero(dim_);
  for (int a = 0; a < num_points(); ++a)
    for (int d = 0; d < dim_; ++d) g[d] += b[a] * points_[a][d];
  Mat h = Mat::Zero(dim_, dim_);
  // Centered form keeps the matrix numerically PSD.
  for (int a = 0; a < num_points(); ++a) {
    for (int i = 0; i < dim_; ++i)
      for (int j = 0; j < dim_; ++j)
        h(i, j) += b[a] * (points_[a][i] - g[i]) * (points_[a][j] - g[j]);
  }
  return h;
}

__float128 LogSumExp::value_q(const __float128* x) const {
  __float128 m = -HUGE_VALQ;
  for (int a = 0; a < num_points(); ++a) {
    __float128 e = log_weights_[a];
    for (int d = 0; d < dim_; ++d) e += (__float128)points_[a][d] * x[d];
    if (e > m) m = e;
  }
  __float128 s = 0;
  for (int a = 0; a < num_points(); ++a) {
    __float128 e = log_weights_[a];
    for (int d = 0; d < dim_; ++d) e += (__float128)points_[a][d] * x[d];
    s += expq(e - m);
  }
  return (__float128)constant_ + m + logq(s);
}

void LogSumExp::hessian_q(const __float128* x, __float128* h_packed) const {
  const int n = dim_;
  __float128 m = -HUGE_VALQ;
  std::vector<__float128> e(num_points());
  for (int a = 0; a < num_points(); ++a) {
    e[a] = log_weights_[a];
    for (int d = 0; d < n; ++d) e[a] += (__float128)points_[a][d] * x[d];
    if (e[a] > m) m = e[a];
  }
  __float128 s = 0;
  std::vector<__float128> b(num_points());
  for (int a = 0; a < num_points(); ++a) {
    b[a] = expq(e[a] - m);
    s += b[a];
  }
  std::vector<__float128> g(n, 0);
  for (int a = 0; a < num_points(); ++a) {
    b[a] /= s;
    for (int d = 0; d < n; ++d) g[d] += b[a] * (__float128)points_[a][d];
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) h_packed[i * n + j] = 0;
  for (int a = 0; a < num_points(); ++a)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        h_packed[i * n + j] +=
            b[a] * ((__float128)points_[a][i] - g[i]) * ((__float128)points_[a][j] - g[j]);
}

namespace {

// Inradius of the polytope around the origin: min_r dist(0, facet hyperplane).
double inradius(const LatticePolytope& p) {
  double r = std::numeric_limits<double>::infinity();
  for (const auto& f : p.facets) {
    double n2 = 0;
    for (Int c : f) n2 += double(c) * double(c);
    r = std::min(r, 1.0 / std::sqrt(n2));
  }
  return r;
}

}  // namespace

NormalizationResult normalization_constant(const LatticePolytope& p,
                                           double quad_tol, double tail_tol) {
  if (p.dim > 3)
    throw UnsupportedDimension("normalization quadrature implemented for dim <= 3");
  LogSumExp lse(p.vertices, {}, 0.0);

  // vbar(x) >= gamma |x| with gamma the inradius; bounds the integrand
  // (sum e^{<p,x>})^{-1} <= e^{-vbar(x)}.
  const double gamma = inradius(p);
  if (!(gamma > 0)) throw TailBoundFailure("origin not strictly interior");
  double box = 10.0;
  while (exp_tail_bound(p.dim, gamma, box) > tail_tol) {
    box += 2.0;
    if (box > 2000) throw TailBoundFailure("tail tolerance unreachable");
  }
  const double tail = exp_tail_bound(p.dim, gamma, box);

  std::vector<double> lo(p.dim, -box), hi(p.dim, box);
  Vec x(p.dim);
  auto integrand = [&](const std::vector<double>& xs) {
    for (int d = 0; d < p.dim; ++d) x[d] = xs[d];
    return std::exp(-lse.value(x));
  };
  auto q = adaptive_box(integrand, lo, hi, quad_tol);

  const Rational vol = volume(p);
  NormalizationResult res;
  res.c = std::log(q.value) - std::log(to_double(vol));
  // |d log I| <= dI / (I - dI); include the uncovered tail mass.
  const double di = q.error + tail;
  res.error = di / std::max(q.value - di, 1e-300);
  return res;
}

ReferencePotential::ReferencePotential(const LatticePolytope& p, double quad_tol,
                                       double tail_tol) {
  auto norm = normalization_constant(p, quad_tol, tail_tol);
  lse_ = LogSumExp(p.vertices, {}, norm.c);
  c_ = norm.c;
  c_error_ = norm.error;
  volume_ = toric::volume(p);
}

LogSumExp translated_reference(const ReferencePotential& ref, const Vec& x_t) {
  const auto b = ref.softmax(x_t);
  std::vector<double> logw(b.size());
  for (std::size_t a = 0; a < b.size(); ++a) logw[a] = std::log(b[a]);
  return LogSumExp(ref.exponents(), std::move(logw), 0.0);
}

LogSumExp limit_reference(const FaceDescriptor& f, const std::vector<double>& b) {
  if (f.improper) throw ImproperFace("limit reference needs a proper face");
  if (b.size() != f.face_vertices.size())
    throw DegenerateWeights("weight count does not match face vertex count");
  double sum = 0;
  for (double w : b) {
    if (!(w > 0)) throw DegenerateWeights("limit weights must be strictly positive");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw DegenerateWeights("limit weights must sum to 1");
  std::vector<double> logw(b.size());
  for (std::size_t a = 0; a < b.size(); ++a) logw[a] = std::log(b[a]);
  return LogSumExp(f.face_vertices, std::move(logw), 0.0);
}

}  // namespace toric
