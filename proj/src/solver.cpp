#include "toric/solver.hpp"

#include <quadmath.h>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <random>

#include "toric/errors.hpp"
#include "toric/quadrature.hpp"

namespace toric {

namespace {

using Quad = __float128;
using Triplet = Eigen::Triplet<double>;
using SpMat = Eigen::SparseMatrix<double>;

constexpr double kGl16Nodes[8] = {
    0.0950125098376374, 0.2816035507792589, 0.4580167776572274,
    0.6178762444026438, 0.7554044083550030, 0.8656312023878318,
    0.9445750230732326, 0.9894009349916499};
constexpr double kGl16Weights[8] = {
    0.1894506104550685, 0.1826034150449236, 0.1691565193950025,
    0.1495959888165767, 0.1246289712555339, 0.0951585116824928,
    0.0622535239386479, 0.0271524594117541};

struct Gl16 {
  double s[16];
  double w[16];
  Gl16() {
    for (int k = 0; k < 8; ++k) {
      s[2 * k] = 0.5 * (1.0 - kGl16Nodes[k]);
      s[2 * k + 1] = 0.5 * (1.0 + kGl16Nodes[k]);
      w[2 * k] = w[2 * k + 1] = 0.5 * kGl16Weights[k];
    }
  }
};
const Gl16 kGl16;

// Newton right-hand side for a PDE row, in the det-form scaling with the
// per-step multiplicative demand capped at a few e-folds. Uncapped demands
// spanning e^{10+} make the direction overshoot wildly and the max-norm
// line search thrash; with the cap the iteration traverses large log-scale
// defects a bounded factor per step, and near the root (|G| below the cap)
// it is plain Newton with its quadratic tail.
constexpr double kDemandCap = 2.0;
inline double det_form_rhs(double g) {
  return g > 0 ? -std::min(g, kDemandCap) : std::expm1(std::min(-g, kDemandCap));
}

// Smoothing scale for the determinant surrogate (det + sqrt(det^2+f^2))/2:
// the relative part keeps bulk nodes exact to ~1e-12 of their targets, the
// absolute part sits at the curvature noise double-precision Newton steps
// carry into the quad grid, so a node crossing det = 0 moves its residual by
// a bounded amount instead of jumping by the full log scale.
constexpr double kDetFloor = 1e-6;
constexpr double kStepNoise = 3e-14;

// Chain a node one step toward the window center along its dominant offset
// coordinate. Nodes outside the active region are extended linearly along
// these chains (zero second difference), matching the exponentially small
// true curvature of phi beyond the frontier; a constant extension would
// impose zero slope where the solution still has one.
inline int inward_index(int i, int j, int m, int dim) {
  const int c = m / 2;
  if (dim == 1) return i + (i < c ? 1 : (i > c ? -1 : 0));
  if (std::abs(i - c) >= std::abs(j - c) && i != c)
    return (i + (i < c ? 1 : -1)) * m + j;
  return i * m + (j + (j < c ? 1 : (j > c ? -1 : 0)));
}

// Chain links for the linear extrapolation row at a non-active node:
// phi[idx] = 1.5 phi[a] - 0.5 phi[b] with a one step and b three steps
// inward (slope measured over the stretched 2h baseline). The stretched
// stencil shares no 3-point combination with any PDE row; extrapolating
// from the two adjacent nodes would pin exactly the second difference the
// neighboring PDE row must set, making the system infeasible.
inline void extension_links(int idx, int m, int dim, int* a, int* b) {
  int i = dim == 1 ? idx : idx / m;
  int j = dim == 1 ? 0 : idx % m;
  *a = inward_index(i, j, m, dim);
  int cur = *a;
  for (int step = 0; step < 2; ++step) {
    i = dim == 1 ? cur : cur / m;
    j = dim == 1 ? 0 : cur % m;
    cur = inward_index(i, j, m, dim);
  }
  *b = cur;
}

// Second differences of a quad grid; caller guarantees interior indices.
// The i index runs along the first coordinate (stride m in 2-D).
struct Stencil {
  const std::vector<Quad>& phi;
  int m;
  Quad inv_h2;
  int dim;
  Quad scale = 1;  // multiplies the phi contribution (s-scaled potentials)

  Quad dxx(int i, int j) const {
    const int idx = dim == 1 ? i : i * m + j;
    const int step = dim == 1 ? 1 : m;
    return scale * (phi[idx + step] - 2 * phi[idx] + phi[idx - step]) * inv_h2;
  }
  Quad dyy(int i, int j) const {
    const int idx = i * m + j;
    return scale * (phi[idx + 1] - 2 * phi[idx] + phi[idx - 1]) * inv_h2;
  }
  Quad dxy(int i, int j) const {
    const int idx = i * m + j;
    return scale *
           (phi[idx + m + 1] + phi[idx - m - 1] - phi[idx + m - 1] -
            phi[idx - m + 1]) *
           inv_h2 / 4;
  }
  // Second differences along the grid diagonals (spacing sqrt(2) h).
  Quad dpp(int i, int j) const {
    const int idx = i * m + j;
    return scale * (phi[idx + m + 1] - 2 * phi[idx] + phi[idx - m - 1]) *
           inv_h2 / 2;
  }
  Quad dmm(int i, int j) const {
    const int idx = i * m + j;
    return scale * (phi[idx + m - 1] - 2 * phi[idx] + phi[idx - m + 1]) *
           inv_h2 / 2;
  }
};

// Raw two-frame determinant of D^2_h(U~ + scale * phi) at an interior node
// (no smoothing); 2-D only.
Quad node_det2(const WindowTables& tb, const Stencil& st, int i, int j) {
  const int m = tb.window.resolution;
  const int idx = i * m + j;
  const Quad* rh = &tb.ref_hess[idx * 4];
  const Quad h00 = rh[0] + st.dxx(i, j);
  const Quad h11 = rh[3] + st.dyy(i, j);
  const Quad h01 = rh[1] + st.dxy(i, j);
  const Quad detA = h00 * h11 - h01 * h01;
  const Quad* rr = &tb.ref_hess_rot[idx * 2];
  const Quad hpp = rr[0] + st.dpp(i, j);
  const Quad hmm = rr[1] + st.dmm(i, j);
  const Quad hst = (h00 - h11) / 2;
  const Quad detB = hpp * hmm - hst * hst;
  const bool sane_a = h00 > 0 && h11 > 0;
  const bool sane_b = hpp > 0 && hmm > 0;
  bool use_b;
  if (sane_a && sane_b)
    use_b = hst * hst * (h00 * h11) < h01 * h01 * (hpp * hmm);
  else
    use_b = sane_b;
  return use_b ? detB : detA;
}

// Per-node operator data shared between the residual evaluation, the
// Jacobian assembly and the debug check: selected frame, the partial
// derivatives of det with respect to that frame's three entries, and the
// chain factor d log(det surrogate)/d det.
struct NodeOp {
  double branch = 0;  // 0: axis frame, 1: diagonal frame
  double p1 = 0, p2 = 0, p3 = 0;
  double chain = 0;
};

// Emits the PDE-row coefficients for the phi-stencil of one node (excluding
// the t term on the diagonal and the kappa column).
template <typename Emit>
void emit_pde_row(int idx, int m, int dim, const NodeOp& op, double inv_h2,
                  Emit&& emit) {
  if (dim == 1) {
    const double a = op.chain;  // d det/d h = 1 in 1-D
    emit(idx, -2.0 * a * inv_h2);
    emit(idx - 1, a * inv_h2);
    emit(idx + 1, a * inv_h2);
    return;
  }
  if (op.branch == 0) {
    const double a00 = op.p1 * op.chain;  // p1 = h11
    const double a11 = op.p2 * op.chain;  // p2 = h00
    const double axy = op.p3 * op.chain;  // p3 = -2 h01
    emit(idx, -2.0 * (a00 + a11) * inv_h2);
    emit(idx - m, a00 * inv_h2);
    emit(idx + m, a00 * inv_h2);
    emit(idx - 1, a11 * inv_h2);
    emit(idx + 1, a11 * inv_h2);
    const double cxy = axy * 0.25 * inv_h2;
    emit(idx + m + 1, cxy);
    emit(idx - m - 1, cxy);
    emit(idx + m - 1, -cxy);
    emit(idx - m + 1, -cxy);
    return;
  }
  // Diagonal frame: det = Hpp Hmm - Hst^2 with Hst = (h00 - h11)/2;
  // p1 = Hmm, p2 = Hpp, p3 = -2 Hst.
  const double app = op.p1 * op.chain;
  const double amm = op.p2 * op.chain;
  const double ast = op.p3 * op.chain;
  emit(idx, -(app + amm) * inv_h2);
  emit(idx + m + 1, app * 0.5 * inv_h2);
  emit(idx - m - 1, app * 0.5 * inv_h2);
  emit(idx + m - 1, amm * 0.5 * inv_h2);
  emit(idx - m + 1, amm * 0.5 * inv_h2);
  // Hst couples through (dxx - dyy)/2.
  emit(idx - m, ast * 0.5 * inv_h2);
  emit(idx + m, ast * 0.5 * inv_h2);
  emit(idx - 1, -ast * 0.5 * inv_h2);
  emit(idx + 1, -ast * 0.5 * inv_h2);
}

// Evaluates convexity and (optionally) the nonlinear residual over the grid.
// Rows: PDE at active nodes, constant extension toward the center elsewhere
// (this subsumes the zero-normal-derivative boundary rows), and the gauge
// pin phi(center) = 0 as the extra row matching the kappa column. Returns
// false on a resolvable convexity break at a bulk node.
bool eval_grid(const WindowTables& tb, double t, const std::vector<Quad>& phi,
               Quad kappa, const std::vector<double>* offset,
               Eigen::VectorXd* resid, double* max_norm,
               std::vector<double>* hess_out) {
  const GridWindow& w = tb.window;
  const int m = w.resolution;
  const int n = w.dim;
  const int nn = w.num_nodes();
  const double h = w.spacing();
  const Stencil st{phi, m, (Quad)1.0 / ((Quad)h * (Quad)h), n};
  const Quad tq = t;
  const bool want_g = resid || max_norm;

  if (resid) resid->setZero(nn + 1);
  double worst = 0;

  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < (n == 2 ? m : 1); ++j) {
      const int idx = n == 1 ? i : i * m + j;
      if (tb.active[idx] != 2) {
        int a, b;
        extension_links(idx, m, n, &a, &b);
        const double g =
            (double)(phi[idx] - (Quad)1.5 * phi[a] + (Quad)0.5 * phi[b]);
        if (resid) (*resid)[idx] = g;
        worst = std::max(worst, std::abs(g));
        continue;
      }
      Quad det;
      NodeOp op;
      if (n == 1) {
        det = tb.ref_hess[idx] + st.dxx(i, 0);
      } else {
        const Quad* rh = &tb.ref_hess[idx * 4];
        const Quad h00 = rh[0] + st.dxx(i, j);
        const Quad h11 = rh[3] + st.dyy(i, j);
        const Quad h01 = rh[1] + st.dxy(i, j);
        const Quad detA = h00 * h11 - h01 * h01;
        const Quad* rr = &tb.ref_hess_rot[idx * 2];
        const Quad hpp = rr[0] + st.dpp(i, j);
        const Quad hmm = rr[1] + st.dmm(i, j);
        const Quad hst = (h00 - h11) / 2;
        const Quad detB = hpp * hmm - hst * hst;
        // Two-frame determinant: evaluate in the axis or the diagonal frame,
        // whichever is closer to the local eigenbasis (smaller mixing
        // ratio). A single frame leaks an absolute O(h^2) error from the fat
        // profile into thin directions aligned with the other frame, freezing
        // far-field determinants at the leak size.
        const bool sane_a = h00 > 0 && h11 > 0;
        const bool sane_b = hpp > 0 && hmm > 0;
        bool use_b;
        if (sane_a && sane_b)
          use_b = hst * hst * (h00 * h11) < h01 * h01 * (hpp * hmm);
        else
          use_b = sane_b;
        if (use_b) {
          det = detB;
          op.branch = 1;
          op.p1 = (double)hmm;
          op.p2 = (double)hpp;
          op.p3 = -2.0 * (double)hst;
        } else {
          det = detA;
          op.branch = 0;
          op.p1 = (double)h11;
          op.p2 = (double)h00;
          op.p3 = -2.0 * (double)h01;
        }
      }
      const Quad rhs_exp = tb.ref_val[idx] + tq * phi[idx] + kappa;
      const double fs = tb.det_floor[idx];
      const Quad root = sqrtq(det * det + (Quad)fs * (Quad)fs);
      const Quad dsm = (det + root) / 2;
      if (!(dsm > 0)) return false;
      if (want_g) {
        double gd = (double)(logq(dsm) + rhs_exp);
        if (offset) gd += (*offset)[idx];
        if (resid) (*resid)[idx] = gd;
        worst = std::max(worst, std::abs(gd));
      }
      if (hess_out) {
        op.chain = (double)((1 + det / root) / (2 * dsm));
        (*hess_out)[5 * idx] = op.branch;
        (*hess_out)[5 * idx + 1] = op.p1;
        (*hess_out)[5 * idx + 2] = op.p2;
        (*hess_out)[5 * idx + 3] = op.p3;
        (*hess_out)[5 * idx + 4] = op.chain;
      }
    }
  }

  const int center_idx = n == 1 ? m / 2 : (m / 2) * m + m / 2;
  const double pin = (double)phi[center_idx];
  if (resid) (*resid)[nn] = pin;
  worst = std::max(worst, std::abs(pin));
  if (max_norm) *max_norm = worst;
  return true;
}

struct NewtonOutcome {
  double residual = 0;
  int iterations = 0;
};

// Damped Newton on the bordered system; updates phi and kappa in place.
// `offset` adds a fixed per-node term to G (used by the cold-start homotopy).
NewtonOutcome newton_solve(const WindowTables& tb, double t,
                           const std::vector<double>* offset,
                           std::vector<Quad>& phi, Quad& kappa, double tol,
                           int max_iters, bool verbose) {
  const GridWindow& window = tb.window;
  const int m = window.resolution;
  const int n = window.dim;
  const int nn = window.num_nodes();
  const double h = window.spacing();
  const int center_idx = n == 1 ? m / 2 : (m / 2) * m + m / 2;

  Eigen::VectorXd resid;
  std::vector<double> hess(static_cast<std::size_t>(5) * nn, 0.0);
  double res_norm = 0;
  if (!eval_grid(tb, t, phi, kappa, offset, &resid, &res_norm, &hess))
    throw ConvexityLost("initial guess breaks discrete convexity");
  double res_merit = resid.norm();

  Eigen::SparseLU<SpMat> lu;
  bool analyzed = false;
  int iter = 0;
  for (; iter < max_iters && res_norm > tol; ++iter) {
    std::vector<Triplet> trip;
    trip.reserve(static_cast<std::size_t>(nn) * (n == 1 ? 5 : 11) + 4);
    Eigen::VectorXd rhs(nn + 1);
    const double inv_h2 = 1.0 / (h * h);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < (n == 2 ? m : 1); ++j) {
        const int idx = n == 1 ? i : i * m + j;
        if (tb.active[idx] != 2) {
          int a, b;
          extension_links(idx, m, n, &a, &b);
          trip.emplace_back(idx, idx, 1.0);
          trip.emplace_back(idx, a, -1.5);
          trip.emplace_back(idx, b, 0.5);
          rhs[idx] = -resid[idx];
          continue;
        }
        NodeOp op;
        op.branch = hess[5 * idx];
        op.p1 = hess[5 * idx + 1];
        op.p2 = hess[5 * idx + 2];
        op.p3 = hess[5 * idx + 3];
        op.chain = hess[5 * idx + 4];
        double coeffs[10];
        int cols[10];
        int ncoef = 0;
        double diag = 0;
        emit_pde_row(idx, m, n, op, inv_h2, [&](int col, double c) {
          if (col == idx) {
            diag += c;
            return;
          }
          cols[ncoef] = col;
          coeffs[ncoef] = c;
          ++ncoef;
        });
        diag += t;
        double mag = std::abs(diag) + t;
        for (int k = 0; k < ncoef; ++k) mag = std::max(mag, std::abs(coeffs[k]));
        const double scale = 1.0 / (1.0 + mag);
        trip.emplace_back(idx, idx, scale * diag);
        for (int k = 0; k < ncoef; ++k)
          trip.emplace_back(idx, cols[k], scale * coeffs[k]);
        trip.emplace_back(idx, nn, scale);
        rhs[idx] = det_form_rhs(resid[idx]) * scale;
      }
    }
    trip.emplace_back(nn, center_idx, 1.0);
    rhs[nn] = -resid[nn];

    SpMat jac(nn + 1, nn + 1);
    jac.setFromTriplets(trip.begin(), trip.end());
    if (!analyzed) {
      lu.analyzePattern(jac);
      analyzed = true;
    }
    lu.factorize(jac);
    if (lu.info() != Eigen::Success)
      throw NumericalError("Newton linearization is singular at t = " +
                           std::to_string(t));
    Eigen::VectorXd delta = lu.solve(rhs);
    if (verbose) {
      Eigen::VectorXd lin_res = jac * delta - rhs;
      std::cerr << "  [lin] |J d - r|_inf=" << lin_res.lpNorm<Eigen::Infinity>()
                << " |r|_inf=" << rhs.lpNorm<Eigen::Infinity>()
                << " |d|_inf=" << delta.lpNorm<Eigen::Infinity>() << "\n";
    }
    if (verbose) {
      double dmax = 0, rhmax = 0;
      bool finite = true;
      for (int k = 0; k <= nn; ++k) {
        if (!std::isfinite(delta[k])) finite = false;
        dmax = std::max(dmax, std::abs(delta[k]));
        rhmax = std::max(rhmax, std::abs(rhs[k]));
      }
      std::cerr << "  [dir] |delta|max=" << dmax << " |rhs|max=" << rhmax
                << " finite=" << finite << "\n";
    }

    // Backtracking line search on the l2 merit (sup-norm has no reliable
    // descent direction when the argmax node switches); convergence itself
    // is still declared on the max-norm. A mild best-seen fallback escapes
    // plateaus where no alpha clears the Armijo bar.
    double alpha = 1.0;
    bool accepted = false;
    double best_merit = INFINITY, best_alpha = 0;
    for (int halving = 0; halving < 24; ++halving, alpha *= 0.5) {
      std::vector<Quad> trial(nn);
      for (int k = 0; k < nn; ++k) trial[k] = phi[k] + (Quad)(alpha * delta[k]);
      const Quad trial_kappa = kappa + (Quad)(alpha * delta[nn]);
      Eigen::VectorXd trial_resid;
      std::vector<double> trial_hess(static_cast<std::size_t>(5) * nn, 0.0);
      double trial_norm = 0;
      if (!eval_grid(tb, t, trial, trial_kappa, offset, &trial_resid,
                     &trial_norm, &trial_hess))
        continue;
      const double trial_merit = trial_resid.norm();
      if (trial_merit < best_merit) {
        best_merit = trial_merit;
        best_alpha = alpha;
      }
      if (trial_merit > res_merit * (1.0 - 1e-4 * alpha) + 1e-15) continue;
      phi.swap(trial);
      kappa = trial_kappa;
      resid.swap(trial_resid);
      hess.swap(trial_hess);
      res_norm = trial_norm;
      res_merit = trial_merit;
      accepted = true;
      break;
    }
    if (!accepted) {
      if (!(best_merit < res_merit * 1.05))
        throw NotConverged("no acceptable damping at t = " +
                           std::to_string(t) + ", residual " +
                           std::to_string(res_norm));
      std::vector<Quad> trial(nn);
      for (int k = 0; k < nn; ++k)
        trial[k] = phi[k] + (Quad)(best_alpha * delta[k]);
      const Quad trial_kappa = kappa + (Quad)(best_alpha * delta[nn]);
      Eigen::VectorXd trial_resid;
      std::vector<double> trial_hess(static_cast<std::size_t>(5) * nn, 0.0);
      double trial_norm = 0;
      eval_grid(tb, t, trial, trial_kappa, offset, &trial_resid, &trial_norm,
                &trial_hess);
      phi.swap(trial);
      kappa = trial_kappa;
      resid.swap(trial_resid);
      hess.swap(trial_hess);
      res_norm = trial_norm;
      res_merit = trial_resid.norm();
      res_merit = resid.norm();
    }
    if (verbose) {
      int rmax = 0;
      for (int k = 0; k <= nn; ++k)
        if (std::abs(resid[k]) > std::abs(resid[rmax])) rmax = k;
      const int ri = rmax == nn ? -1 : (n == 1 ? rmax : rmax / m);
      const int rj = rmax == nn ? -1 : (n == 1 ? 0 : rmax % m);
      std::cerr << "[newton] t=" << t << " iter=" << iter + 1
                << " residual=" << res_norm << " alpha=" << alpha
                << " at(" << ri << "," << rj << ")"
                << " active=" << (rmax < nn ? int(tb.active[rmax]) : -1)
                << " G=" << resid[rmax]
                << " refv=" << (rmax < nn ? (double)tb.ref_val[rmax] : 0)
                << " kappa=" << (double)kappa << "\n";
    }
  }
  if (res_norm > tol) {
    if (verbose && n == 2) {
      std::cerr << "[stall map] residual levels (.<1e-6 -<1e-3 +<0.1 #>=0.1), X=inactive\n";
      const int step = std::max(1, m / 65);
      for (int i = 0; i < m; i += step) {
        for (int j = 0; j < m; j += step) {
          const int idx = i * m + j;
          char c;
          if (tb.active[idx] != 2) c = tb.active[idx] == 1 ? 'o' : 'X';
          else {
            const double g = std::abs(resid[idx]);
            c = g < 1e-6 ? '.' : (g < 1e-3 ? '-' : (g < 0.1 ? '+' : '#'));
          }
          std::cerr << c;
        }
        std::cerr << "\n";
      }
    }
    throw NotConverged("Newton stalled at t = " + std::to_string(t) +
                       ", residual " + std::to_string(res_norm));
  }
  return {res_norm, iter};
}

}  // namespace

GridWindow make_window(Vec center, double half_width, int resolution, int dim) {
  if (dim != 1 && dim != 2)
    throw ValidationError("grid window dimension must be 1 or 2");
  if (center.size() != dim) throw ValidationError("window center arity mismatch");
  if (resolution < 33 || resolution % 2 == 0)
    throw ValidationError("window resolution must be odd and >= 33");
  if (!(half_width > 0)) throw ValidationError("window half-width must be positive");
  GridWindow w{std::move(center), half_width, resolution, dim};
  if (!(w.spacing() < half_width / 8.0))
    throw ValidationError("window spacing must satisfy h < L/8");
  return w;
}

ContinuitySolver::ContinuitySolver(LatticePolytope polytope, SolverOptions opts)
    : polytope_(std::move(polytope)), opts_(opts) {
  if (polytope_.dim > 2)
    throw UnsupportedDimension("PDE solver supports dim 1 and 2 only");
  ref_ = ReferencePotential(polytope_);
  invariants_ = compute_R(polytope_);
  vol_ = to_double(ref_.volume());
  for (const auto& p : ref_.exponents()) {
    double n2 = 0;
    for (Int c : p) n2 += double(c) * double(c);
    max_point_norm_ = std::max(max_point_norm_, std::sqrt(n2));
  }
}

Vec ContinuitySolver::reference_minimizer() const {
  Vec x = Vec::Zero(polytope_.dim);
  for (int it = 0; it < 100; ++it) {
    Vec g = ref_.gradient(x);
    if (g.norm() < 1e-13) break;
    Mat h = ref_.hessian(x);
    x -= h.ldlt().solve(g);
  }
  return x;
}

std::shared_ptr<const WindowTables> ContinuitySolver::build_tables(
    const GridWindow& w) const {
  auto tables = std::make_shared<WindowTables>();
  tables->window = w;
  const int m = w.resolution;
  const int n = w.dim;
  const int nn = w.num_nodes();
  tables->ref_val.resize(nn);
  tables->ref_grad.resize(static_cast<std::size_t>(nn) * n);
  tables->ref_hess.resize(static_cast<std::size_t>(nn) * n * n);
  tables->active.assign(nn, 0);

  const LogSumExp& lse = ref_.lse();
  Quad cq[2] = {0, 0};
  for (int d = 0; d < n; ++d) cq[d] = (Quad)w.center[d];
  const Quad v_center = lse.value_q(cq);

  Vec x(n);
  Quad xq[2] = {0, 0};
  Quad hq[4];
  Quad ref_min = 0;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < (n == 2 ? m : 1); ++j) {
      const int idx = n == 1 ? i : i * m + j;
      xq[0] = cq[0] + (Quad)w.rel(i);
      x[0] = (double)xq[0];
      if (n == 2) {
        xq[1] = cq[1] + (Quad)w.rel(j);
        x[1] = (double)xq[1];
      }
      tables->ref_val[idx] = lse.value_q(xq) - v_center;
      if (tables->ref_val[idx] < ref_min) ref_min = tables->ref_val[idx];
      Vec g = lse.gradient(x);
      for (int d = 0; d < n; ++d) tables->ref_grad[idx * n + d] = g[d];
      lse.hessian_q(xq, hq);
      for (int d = 0; d < n * n; ++d) tables->ref_hess[idx * n * n + d] = hq[d];
    }
  }

  // Discretize the reference Hessian with the same second differences used
  // for phi, so the combined operator is det(D^2_h(U~ + phi)): mixing the
  // analytic reference Hessian with discrete phi differences leaves an
  // O(h^2) absolute mismatch that swamps the exponentially thin far-field
  // determinants. The diagonal-frame differences back the rotated branch of
  // the two-frame determinant (see eval_grid).
  {
    const Quad inv_h2 = (Quad)1.0 / ((Quad)w.spacing() * (Quad)w.spacing());
    std::vector<Quad> disc(static_cast<std::size_t>(nn) * n * n);
    for (int d = 0; d < static_cast<int>(disc.size()); ++d)
      disc[d] = tables->ref_hess[d];
    if (n == 2) tables->ref_hess_rot.assign(static_cast<std::size_t>(nn) * 2, 0);
    for (int i = 1; i + 1 < m; ++i) {
      for (int j = (n == 2 ? 1 : 0); j < (n == 2 ? m - 1 : 1); ++j) {
        const int idx = n == 1 ? i : i * m + j;
        const auto& rv = tables->ref_val;
        if (n == 1) {
          disc[idx] = (rv[idx + 1] - 2 * rv[idx] + rv[idx - 1]) * inv_h2;
        } else {
          disc[idx * 4] = (rv[idx + m] - 2 * rv[idx] + rv[idx - m]) * inv_h2;
          disc[idx * 4 + 3] = (rv[idx + 1] - 2 * rv[idx] + rv[idx - 1]) * inv_h2;
          disc[idx * 4 + 1] = disc[idx * 4 + 2] =
              (rv[idx + m + 1] + rv[idx - m - 1] - rv[idx + m - 1] -
               rv[idx - m + 1]) * inv_h2 / 4;
          tables->ref_hess_rot[idx * 2] =
              (rv[idx + m + 1] - 2 * rv[idx] + rv[idx - m - 1]) * inv_h2 / 2;
          tables->ref_hess_rot[idx * 2 + 1] =
              (rv[idx + m - 1] - 2 * rv[idx] + rv[idx - m + 1]) * inv_h2 / 2;
        }
      }
    }
    tables->ref_hess.swap(disc);
  }

  tables->ref_floor = (double)ref_min;
  apply_cap(*tables, opts_.active_cap);
  return tables;
}

// (Re)derives the node classification and determinant-surrogate scales for
// a given sublevel cap. Covered region: interior nodes within the reference
// sublevel cap; the reference grows like the support function of the
// polytope, so the cut is anisotropic exactly as w_t is. Beyond it e^{-w}
// sits far below every quadrature tolerance while the PDE determinant
// targets fall below what double-precision Newton steps resolve. The PDE is
// imposed only where the whole stencil is covered (level 2); the covered
// ring and everything outside extend linearly along inward chains.
void ContinuitySolver::apply_cap(WindowTables& tables, double cap_value) const {
  const GridWindow& w = tables.window;
  const int m = w.resolution;
  const int n = w.dim;
  const int nn = w.num_nodes();
  tables.active.assign(nn, 0);
  tables.det_floor.assign(nn, 0.0);
  const Quad ref_min = (Quad)tables.ref_floor;
  for (int k = 0; k < nn; ++k) {
    const double wproxy = (double)(tables.ref_val[k] - ref_min);
    double tr0 = 0;
    for (int d = 0; d < n; ++d)
      tr0 += (double)tables.ref_hess[static_cast<std::size_t>(k) * n * n + d * n + d];
    tables.det_floor[k] =
        std::max(kDetFloor * std::exp(-wproxy), kStepNoise * (1.0 + tr0 * tr0));
  }
  const Quad cap = (Quad)cap_value + ref_min;
  for (int i = 1; i + 1 < m; ++i) {
    for (int j = (n == 2 ? 1 : 0); j < (n == 2 ? m - 1 : 1); ++j) {
      const int idx = n == 1 ? i : i * m + j;
      if (tables.ref_val[idx] <= cap) tables.active[idx] = 1;
    }
  }
  for (int i = 1; i + 1 < m; ++i) {
    for (int j = (n == 2 ? 1 : 0); j < (n == 2 ? m - 1 : 1); ++j) {
      const int idx = n == 1 ? i : i * m + j;
      if (!tables.active[idx]) continue;
      bool full = true;
      for (int di = -1; di <= 1 && full; ++di)
        for (int dj = (n == 2 ? -1 : 0); dj <= (n == 2 ? 1 : 0); ++dj)
          if (!tables.active[n == 1 ? i + di : (i + di) * m + (j + dj)])
            full = false;
      if (full) tables.active[idx] = 2;
    }
  }
}

SolutionState ContinuitySolver::solve_t(double t, const GridWindow& window,
                                        const std::vector<Quad>& init_phi,
                                        std::optional<Quad> init_kappa) const {
  if (t < 0 || t >= r_bound())
    throw ValidationError("t must lie in [0, R)");
  auto tables = build_tables(window);
  const WindowTables& tb = *tables;
  const int m = window.resolution;
  const int n = window.dim;
  const int nn = window.num_nodes();
  const double h = window.spacing();

  std::vector<Quad> phi;
  Quad kappa = 0;
  NewtonOutcome outcome;
  int total_iters = 0;

  auto mean_kappa = [&](const std::vector<Quad>& p) {
    Eigen::VectorXd g0;
    double dummy;
    if (!eval_grid(tb, t, p, 0, nullptr, &g0, &dummy, nullptr))
      throw ConvexityLost("initial guess breaks discrete convexity");
    Quad s = 0;
    int cnt = 0;
    for (int k = 0; k < nn; ++k) {
      if (tb.active[k] != 2) continue;
      s += (Quad)g0[k];
      ++cnt;
    }
    return -s / cnt;
  };

  if (!init_phi.empty()) {
    phi = init_phi;
    if (static_cast<int>(phi.size()) != nn)
      throw ValidationError("initial guess size mismatch");
    kappa = init_kappa ? *init_kappa : mean_kappa(phi);
    outcome = newton_solve(tb, t, nullptr, phi, kappa, opts_.newton_tol,
                           opts_.max_newton_iterations, opts_.verbose);
    total_iters = outcome.iterations;
  } else {
    // Cold start. Initial guess: the beta = 1/2 fattened reference
    //   u_init(x) = 2 log sum_a e^{<p_a, x>/2},
    // whose Hessian decays at the e^{-w} rate of the solution along facet
    // directions (from phi = 0 the far-field log residual is not even
    // continuous under step noise). Along face-span tails the fattened
    // Hessian stays too heavy, so the full-cap problem still sits O(10)
    // e-folds from the solution there; the remaining march is done by
    // continuation in the sublevel cap, growing the PDE region a few
    // e-folds per stage with each stage warm-started from the last.
    phi.assign(nn, 0);
    {
      const LogSumExp& lse = ref_.lse();
      Quad cq[2] = {0, 0}, half_c[2] = {0, 0};
      for (int d = 0; d < n; ++d) {
        cq[d] = (Quad)window.center[d];
        half_c[d] = cq[d] / 2;
      }
      const Quad v_half_c = lse.value_q(half_c);
      Quad xq[2] = {0, 0}, xh[2] = {0, 0};
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < (n == 2 ? m : 1); ++j) {
          const int idx = n == 1 ? i : i * m + j;
          xq[0] = cq[0] + (Quad)window.rel(i);
          xh[0] = xq[0] / 2;
          if (n == 2) {
            xq[1] = cq[1] + (Quad)window.rel(j);
            xh[1] = xq[1] / 2;
          }
          phi[idx] = 2 * (lse.value_q(xh) - v_half_c) - tb.ref_val[idx];
        }
      }
    }

    const double cap_final = opts_.active_cap;
    double cap_stage = std::min(6.0, cap_final);
    WindowTables stage = tb;  // masks rewritten per stage
    while (true) {
      const bool last = cap_stage >= cap_final;
      apply_cap(stage, cap_stage);
      kappa = [&] {
        Eigen::VectorXd g0;
        double dummy;
        if (!eval_grid(stage, t, phi, 0, nullptr, &g0, &dummy, nullptr))
          throw ConvexityLost("cold-start guess breaks discrete convexity");
        Quad sum = 0;
        int cnt = 0;
        for (int k = 0; k < nn; ++k) {
          if (stage.active[k] != 2) continue;
          sum += (Quad)g0[k];
          ++cnt;
        }
        return -sum / cnt;
      }();
      outcome = newton_solve(stage, t, nullptr, phi, kappa,
                             last ? opts_.newton_tol : 1e-7,
                             opts_.max_newton_iterations, opts_.verbose);
      total_iters += outcome.iterations;
      if (opts_.verbose)
        std::cerr << "[cap] t=" << t << " cap=" << cap_stage
                  << " iters=" << outcome.iterations << "\n";
      if (last) break;
      cap_stage = std::min(cap_final, cap_stage + 3.0);
    }
  }

  SolutionState s;
  s.t = t;
  s.window = window;
  s.phi = std::move(phi);
  s.kappa = kappa;
  s.residual_norm = outcome.residual;
  s.newton_iterations = total_iters;
  s.tables = tables;

  // Discrete argmin of w_t over the active region, then one Newton step on
  // the quadratic model from the smooth interpolant (the grid argmin alone
  // would quantize the softmax weights).
  int best = -1;
  double best_w = INFINITY;
  for (int idx = 0; idx < nn; ++idx) {
    if (tb.active[idx] != 2) continue;
    const double wv = s.w_at(idx);
    if (wv < best_w) {
      best_w = wv;
      best = idx;
    }
  }
  const int bi = n == 1 ? best : best / m;
  const int bj = n == 1 ? 0 : best % m;
  const int margin = opts_.boundary_margin_cells;
  bool near_edge = bi < margin || bi >= m - margin ||
                   (n == 2 && (bj < margin || bj >= m - margin));
  // x_t refinement needs a fully active stencil around the argmin.
  for (int di = -1; di <= 1 && !near_edge; ++di)
    for (int dj = (n == 2 ? -1 : 0); dj <= (n == 2 ? 1 : 0); ++dj) {
      const int ii = bi + di, jj = n == 2 ? bj + dj : 0;
      if (!tb.active[n == 1 ? ii : ii * m + jj]) near_edge = true;
    }
  if (near_edge) {
    Vec loc = window.node_abs(bi, bj);
    throw MinimizerAtBoundary(
        "w_t minimizer within " + std::to_string(margin) +
            " cells of the window edge; recenter and retry",
        {loc.data(), loc.data() + loc.size()});
  }

  const Stencil st{s.phi, m, (Quad)1.0 / ((Quad)h * (Quad)h), n};
  Vec grad(n);
  Mat hw(n, n);
  if (n == 1) {
    grad[0] = tb.ref_grad[best] +
              t * (double)((s.phi[best + 1] - s.phi[best - 1]) / (Quad)(2 * h));
    hw(0, 0) = (double)tb.ref_hess[best] + t * (double)st.dxx(bi, 0);
  } else {
    grad[0] = tb.ref_grad[2 * best] +
              t * (double)((s.phi[best + m] - s.phi[best - m]) / (Quad)(2 * h));
    grad[1] = tb.ref_grad[2 * best + 1] +
              t * (double)((s.phi[best + 1] - s.phi[best - 1]) / (Quad)(2 * h));
    hw(0, 0) = (double)tb.ref_hess[4 * best] + t * (double)st.dxx(bi, bj);
    hw(1, 1) = (double)tb.ref_hess[4 * best + 3] + t * (double)st.dyy(bi, bj);
    hw(0, 1) = hw(1, 0) =
        (double)tb.ref_hess[4 * best + 1] + t * (double)st.dxy(bi, bj);
  }
  Vec step = -hw.ldlt().solve(grad);
  for (int d = 0; d < n; ++d) step[d] = std::clamp(step[d], -h, h);
  s.x_t = window.node_abs(bi, bj) + step;
  s.m_t = best_w + grad.dot(step) + 0.5 * step.dot(hw * step);
  s.b = ref_.softmax(s.x_t);
  return s;
}

RecenterResult ContinuitySolver::recenter(const SolutionState& s,
                                          std::optional<Vec> new_center) const {
  const GridWindow& w = s.window;
  const int m = w.resolution;
  const int n = w.dim;
  const double h = w.spacing();
  Vec target = new_center ? *new_center : s.x_t;

  GridWindow out = make_window(target, w.half_width, w.resolution, w.dim);
  const Vec delta = target - w.center;

  // Interpolation at window-relative positions (clamped bilinear; values are
  // blended in quad so the identity translation returns phi exactly).
  auto interp = [&](double yx, double yy) -> Quad {
    const double fx = std::clamp((yx + w.half_width) / h, 0.0, double(m - 1));
    const int i0 = std::min(static_cast<int>(fx), m - 2);
    const double ax = fx - i0;
    if (n == 1) return (Quad)(1.0 - ax) * s.phi[i0] + (Quad)ax * s.phi[i0 + 1];
    const double fy = std::clamp((yy + w.half_width) / h, 0.0, double(m - 1));
    const int j0 = std::min(static_cast<int>(fy), m - 2);
    const double ay = fy - j0;
    return (Quad)((1.0 - ax) * (1.0 - ay)) * s.phi[i0 * m + j0] +
           (Quad)(ax * (1.0 - ay)) * s.phi[(i0 + 1) * m + j0] +
           (Quad)((1.0 - ax) * ay) * s.phi[i0 * m + j0 + 1] +
           (Quad)(ax * ay) * s.phi[(i0 + 1) * m + j0 + 1];
  };

  const Quad phi_at_delta = interp(delta[0], n == 2 ? delta[1] : 0.0);

  RecenterResult r;
  r.window = out;
  r.phi.resize(w.num_nodes());
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < (n == 2 ? m : 1); ++j) {
      const int idx = n == 1 ? i : i * m + j;
      const double yx = out.rel(i) + delta[0];
      const double yy = n == 2 ? out.rel(j) + delta[1] : 0.0;
      r.phi[idx] = interp(yx, yy) - phi_at_delta;
    }
  }

  // kappa' = w_t(new center): analytic reference difference plus the value
  // shift of phi at the translation.
  const LogSumExp& lse = ref_.lse();
  Quad cq[2] = {0, 0}, tq[2] = {0, 0};
  for (int d = 0; d < n; ++d) {
    cq[d] = (Quad)w.center[d];
    tq[d] = (Quad)target[d];
  }
  r.kappa =
      s.kappa + (lse.value_q(tq) - lse.value_q(cq)) + (Quad)s.t * phi_at_delta;
  return r;
}

std::vector<FrontierSample> ContinuitySolver::frontier_samples(
    const SolutionState& s, int rays) const {
  const WindowTables& tb = *s.tables;
  const GridWindow& w = s.window;
  const int m = w.resolution;
  const int n = w.dim;
  const double h = w.spacing();
  std::vector<FrontierSample> out;

  auto w_interp = [&](double yx, double yy) {
    const double fx = std::clamp((yx + w.half_width) / h, 0.0, double(m - 1));
    const int i0 = std::min(static_cast<int>(fx), m - 2);
    const double ax = fx - i0;
    if (n == 1) return (1.0 - ax) * s.w_at(i0) + ax * s.w_at(i0 + 1);
    const double fy = std::clamp((yy + w.half_width) / h, 0.0, double(m - 1));
    const int j0 = std::min(static_cast<int>(fy), m - 2);
    const double ay = fy - j0;
    return (1.0 - ax) * (1.0 - ay) * s.w_at(i0 * m + j0) +
           ax * (1.0 - ay) * s.w_at((i0 + 1) * m + j0) +
           (1.0 - ax) * ay * s.w_at(i0 * m + j0 + 1) +
           ax * ay * s.w_at((i0 + 1) * m + j0 + 1);
  };
  auto is_active = [&](double yx, double yy) {
    const double fi = (yx + w.half_width) / h;
    if (fi < 0 || fi > m - 1) return false;
    const int i = static_cast<int>(std::lround(fi));
    int idx = i;
    if (n == 2) {
      const double fj = (yy + w.half_width) / h;
      if (fj < 0 || fj > m - 1) return false;
      idx = i * m + static_cast<int>(std::lround(fj));
    }
    return tb.active[idx] != 0;
  };

  const Vec rel_xt = s.x_t - w.center;
  if (n == 1) {
    for (double dir : {-1.0, 1.0}) {
      double r = h;
      while (is_active(rel_xt[0] + dir * (r + h), 0) && r < 4 * w.half_width)
        r += h;
      FrontierSample fs;
      fs.radius = r;
      fs.w_value = w_interp(rel_xt[0] + dir * r, 0);
      fs.dtheta = 1.0;  // unused in 1-D
      fs.position = s.x_t;
      fs.position[0] += dir * r;
      out.push_back(fs);
    }
    return out;
  }

  const double dtheta = 2.0 * M_PI / rays;
  for (int k = 0; k < rays; ++k) {
    const double th = (k + 0.5) * dtheta;
    const double cx = std::cos(th), cy = std::sin(th);
    double r = h;
    while (is_active(rel_xt[0] + cx * (r + 0.5 * h),
                     rel_xt[1] + cy * (r + 0.5 * h)) &&
           r < 4 * w.half_width)
      r += 0.5 * h;
    FrontierSample fs;
    fs.radius = r;
    fs.w_value = w_interp(rel_xt[0] + cx * r, rel_xt[1] + cy * r);
    fs.dtheta = dtheta;
    fs.position = s.x_t;
    fs.position[0] += cx * r;
    fs.position[1] += cy * r;
    out.push_back(fs);
  }
  return out;
}

double ContinuitySolver::boundary_tail_mass(const SolutionState& s) const {
  const double h = s.window.spacing();
  const double dip = h * max_point_norm_;  // interpolation/marching slack
  const auto samples = frontier_samples(s, 720);

  if (s.window.dim == 1) {
    double total = 0;
    for (const auto& fs : samples) {
      const double kap = (fs.w_value - dip - s.m_t) / fs.radius;
      if (!(kap > 0))
        throw TailNotCertified("nonpositive growth fit at the frontier");
      total += std::exp(-(s.m_t + kap * fs.radius)) / kap;
    }
    return total;
  }

  // Cone decomposition of the exterior of the active region around x_t: each
  // angular sector carries its own certified slope, so fast-growth
  // directions are not penalized by the slowest one.
  double total = 0;
  const int nrays = static_cast<int>(samples.size());
  for (int k = 0; k < nrays; ++k) {
    const auto& a = samples[k];
    const auto& b = samples[(k + 1) % nrays];
    const double wmin = std::min(a.w_value, b.w_value) - dip;
    const double rho = std::min(a.radius, b.radius);
    const double kap = (wmin - s.m_t) / std::max(a.radius, b.radius);
    if (!(kap > 0))
      throw TailNotCertified("nonpositive growth fit on the frontier");
    total += a.dtheta * std::exp(-(s.m_t + kap * rho)) * (kap * rho + 1.0) /
             (kap * kap);
  }
  return total;
}

KeyIdentityResult ContinuitySolver::key_identity(const SolutionState& s) const {
  const WindowTables& tb = *s.tables;
  const GridWindow& w = s.window;
  const int m = w.resolution;
  const int n = w.dim;
  const auto sw = simpson_weights(m, w.spacing());

  KeyIdentityResult out;
  out.window_integral = Vec::Zero(n);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < (n == 2 ? m : 1); ++j) {
      const int idx = n == 1 ? i : i * m + j;
      if (!tb.active[idx]) continue;
      const double wv = s.w_at(idx);
      if (wv > 700) continue;
      const double mass = (n == 1 ? sw[i] : sw[i] * sw[j]) * std::exp(-wv);
      for (int d = 0; d < n; ++d)
        out.window_integral[d] += mass * tb.ref_grad[idx * n + d];
    }
  }
  out.window_integral /= vol_;

  Vec target = out.window_integral;
  const auto pc = to_double(invariants_.barycenter);
  for (int d = 0; d < n; ++d) target[d] += s.t / (1.0 - s.t) * pc[d];

  out.tail_bound = boundary_tail_mass(s) * max_point_norm_ / vol_;
  out.residual = target.norm() + out.tail_bound;
  return out;
}

WangZhuDiagnostics ContinuitySolver::wang_zhu_diagnostics(
    const SolutionState& s) const {
  WangZhuDiagnostics d;
  d.m_t = s.m_t;
  d.offset_fit = s.m_t;
  d.kappa_fit = INFINITY;
  for (const auto& fs : frontier_samples(s, 720)) {
    const double k = (fs.w_value - s.m_t) / fs.radius;
    if (k < d.kappa_fit) {
      d.kappa_fit = k;
      d.achieving_node = fs.position;
    }
  }
  return d;
}

EnergyFunctionals ContinuitySolver::energy_functionals(
    const SolutionState& s) const {
  const WindowTables& tb = *s.tables;
  const GridWindow& w = s.window;
  const int m = w.resolution;
  const int n = w.dim;
  const double h = w.spacing();
  const int nn = w.num_nodes();
  const auto sw = simpson_weights(m, h);
  const Stencil st{s.phi, m, (Quad)1.0 / ((Quad)h * (Quad)h), n};

  std::vector<double> det0(nn, 0.0);
  {
    Stencil st0{s.phi, m, (Quad)1.0 / ((Quad)h * (Quad)h), n, (Quad)0};
    for (int i = 1; i + 1 < m; ++i) {
      for (int j = (n == 2 ? 1 : 0); j < (n == 2 ? m - 1 : 1); ++j) {
        const int idx = n == 1 ? i : i * m + j;
        if (tb.active[idx] != 2) continue;
        det0[idx] = n == 1 ? (double)tb.ref_hess[idx]
                           : (double)node_det2(tb, st0, i, j);
      }
    }
  }

  // I(s phi)/s = (1/Vol) int phi (det D^2 u0 - det(D^2 u0 + s D^2 phi)) dx;
  // the outer factor s cancels, which keeps the s -> 0 end of the J
  // quadrature exact.
  auto i_over_s = [&](double sc) {
    Stencil sts{s.phi, m, (Quad)1.0 / ((Quad)h * (Quad)h), n, (Quad)sc};
    double acc = 0;
    for (int i = 1; i + 1 < m; ++i) {
      for (int j = (n == 2 ? 1 : 0); j < (n == 2 ? m - 1 : 1); ++j) {
        const int idx = n == 1 ? i : i * m + j;
        if (tb.active[idx] != 2) continue;
        const double dets =
            n == 1 ? (double)(tb.ref_hess[idx] + sts.dxx(i, 0))
                   : (double)node_det2(tb, sts, i, j);
        const double wt = n == 1 ? sw[i] : sw[i] * sw[j];
        acc += wt * (double)s.phi[idx] * (det0[idx] - dets);
      }
    }
    return acc / vol_;
  };

  EnergyFunctionals e;
  e.i = i_over_s(1.0);
  for (int k = 0; k < 16; ++k) e.j += kGl16.w[k] * i_over_s(kGl16.s[k]);
  return e;
}

std::pair<double, double> ContinuitySolver::psi_sups(
    const SolutionState& s) const {
  if (s.t <= 0) throw ValidationError("psi gauge requires t > 0");
  const WindowTables& tb = *s.tables;
  const GridWindow& w = s.window;
  const int m = w.resolution;
  const int n = w.dim;
  const double t = s.t;
  const double u0_xt = ref_.value(s.x_t);
  double sup_psi = -INFINITY, sup_neg = -INFINITY;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < (n == 2 ? m : 1); ++j) {
      const int idx = n == 1 ? i : i * m + j;
      if (!tb.active[idx]) continue;
      const Vec x = w.node_abs(i, j);
      const double psi = (s.w_at(idx) - s.m_t) / t -
                         (1.0 - t) / t * (ref_.value(x) - u0_xt) -
                         ref_.value(x - s.x_t);
      sup_psi = std::max(sup_psi, psi);
      sup_neg = std::max(sup_neg, -psi);
    }
  }
  return {sup_psi, sup_neg};
}

double ContinuitySolver::harnack_diagnostic(const SolutionState& s) const {
  auto [sup_psi, sup_neg] = psi_sups(s);
  return s.t * (sup_neg - polytope_.dim * sup_psi);
}

double ContinuitySolver::gradient_image_violation(
    const SolutionState& s) const {
  const WindowTables& tb = *s.tables;
  const GridWindow& w = s.window;
  const int m = w.resolution;
  const int n = w.dim;
  const double h = w.spacing();
  double worst = -INFINITY;

  auto stencil_active = [&](int i, int j) {
    for (int di = -1; di <= 1; ++di)
      for (int dj = (n == 2 ? -1 : 0); dj <= (n == 2 ? 1 : 0); ++dj)
        if (!tb.active[n == 1 ? i + di : (i + di) * m + (j + dj)]) return false;
    return true;
  };

  for (int i = 1; i + 1 < m; ++i) {
    for (int j = (n == 2 ? 1 : 0); j < (n == 2 ? m - 1 : 1); ++j) {
      const int idx = n == 1 ? i : i * m + j;
      if (!tb.active[idx] || !stencil_active(i, j)) continue;
      double du[2] = {0, 0};
      if (n == 1) {
        du[0] = tb.ref_grad[idx] +
                (double)((s.phi[idx + 1] - s.phi[idx - 1]) / (Quad)(2 * h));
      } else {
        du[0] = tb.ref_grad[2 * idx] +
                (double)((s.phi[idx + m] - s.phi[idx - m]) / (Quad)(2 * h));
        du[1] = tb.ref_grad[2 * idx + 1] +
                (double)((s.phi[idx + 1] - s.phi[idx - 1]) / (Quad)(2 * h));
      }
      for (const auto& nr : polytope_.facets) {
        double l = 0;
        for (int d = 0; d < n; ++d) l += nr[d] * du[d];
        worst = std::max(worst, -1.0 - l);
      }
    }
  }
  return worst;
}

double ContinuitySolver::transformed_equation_residual(
    const SolutionState& s) const {
  const WindowTables& tb = *s.tables;
  const GridWindow& w = s.window;
  const int m = w.resolution;
  const int n = w.dim;
  const double h = w.spacing();
  const Stencil st{s.phi, m, (Quad)1.0 / ((Quad)h * (Quad)h), n};
  const Quad tq = s.t;
  double worst = 0;
  for (int i = 1; i + 1 < m; ++i) {
    for (int j = (n == 2 ? 1 : 0); j < (n == 2 ? m - 1 : 1); ++j) {
      const int idx = n == 1 ? i : i * m + j;
      if (tb.active[idx] != 2) continue;
      const Quad det = n == 1 ? tb.ref_hess[idx] + st.dxx(i, 0)
                              : node_det2(tb, st, i, j);
      const double fs = tb.det_floor[idx];
      const Quad root = sqrtq(det * det + (Quad)fs * (Quad)fs);
      const Quad dsm = (det + root) / 2;
      if (!(dsm > 0)) continue;
      const Quad big_u = tb.ref_val[idx] + s.phi[idx];
      const Quad g = logq(dsm) + tq * big_u +
                     ((Quad)1 - tq) * tb.ref_val[idx] + s.kappa;
      worst = std::max(worst, std::abs((double)g));
    }
  }
  return worst;
}

double ContinuitySolver::window_mass(const SolutionState& s) const {
  const WindowTables& tb = *s.tables;
  const GridWindow& w = s.window;
  const int m = w.resolution;
  const int n = w.dim;
  const auto sw = simpson_weights(m, w.spacing());
  double mass = 0;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < (n == 2 ? m : 1); ++j) {
      const int idx = n == 1 ? i : i * m + j;
      if (!tb.active[idx]) continue;
      const double wv = s.w_at(idx);
      if (wv > 700) continue;
      mass += (n == 1 ? sw[i] : sw[i] * sw[j]) * std::exp(-wv);
    }
  }
  return mass;
}

// Debug hook: finite-difference check of the Jacobian row structure used by
// newton_solve, on a given state. Returns worst absolute mismatch.
double debug_jacobian_check(const ContinuitySolver& solver, const GridWindow& win,
                            double t, unsigned seed);

double debug_jacobian_check(const ContinuitySolver& solver, const GridWindow& win,
                            double t, unsigned seed) {
  auto tables = solver.build_tables(win);
  const WindowTables& tb = *tables;
  const int m = win.resolution;
  const int n = win.dim;
  const int nn = win.num_nodes();
  const double h = win.spacing();
  std::vector<Quad> phi(nn);
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  // fattened init plus a small smooth bump: convex, healthy determinants
  const LogSumExp& lse = solver.reference().lse();
  Quad cq[2] = {0, 0}, half_c[2] = {0, 0};
  for (int d = 0; d < n; ++d) {
    cq[d] = (Quad)win.center[d];
    half_c[d] = cq[d] / 2;
  }
  const Quad v_half_c = lse.value_q(half_c);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < (n == 2 ? m : 1); ++j) {
      const int idx = n == 1 ? i : i * m + j;
      const double x = win.rel(i), y = n == 2 ? win.rel(j) : 0;
      Quad xh[2] = {(cq[0] + (Quad)x) / 2, 0};
      if (n == 2) xh[1] = (cq[1] + (Quad)y) / 2;
      phi[idx] = 2 * (lse.value_q(xh) - v_half_c) - tb.ref_val[idx] +
                 (Quad)(0.01 * std::sin(0.8 * x) * std::cos(0.5 * y));
    }
  Quad kappa = 0.2;
  Eigen::VectorXd g0;
  double worstnorm;
  std::vector<double> hess(static_cast<std::size_t>(5) * nn, 0.0);
  if (!eval_grid(tb, t, phi, kappa, nullptr, &g0, &worstnorm, &hess)) return -1;

  // Build the unscaled Jacobian action on random direction v, compare with FD.
  std::vector<double> v(nn + 1);
  for (auto& x : v) x = u(rng);
  // analytic: PDE rows via the shared emitter; extension rows linear.
  const double inv_h2 = 1.0 / (h * h);
  std::vector<double> jv(nn + 1, 0.0);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < (n == 2 ? m : 1); ++j) {
      const int idx = n == 1 ? i : i * m + j;
      if (tb.active[idx] != 2) {
        int a, b;
        extension_links(idx, m, n, &a, &b);
        jv[idx] = v[idx] - 1.5 * v[a] + 0.5 * v[b];
        continue;
      }
      NodeOp op{hess[5 * idx], hess[5 * idx + 1], hess[5 * idx + 2],
                hess[5 * idx + 3], hess[5 * idx + 4]};
      double acc = t * v[idx] + v[nn];
      emit_pde_row(idx, m, n, op, inv_h2,
                   [&](int col, double c) { acc += c * v[col]; });
      jv[idx] = acc;
    }
  }
  const int center_idx = n == 1 ? m / 2 : (m / 2) * m + m / 2;
  jv[nn] = v[center_idx];

  // FD: (G(phi + eps v) - G(phi - eps v)) / (2 eps)
  const double eps = 1e-6;
  std::vector<Quad> pp(nn), pm(nn);
  for (int k = 0; k < nn; ++k) {
    pp[k] = phi[k] + (Quad)(eps * v[k]);
    pm[k] = phi[k] - (Quad)(eps * v[k]);
  }
  Eigen::VectorXd gp, gm;
  double dnorm;
  eval_grid(tb, t, pp, kappa + (Quad)(eps * v[nn]), nullptr, &gp, &dnorm, nullptr);
  eval_grid(tb, t, pm, kappa - (Quad)(eps * v[nn]), nullptr, &gm, &dnorm, nullptr);
  double worst = 0;
  int wat = -1;
  for (int k = 0; k <= nn; ++k) {
    const double fd = (gp[k] - gm[k]) / (2 * eps);
    if (std::abs(fd - jv[k]) > worst) {
      worst = std::abs(fd - jv[k]);
      wat = k;
    }
  }
  std::cerr << "[jac-check] worst=" << worst << " at row " << wat
            << " (i=" << (wat < nn ? (n == 1 ? wat : wat / m) : -1)
            << ",j=" << (wat < nn ? (n == 1 ? 0 : wat % m) : -1)
            << " active=" << (wat < nn ? int(tb.active[wat]) : -1) << ")\n";
  return worst;
}

}  // namespace toric
