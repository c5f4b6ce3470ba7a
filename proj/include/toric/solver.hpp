#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "toric/divisor.hpp"
#include "toric/polytope.hpp"
#include "toric/potential.hpp"

namespace toric {

// Uniform grid on [center - L, center + L]^n. The resolution is odd so the
// center is a grid node; the window center carries the accumulated
// translation of the recentering transform.
struct GridWindow {
  Vec center;
  double half_width = 0;
  int resolution = 0;
  int dim = 0;

  double spacing() const { return 2.0 * half_width / (resolution - 1); }
  int num_nodes() const {
    int n = 1;
    for (int d = 0; d < dim; ++d) n *= resolution;
    return n;
  }
  // Node coordinates relative to the center / absolute.
  double rel(int i) const { return -half_width + i * spacing(); }
  Vec node_abs(int i, int j = 0) const {
    Vec x = center;
    x[0] += rel(i);
    if (dim == 2) x[1] += rel(j);
    return x;
  }
};

GridWindow make_window(Vec center, double half_width, int resolution, int dim);

struct SolverOptions {
  double newton_tol = 1e-9;
  int max_newton_iterations = 50;
  double recenter_fraction = 0.25;  // recenter when |x_t - center|_inf > L/4
  int boundary_margin_cells = 2;    // MinimizerAtBoundary within 2h of the edge
  // PDE rows are imposed on the reference sublevel set
  // {U~ - min U~ <= active_cap}; outside it phi is extended linearly along
  // inward chains. The reference grows like the polytope's support function,
  // so the cut follows the anisotropy of w_t: beyond the cap e^{-w} is below
  // every tolerance while the determinant targets fall below what
  // double-precision Newton steps resolve.
  double active_cap = 19.0;
  bool verbose = false;
};

// Reference-potential tables over a window. Values and Hessians are kept in
// quad precision: far-field curvature of the solution sits many orders below
// the potential values, beyond what double second differences resolve.
struct WindowTables {
  GridWindow window;
  std::vector<__float128> ref_val;   // U~_c(y) = u0(c+y) - u0(c), 0 at center
  std::vector<double> ref_grad;      // D u0(c+y), dim entries per node
  std::vector<__float128> ref_hess;  // axis-frame D^2_h u0, dim*dim per node
  std::vector<__float128> ref_hess_rot;  // diagonal-frame second differences
                                         // [D^2_{(1,1)}, D^2_{(1,-1)}] per node (2-D)
  std::vector<unsigned char> active; // 2: PDE row; 1: covered ring; 0: buffer
  std::vector<double> det_floor;     // smoothing scale of the det surrogate
  double ref_floor = 0;              // min of ref_val over the window
};

// One converged solve of the continuity equation at parameter t.
//
// phi is the relative potential U - U~ in the window gauge U(0) = 0 (so
// phi(center) = 0); kappa is the additive constant of the transformed
// equation and converges to w_t(center). The absolute relative potential
// u - u0 equals phi + (kappa - u0(center))/t for t > 0.
struct SolutionState {
  double t = 0;
  GridWindow window;
  std::vector<__float128> phi;
  __float128 kappa = 0;

  Vec x_t;        // continuum-refined minimizer of w_t (absolute coordinates)
  double m_t = 0; // w_t(x_t)
  SoftmaxWeights b;  // softmax weights b(p_alpha, t) at x_t
  double residual_norm = 0;
  int newton_iterations = 0;

  std::shared_ptr<const WindowTables> tables;

  std::vector<double> phi_double() const {
    return {phi.begin(), phi.end()};
  }
  // w_t at node idx (quad bookkeeping, cast to double).
  double w_at(int idx) const {
    return static_cast<double>(tables->ref_val[idx] + (__float128)t * phi[idx] + kappa);
  }
};

struct WangZhuDiagnostics {
  double m_t = 0;
  double kappa_fit = 0;   // min over boundary nodes of (w - m_t)/|x - x_t|
  double offset_fit = 0;  // additive constant: w >= kappa_fit |x - x_t| + offset_fit
  Vec achieving_node;     // boundary node realizing the minimum
};

struct EnergyFunctionals {
  double i = 0;
  double j = 0;
};

struct KeyIdentityResult {
  double residual = 0;   // |window integral / Vol + t/(1-t) P_c| + tail bound
  double tail_bound = 0; // certified directional tail
  Vec window_integral;   // (1/Vol) int_W D u0 e^{-w}
};

struct RecenterResult {
  GridWindow window;
  std::vector<__float128> phi;
  __float128 kappa = 0;
};

// Sample of the active-region frontier along a ray from x_t.
struct FrontierSample {
  double radius = 0;   // |sample - x_t|
  double w_value = 0;  // w_t at the sample (interpolated)
  double dtheta = 0;   // subtended angle step of the ray sweep
  Vec position;
};

// Solver for the continuity family of real Monge-Ampere equations
//   det(D^2 u) = e^{-(1-t) u0 - t u},   u = u0 + phi_abs,
// discretized on a recentering grid window by damped Newton iteration on
//   G(phi) = log det(D^2 U~ + D^2 phi) + U~ + t phi + kappa = 0
// with a zero-normal-derivative condition for phi on the window boundary,
// the gauge phi(center) = 0 and the constant kappa as the matching unknown
// (this bordered form stays nonsingular down to t = 0, where the pure
// Neumann problem alone would be rank deficient).
class ContinuitySolver {
 public:
  explicit ContinuitySolver(LatticePolytope polytope, SolverOptions opts = {});

  const LatticePolytope& polytope() const { return polytope_; }
  const ReferencePotential& reference() const { return ref_; }
  const FanoInvariants& invariants() const { return invariants_; }
  const SolverOptions& options() const { return opts_; }
  double r_bound() const { return to_double(invariants_.r); }

  // Minimizer of the reference potential (natural initial window center).
  Vec reference_minimizer() const;

  std::shared_ptr<const WindowTables> build_tables(const GridWindow& w) const;

  // Rewrites the node classification of `tables` for a sublevel cap.
  void apply_cap(WindowTables& tables, double cap_value) const;

  // Solves at parameter t. init_phi empty means the zero initial guess.
  // Throws NotConverged / ConvexityLost / MinimizerAtBoundary.
  SolutionState solve_t(double t, const GridWindow& window,
                        const std::vector<__float128>& init_phi = {},
                        std::optional<__float128> init_kappa = {}) const;

  // Translates the window to `new_center` (default: the state's x_t),
  // re-expressing phi against the translated reference with the value shift
  // that restores the U(0) = 0 gauge.
  RecenterResult recenter(const SolutionState& s,
                          std::optional<Vec> new_center = {}) const;

  KeyIdentityResult key_identity(const SolutionState& s) const;
  double key_identity_residual(const SolutionState& s) const {
    return key_identity(s).residual;
  }

  WangZhuDiagnostics wang_zhu_diagnostics(const SolutionState& s) const;

  // Toric I/J energies: I = (1/Vol) int phi (det D^2 u0 - det D^2 u) dx,
  // J = int_0^1 I(s phi)/s ds (16-point Gauss-Legendre in s).
  EnergyFunctionals energy_functionals(const SolutionState& s) const;

  // H_t = t (sup(-psi) - n sup psi) with psi = U - u0 in the transformed
  // gauge; requires t > 0.
  double harnack_diagnostic(const SolutionState& s) const;

  // sup psi and sup(-psi) over the window (transformed gauge).
  std::pair<double, double> psi_sups(const SolutionState& s) const;

  // Worst violation of the facet inequalities by the discrete gradient of u
  // over interior nodes: max over nodes, facets of (-1 - lambda_r(Du)).
  // Nonpositive means the discrete gradient image lies in the polytope.
  double gradient_image_violation(const SolutionState& s) const;

  // Residual of the transformed-equation form det(D^2 U) =
  // e^{-tU - (1-t)U~ - kappa} evaluated from (U, U~, kappa) directly;
  // agreement with the solve residual checks the transform bookkeeping.
  double transformed_equation_residual(const SolutionState& s) const;

  // Mass int_W e^{-w_t} dx (approaches Vol as the window grows).
  double window_mass(const SolutionState& s) const;

  // Certified bound for the e^{-w_t} mass outside the active region, from
  // per-sector growth fits (cone decomposition around x_t along frontier
  // rays). Throws TailNotCertified when a sector fit is nonpositive.
  double boundary_tail_mass(const SolutionState& s) const;

  // Frontier-ray samples used by the tail certificate and the growth fit.
  std::vector<FrontierSample> frontier_samples(const SolutionState& s,
                                               int rays) const;

 private:
  LatticePolytope polytope_;
  SolverOptions opts_;
  ReferencePotential ref_;
  FanoInvariants invariants_;
  double vol_ = 0;
  double max_point_norm_ = 0;  // max |p_alpha|, bounds |D u0| and |Dw|
};

}  // namespace toric
