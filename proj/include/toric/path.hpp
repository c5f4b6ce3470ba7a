#pragma once

#include <optional>
#include <vector>

#include "toric/solver.hpp"

namespace toric {

// One accepted state on the continuity path plus its diagnostics row.
struct PathEntry {
  SolutionState state;
  double key_residual = 0;
  double key_tail = 0;
  double i_energy = 0;
  double j_energy = 0;
  double harnack = 0;       // NaN at t = 0
  double sup_psi = 0;       // NaN at t = 0 (psi gauge needs t > 0)
  double sup_neg_psi = 0;
  double kappa_fit = 0;
  double off_face_mass = 0; // NaN when R = 1 (no minimal face)
  double face_gap = 0;      // min over F-active facets of lambda_r(Du0(x_t)) + 1
  int recenter_count = 0;
  int newton_iterations = 0;
};

struct PathRecord {
  std::vector<PathEntry> entries;
  std::vector<int> face_exponents;         // alpha with p_alpha a vertex of F
  std::vector<double> b_limit;             // final-t weights normalized over F
  std::vector<double> b_limit_richardson;  // two-point extrapolation in (R - t)
  double c_estimate = 0;                   // last m_t
};

struct PathOptions {
  double half_width = 16;
  int resolution = 129;
  std::optional<Vec> initial_center;  // default: the reference minimizer
};

// Geometric approach to R: t_k = r (1 - 2^{-k} (1 - t0/r)), truncated and
// capped at t_max.
std::vector<double> geometric_schedule(double r, double t0, double t_max,
                                       int max_points = 24);

// Warm-started march over the schedule with automatic recentering when
// |x_t - center|_inf exceeds a quarter of the half-width. Solver errors
// propagate with the failing t in the message.
PathRecord continuity_path(const ContinuitySolver& solver,
                           const std::vector<double>& schedule,
                           const PathOptions& opts = {});

}  // namespace toric
