#include "toric/path.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "toric/errors.hpp"

namespace toric {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<int> face_exponent_indices(const ContinuitySolver& solver) {
  std::vector<int> ids;
  const auto& inv = solver.invariants();
  if (!inv.minimal_face) return ids;
  const auto& fv = inv.minimal_face->face_vertices;
  const auto& pts = solver.reference().exponents();
  for (int a = 0; a < static_cast<int>(pts.size()); ++a)
    if (std::find(fv.begin(), fv.end(), pts[a]) != fv.end()) ids.push_back(a);
  return ids;
}

}  // namespace

std::vector<double> geometric_schedule(double r, double t0, double t_max,
                                       int max_points) {
  if (!(t0 >= 0) || !(t_max < r) || t0 > t_max)
    throw ValidationError("schedule bounds must satisfy 0 <= t0 <= t_max < R");
  std::vector<double> ts;
  for (int k = 0; k < max_points; ++k) {
    const double t = r * (1.0 - std::exp2(-k) * (1.0 - t0 / r));
    if (t >= t_max - 1e-12) break;
    ts.push_back(t);
  }
  ts.push_back(t_max);
  return ts;
}

PathRecord continuity_path(const ContinuitySolver& solver,
                           const std::vector<double>& schedule,
                           const PathOptions& opts) {
  if (schedule.empty()) throw ValidationError("empty schedule");
  for (std::size_t k = 0; k + 1 < schedule.size(); ++k)
    if (!(schedule[k] < schedule[k + 1]))
      throw ValidationError("schedule must be strictly increasing");
  if (!(schedule.back() < solver.r_bound()))
    throw ValidationError("schedule exceeds R(X) = " +
                          to_string(solver.invariants().r));

  PathRecord rec;
  rec.face_exponents = face_exponent_indices(solver);

  const int dim = solver.polytope().dim;
  Vec center = opts.initial_center ? *opts.initial_center
                                   : solver.reference_minimizer();
  GridWindow window = make_window(center, opts.half_width, opts.resolution, dim);
  std::vector<__float128> phi;
  std::optional<__float128> kappa;
  std::optional<SolutionState> last_state;  // recenter source for retries

  for (double t : schedule) {
    int recenters = 0;
    SolutionState state;
    for (int attempt = 0;; ++attempt) {
      try {
        state = solver.solve_t(t, window, phi, kappa);
      } catch (const MinimizerAtBoundary& e) {
        if (attempt >= 3) throw;
        Vec loc = Eigen::Map<const Vec>(e.location.data(), dim);
        if (last_state) {
          auto rc = solver.recenter(*last_state, loc);
          window = rc.window;
          phi = rc.phi;
          kappa = rc.kappa;
        } else {
          window = make_window(loc, opts.half_width, opts.resolution, dim);
          phi.clear();
          kappa.reset();
        }
        ++recenters;
        continue;
      }
      const double drift = (state.x_t - window.center).lpNorm<Eigen::Infinity>();
      if (drift > solver.options().recenter_fraction * window.half_width &&
          attempt < 3) {
        auto rc = solver.recenter(state);
        window = rc.window;
        phi = rc.phi;
        kappa = rc.kappa;
        ++recenters;
        last_state = std::move(state);
        continue;
      }
      break;
    }

    PathEntry e;
    e.state = std::move(state);
    const SolutionState& s = e.state;
    auto key = solver.key_identity(s);
    e.key_residual = key.residual;
    e.key_tail = key.tail_bound;
    auto en = solver.energy_functionals(s);
    e.i_energy = en.i;
    e.j_energy = en.j;
    if (s.t > 0) {
      auto sups = solver.psi_sups(s);
      e.sup_psi = sups.first;
      e.sup_neg_psi = sups.second;
      e.harnack = s.t * (e.sup_neg_psi - dim * e.sup_psi);
    } else {
      e.sup_psi = e.sup_neg_psi = e.harnack = kNaN;
    }
    e.kappa_fit = solver.wang_zhu_diagnostics(s).kappa_fit;
    if (!rec.face_exponents.empty()) {
      double off = 0;
      for (int a = 0; a < static_cast<int>(s.b.size()); ++a)
        if (std::find(rec.face_exponents.begin(), rec.face_exponents.end(), a) ==
            rec.face_exponents.end())
          off += s.b[a];
      e.off_face_mass = off;
      const Vec g = solver.reference().gradient(s.x_t);
      double gap = INFINITY;
      for (int r : solver.invariants().minimal_face->active_facets) {
        double l = 1.0;
        for (int d = 0; d < dim; ++d)
          l += double(solver.polytope().facets[r][d]) * g[d];
        gap = std::min(gap, l);
      }
      e.face_gap = gap;
    } else {
      e.off_face_mass = e.face_gap = kNaN;
    }
    e.recenter_count = recenters;
    e.newton_iterations = s.newton_iterations;

    rec.entries.push_back(std::move(e));
    const SolutionState& accepted = rec.entries.back().state;
    window = accepted.window;
    phi = accepted.phi;
    kappa = accepted.kappa;
    last_state = accepted;
  }

  rec.c_estimate = rec.entries.back().state.m_t;

  // Limit weights: raw final-t weights normalized over the face vertices,
  // plus a two-point Richardson extrapolation in (R - t) as the secondary
  // estimate (only subsequential limits are guaranteed, so neither asserts
  // uniqueness).
  if (!rec.face_exponents.empty()) {
    const auto& en = rec.entries;
    const auto& b_last = en.back().state.b;
    double sum = 0;
    for (int a : rec.face_exponents) sum += b_last[a];
    for (int a : rec.face_exponents) rec.b_limit.push_back(b_last[a] / sum);

    if (en.size() >= 2) {
      const double r = solver.r_bound();
      const auto& b_prev = en[en.size() - 2].state.b;
      const double e1 = r - en.back().state.t;
      const double e2 = r - en[en.size() - 2].state.t;
      std::vector<double> ext;
      double esum = 0;
      for (int a : rec.face_exponents) {
        const double v = (b_last[a] * e2 - b_prev[a] * e1) / (e2 - e1);
        ext.push_back(v);
        esum += v;
      }
      for (double& v : ext) v /= esum;
      rec.b_limit_richardson = std::move(ext);
    }
  }
  return rec;
}

}  // namespace toric
