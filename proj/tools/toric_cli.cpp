#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>

#include "toric/divisor.hpp"
#include "toric/errors.hpp"
#include "toric/fixtures.hpp"
#include "toric/io.hpp"
#include "toric/path.hpp"
#include "toric/solver.hpp"

namespace fs = std::filesystem;
using namespace toric;

namespace {

constexpr int kExitUsage = 64;
constexpr int kExitValidation = 65;
constexpr int kExitPartialPath = 2;

bool verbose_env() {
  const char* v = std::getenv("TORIC_VERBOSE");
  return v && std::string(v) != "0";
}

std::string ratvec_str(const RatVec& v) {
  std::string s = to_string(v) + " ~= (";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", to_double(v[i]));
    s += buf;
  }
  return s + ")";
}

void print_analysis(const LatticePolytope& p) {
  std::cout << "polytope '" << (p.name.empty() ? "<unnamed>" : p.name)
            << "': dim " << p.dim << ", " << p.num_vertices() << " vertices, "
            << p.num_facets() << " facets\n";
  std::cout << "volume       = " << to_string(volume(p)) << " ~= "
            << to_double(volume(p)) << "\n";
  const FanoInvariants inv = compute_R(p);
  std::cout << "P_c          = " << ratvec_str(inv.barycenter) << "\n";
  std::cout << "R(X)         = " << to_string(inv.r) << " ~= "
            << std::setprecision(15) << to_double(inv.r) << "\n";
  if (inv.ke_exists) {
    std::cout << "KE exists    : yes (barycenter at the origin)\n";
    return;
  }
  std::cout << "Q            = " << ratvec_str(*inv.q) << "\n";
  std::cout << "minimal face : dim " << inv.minimal_face->dim << ", vertices {";
  bool first = true;
  for (const auto& v : inv.minimal_face->face_vertices) {
    if (!first) std::cout << ", ";
    first = false;
    std::cout << "(";
    for (std::size_t d = 0; d < v.size(); ++d)
      std::cout << (d ? "," : "") << v[d];
    std::cout << ")";
  }
  std::cout << "}, active facets {";
  first = true;
  for (int r : inv.minimal_face->active_facets) {
    if (!first) std::cout << ", ";
    first = false;
    std::cout << "(";
    for (std::size_t d = 0; d < p.facets[r].size(); ++d)
      std::cout << (d ? "," : "") << p.facets[r][d];
    std::cout << ")";
  }
  std::cout << "}\n";
  const auto rep = conic_angle_report(p);
  for (const auto& [facet, comp] : rep.fixed_components) {
    std::cout << "facet (";
    for (std::size_t d = 0; d < p.facets[facet].size(); ++d)
      std::cout << (d ? "," : "") << p.facets[facet][d];
    std::cout << "): a = " << comp.a << ", angle = 2*pi * "
              << to_string(comp.angle_fraction) << " ~= " << comp.angle_radians
              << " rad\n";
  }
  for (const auto& wmsg : rep.warnings) std::cout << "warning: " << wmsg << "\n";
}

void print_angles(const LatticePolytope& p) {
  const auto rep = conic_angle_report(p);
  std::cout << "R(X) = " << to_string(rep.r) << "\n";
  std::cout << "fixed components (facet normal, a_i, exponent 2*a_i*(1-R), "
               "angle fraction, angle rad):\n";
  for (const auto& [facet, comp] : rep.fixed_components) {
    std::cout << "  (";
    for (std::size_t d = 0; d < p.facets[facet].size(); ++d)
      std::cout << (d ? "," : "") << p.facets[facet][d];
    std::cout << ")  a=" << comp.a << "  exp=" << to_string(comp.exponent)
              << "  fraction=" << to_string(comp.angle_fraction)
              << "  angle=" << comp.angle_radians << "\n";
  }
  std::cout << "face-vertex section divisors (point: coefficients per facet):\n";
  for (const auto& [pt, div] : rep.face_section_divisors) {
    std::cout << "  (";
    for (std::size_t d = 0; d < pt.size(); ++d)
      std::cout << (d ? "," : "") << pt[d];
    std::cout << "):";
    for (Int c : div.coefficients) std::cout << " " << c;
    std::cout << "\n";
  }
  for (const auto& wmsg : rep.warnings) std::cout << "warning: " << wmsg << "\n";
}

int check_potential(const LatticePolytope& p, unsigned seed, int samples) {
  ReferencePotential ref(p);
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> unif(-8.0, 8.0);
  const int n = p.dim;
  const int npts = ref.num_points();
  bool all_ok = true;
  auto report = [&](const std::string& name, bool ok, double worst) {
    std::cout << (ok ? "PASS" : "FAIL") << "  " << std::left << std::setw(34)
              << name << " worst " << std::setprecision(3) << worst << "\n";
    all_ok &= ok;
  };

  double worst_sum = 0, worst_grad = 0, worst_fd = 0, worst_eig = INFINITY,
         worst_bound = 0, worst_mid = 0;
  for (int s = 0; s < samples; ++s) {
    Vec x(n), y(n);
    for (int d = 0; d < n; ++d) x[d] = unif(rng), y[d] = unif(rng);
    const auto b = ref.softmax(x);
    double sum = 0;
    for (double w : b) sum += w;
    worst_sum = std::max(worst_sum, std::abs(sum - 1.0));

    Vec g = ref.gradient(x);
    Vec gb = Vec::Zero(n);
    for (int a = 0; a < npts; ++a)
      for (int d = 0; d < n; ++d) gb[d] += b[a] * ref.exponents()[a][d];
    worst_grad = std::max(worst_grad, (g - gb).lpNorm<Eigen::Infinity>());

    for (int d = 0; d < n; ++d) {
      Vec xp = x, xm = x;
      xp[d] += 1e-5;
      xm[d] -= 1e-5;
      const double fd = (ref.value(xp) - ref.value(xm)) / 2e-5;
      worst_fd = std::max(worst_fd, std::abs(fd - g[d]));
    }

    Eigen::SelfAdjointEigenSolver<Mat> eig(ref.hessian(x));
    worst_eig = std::min(worst_eig, eig.eigenvalues().minCoeff());

    const double gap = ref.value(x) - ref.normalization() - ref.vbar(x);
    worst_bound = std::max(worst_bound, std::max(-gap, gap - std::log(double(npts))));

    const double mid = ref.value((x + y) / 2) - 0.5 * (ref.value(x) + ref.value(y));
    worst_mid = std::max(worst_mid, mid);
  }
  report("softmax weights sum to 1", worst_sum <= 1e-14, worst_sum);
  report("gradient equals softmax average", worst_grad <= 1e-12, worst_grad);
  report("gradient matches finite differences", worst_fd <= 1e-8, worst_fd);
  report("hessian positive definite", worst_eig > 0, worst_eig);
  report("0 <= u0 - C - vbar <= log N", worst_bound <= 1e-12, worst_bound);
  report("midpoint convexity", worst_mid <= 1e-12, worst_mid);

  if (p.dim <= 2) {
    // Normalization round-trip: int e^{-u0} recomputed on a fresh box.
    auto norm = normalization_constant(p, 1e-8, 1e-10);
    const double resid = std::abs(norm.c - ref.normalization());
    report("normalization reproducible", resid <= 1e-7, resid);
  }
  std::cout << "seed " << seed << ", " << samples << " samples\n";
  return all_ok ? 0 : kExitValidation;
}

int run_solve(const LatticePolytope& p, double t_max, double t0, int grid,
              double half_width, std::string out_dir) {
  ContinuitySolver solver(p, SolverOptions{.verbose = verbose_env()});
  const double r = solver.r_bound();
  if (t_max < 0) t_max = r - 0.02;  // default cap
  if (!(t_max < r)) {
    std::cerr << "error: --t-max must be below R(X) = " << r << "\n";
    return kExitUsage;
  }
  const auto schedule = geometric_schedule(r, t0, t_max);
  PathOptions opts;
  opts.resolution = grid;
  opts.half_width = half_width;

  if (!out_dir.empty()) fs::create_directories(out_dir);

  PathRecord rec;
  int code = 0;
  try {
    rec = continuity_path(solver, schedule, opts);
  } catch (const NumericalError& e) {
    std::cerr << "partial path: " << e.what() << "\n";
    code = kExitPartialPath;
  }

  std::cout << "t,m_t,|x_t|,key_residual,I,J,kappa\n" << std::setprecision(10);
  for (const auto& e : rec.entries)
    std::cout << e.state.t << "," << e.state.m_t << "," << e.state.x_t.norm()
              << "," << e.key_residual << "," << e.i_energy << ","
              << e.j_energy << "," << e.kappa_fit << "\n";
  if (!rec.entries.empty()) {
    std::cout << "last good t = " << rec.entries.back().state.t
              << ", c estimate (last m_t) = " << rec.c_estimate << "\n";
    if (!rec.b_limit.empty()) {
      std::cout << "b limit over face vertices:";
      for (double b : rec.b_limit) std::cout << " " << b;
      std::cout << "\n";
    }
  }

  if (!out_dir.empty() && !rec.entries.empty()) {
    write_path_csv((fs::path(out_dir) / "path.csv").string(), solver, rec);
    write_invariants_csv((fs::path(out_dir) / "invariants.csv").string(), p);
    write_grid_dump((fs::path(out_dir) / "phi_final").string(),
                    rec.entries.back().state);
    std::cout << "wrote " << out_dir << "/{path.csv, invariants.csv, phi_final.hdr, phi_final.bin}\n";
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"toric: exact invariants and continuity-path solves for "
               "reflexive lattice polytopes"};
  app.require_subcommand(1);

  std::string input;
  std::string out_dir;
  unsigned seed = 12345;
  int samples = 100;
  double t_max = -1, t0 = 0, half_width = 16;
  int grid = 129;
  std::string dump_dir;

  auto* analyze = app.add_subcommand("analyze", "exact Fano invariants");
  analyze->add_option("input", input, "polytope file or built-in name")->required();
  analyze->add_option("--out", out_dir, "directory for invariants.csv");

  auto* angles = app.add_subcommand("angles", "base locus and conic angle report");
  angles->add_option("input", input)->required();

  auto* checkp = app.add_subcommand("check-potential",
                                    "reference potential invariant suite");
  checkp->add_option("input", input)->required();
  checkp->add_option("--seed", seed, "RNG seed (default 12345)");
  checkp->add_option("--samples", samples, "sample count (default 100)")
      ->check(CLI::PositiveNumber);

  auto* solve = app.add_subcommand("solve", "march the continuity family");
  solve->add_option("input", input)->required();
  solve->add_option("--t-max", t_max, "last t (default R - 0.02)");
  solve->add_option("--t0", t0, "first t (default 0)");
  solve->add_option("--grid", grid, "nodes per axis, odd >= 33 (default 129)");
  solve->add_option("--halfwidth", half_width, "window half-width (default 16)");
  solve->add_option("--out", out_dir, "output directory for CSV + grid dump");

  auto* fixtures = app.add_subcommand("fixtures", "run the built-in registry");
  fixtures->add_option("--dump", dump_dir, "write fixture documents to a directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (app.got_subcommand(fixtures)) {
      if (!dump_dir.empty()) {
        fs::create_directories(dump_dir);
        for (const auto& [name, text] : fixture_documents()) {
          std::ofstream out(fs::path(dump_dir) / (name + ".json"));
          out << text;
        }
        std::cout << "wrote " << fixture_documents().size() << " documents to "
                  << dump_dir << "\n";
      }
      bool all = true;
      for (const auto& res : run_fixtures()) {
        std::cout << (res.pass ? "PASS" : "FAIL") << "  " << res.name << "\n";
        for (const auto& f : res.failures) std::cout << "      " << f << "\n";
        all &= res.pass;
      }
      return all ? 0 : kExitValidation;
    }

    const LatticePolytope p = load_polytope(resolve_polytope_document(input));
    if (app.got_subcommand(analyze)) {
      print_analysis(p);
      if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_invariants_csv((fs::path(out_dir) / "invariants.csv").string(), p);
      }
      return 0;
    }
    if (app.got_subcommand(angles)) {
      print_angles(p);
      return 0;
    }
    if (app.got_subcommand(checkp)) return check_potential(p, seed, samples);
    if (app.got_subcommand(solve))
      return run_solve(p, t_max, t0, grid, half_width, out_dir);
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
