#include "toric/io.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "toric/divisor.hpp"
#include "toric/errors.hpp"

namespace toric {

using nlohmann::json;

LatticePolytope load_polytope(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("polytope document is not valid JSON: ") +
                          e.what());
  }
  try {
    const int dim = j.at("dim").get<int>();
    std::vector<IntVec> vertices, facets;
    for (const auto& v : j.at("vertices")) vertices.push_back(v.get<IntVec>());
    if (j.contains("facets"))
      for (const auto& f : j.at("facets")) facets.push_back(f.get<IntVec>());
    return make_polytope(dim, std::move(vertices), std::move(facets),
                         j.value("name", std::string{}));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed polytope document: ") + e.what());
  }
}

LatticePolytope load_polytope_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_polytope(ss.str());
}

std::string polytope_to_json(const LatticePolytope& p) {
  json j;
  if (!p.name.empty()) j["name"] = p.name;
  j["dim"] = p.dim;
  j["vertices"] = p.vertices;
  j["facets"] = p.facets;
  return j.dump(2) + "\n";
}

void write_path_csv(const std::string& path, const ContinuitySolver& solver,
                    const PathRecord& rec) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  const int n = solver.polytope().dim;
  const int nb = solver.reference().num_points();
  out << "t";
  for (int d = 0; d < n; ++d) out << ",xt_" << d + 1;
  out << ",m_t";
  for (int a = 0; a < nb; ++a) out << ",b_" << a + 1;
  out << ",residual,key_residual,key_tail,I,J,H_t,kappa,off_face_mass,"
         "face_gap,sup_psi,sup_neg_psi,recenters,newton_iters\n";
  out << std::setprecision(17);
  for (const auto& e : rec.entries) {
    const auto& s = e.state;
    out << s.t;
    for (int d = 0; d < n; ++d) out << "," << s.x_t[d];
    out << "," << s.m_t;
    for (int a = 0; a < nb; ++a) out << "," << s.b[a];
    out << "," << s.residual_norm << "," << e.key_residual << "," << e.key_tail
        << "," << e.i_energy << "," << e.j_energy << "," << e.harnack << ","
        << e.kappa_fit << "," << e.off_face_mass << "," << e.face_gap << ","
        << e.sup_psi << "," << e.sup_neg_psi << "," << e.recenter_count << ","
        << e.newton_iterations << "\n";
  }
}

void write_invariants_csv(const std::string& path, const LatticePolytope& p) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << "quantity,exact,decimal\n" << std::setprecision(17);
  auto row = [&](const std::string& k, const Rational& v) {
    out << k << "," << to_string(v) << "," << to_double(v) << "\n";
  };
  row("volume", volume(p));
  const FanoInvariants inv = compute_R(p);
  row("R", inv.r);
  for (int d = 0; d < p.dim; ++d)
    row("pc_" + std::to_string(d + 1), inv.barycenter[d]);
  out << "ke_exists," << (inv.ke_exists ? "true" : "false") << ","
      << (inv.ke_exists ? 1 : 0) << "\n";
  if (inv.q)
    for (int d = 0; d < p.dim; ++d)
      row("q_" + std::to_string(d + 1), (*inv.q)[d]);
  if (inv.minimal_face) {
    out << "face_dim," << inv.minimal_face->dim << "," << inv.minimal_face->dim
        << "\n";
    const auto rep = conic_angle_report(p);
    for (const auto& [facet, comp] : rep.fixed_components) {
      row("a_facet_" + std::to_string(facet + 1), Rational(comp.a));
      row("angle_fraction_facet_" + std::to_string(facet + 1),
          comp.angle_fraction);
    }
  }
}

void write_grid_dump(const std::string& stem, const SolutionState& s) {
  const auto phi = s.phi_double();
  {
    std::ofstream hdr(stem + ".hdr");
    if (!hdr) throw Error("cannot write '" + stem + ".hdr'");
    hdr << std::setprecision(17);
    hdr << "toric-grid-dump v1\n";
    hdr << "dim " << s.window.dim << "\n";
    hdr << "resolution " << s.window.resolution << "\n";
    hdr << "half_width " << s.window.half_width << "\n";
    hdr << "center";
    for (int d = 0; d < s.window.dim; ++d) hdr << " " << s.window.center[d];
    hdr << "\n";
    hdr << "t " << s.t << "\n";
    hdr << "kappa " << (double)s.kappa << "\n";
    hdr << "m_t " << s.m_t << "\n";
    hdr << "x_t";
    for (int d = 0; d < s.window.dim; ++d) hdr << " " << s.x_t[d];
    hdr << "\n";
    hdr << "data phi float64 little-endian row-major count " << phi.size()
        << "\n";
  }
  std::ofstream bin(stem + ".bin", std::ios::binary);
  if (!bin) throw Error("cannot write '" + stem + ".bin'");
  bin.write(reinterpret_cast<const char*>(phi.data()),
            static_cast<std::streamsize>(phi.size() * sizeof(double)));
}

}  // namespace toric
