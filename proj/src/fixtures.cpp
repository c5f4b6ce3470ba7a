#include "toric/fixtures.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>

#include "toric/divisor.hpp"
#include "toric/errors.hpp"
#include "toric/io.hpp"

namespace toric {

using nlohmann::json;

namespace {

// Provenance vocabulary: published-value (stated in the source material),
// closed-form (evaluated from a stated closed form), brute-force-oracle
// (independent enumeration), symmetry (forced by an automorphism).
const char* kP1 = R"json({
  "name": "p1",
  "dim": 1,
  "vertices": [[-1], [1]],
  "expected": {
    "volume":              {"value": "2", "provenance": "closed-form"},
    "r":                   {"value": "1", "provenance": "symmetry"},
    "ke":                  {"value": true, "provenance": "symmetry"},
    "pc":                  {"value": ["0"], "provenance": "symmetry"},
    "lattice_point_count": {"value": 3, "provenance": "brute-force-oracle"}
  }
})json";

const char* kP2 = R"json({
  "name": "p2",
  "dim": 2,
  "vertices": [[-1, -1], [-1, 2], [2, -1]],
  "expected": {
    "volume":              {"value": "9/2", "provenance": "closed-form"},
    "r":                   {"value": "1", "provenance": "symmetry"},
    "ke":                  {"value": true, "provenance": "symmetry"},
    "pc":                  {"value": ["0", "0"], "provenance": "symmetry"},
    "lattice_point_count": {"value": 10, "provenance": "brute-force-oracle"}
  }
})json";

const char* kP3 = R"json({
  "name": "p3",
  "dim": 3,
  "vertices": [[-1, -1, -1], [3, -1, -1], [-1, 3, -1], [-1, -1, 3]],
  "expected": {
    "volume": {"value": "32/3", "provenance": "closed-form"},
    "r":      {"value": "1", "provenance": "symmetry"},
    "ke":     {"value": true, "provenance": "symmetry"},
    "pc":     {"value": ["0", "0", "0"], "provenance": "symmetry"}
  }
})json";

const char* kBlpP2 = R"json({
  "name": "blp_p2",
  "dim": 2,
  "vertices": [[-1, 0], [-1, 2], [0, -1], [2, -1]],
  "expected": {
    "volume":        {"value": "4", "provenance": "published-value"},
    "r":             {"value": "6/7", "provenance": "published-value"},
    "ke":            {"value": false, "provenance": "published-value"},
    "pc":            {"value": ["1/12", "1/12"], "provenance": "closed-form"},
    "q":             {"value": ["-1/2", "-1/2"], "provenance": "published-value"},
    "face_vertices": {"value": [[-1, 0], [0, -1]], "provenance": "published-value"},
    "facets":        {"value": [[-1, -1], [0, 1], [1, 0], [1, 1]], "provenance": "published-value"},
    "base_locus":    {"value": [{"facet": [-1, -1], "a": 2}], "provenance": "published-value"},
    "angle_fractions": {"value": [{"facet": [-1, -1], "fraction": "5/7"}], "provenance": "published-value"},
    "lattice_point_count": {"value": 9, "provenance": "brute-force-oracle"}
  }
})json";

const char* kBlpqP2 = R"json({
  "name": "blpq_p2",
  "dim": 2,
  "vertices": [[0, 1], [1, 0], [1, -1], [-1, -1], [-1, 1]],
  "expected": {
    "volume":        {"value": "7/2", "provenance": "brute-force-oracle"},
    "r":             {"value": "21/25", "provenance": "published-value"},
    "ke":            {"value": false, "provenance": "published-value"},
    "pc":            {"value": ["-2/21", "-2/21"], "provenance": "published-value"},
    "q":             {"value": ["1/2", "1/2"], "provenance": "published-value"},
    "face_vertices": {"value": [[0, 1], [1, 0]], "provenance": "published-value"},
    "facets":        {"value": [[-1, -1], [-1, 0], [0, -1], [0, 1], [1, 0]], "provenance": "brute-force-oracle"},
    "base_locus":    {"value": [{"facet": [0, 1], "a": 1}, {"facet": [1, 0], "a": 1}], "provenance": "published-value"},
    "angle_fractions": {"value": [{"facet": [0, 1], "fraction": "21/25"}, {"facet": [1, 0], "fraction": "21/25"}], "provenance": "published-value"},
    "lattice_point_count": {"value": 8, "provenance": "brute-force-oracle"}
  }
})json";

const char* kBlpP3 = R"json({
  "name": "blp_p3",
  "dim": 3,
  "vertices": [[-1, -1, 3], [-1, 3, -1], [3, -1, -1], [-1, -1, 1], [-1, 1, -1], [1, -1, -1]],
  "expected": {
    "volume":        {"value": "28/3", "provenance": "closed-form"},
    "r":             {"value": "14/17", "provenance": "closed-form"},
    "ke":            {"value": false, "provenance": "closed-form"},
    "pc":            {"value": ["1/14", "1/14", "1/14"], "provenance": "closed-form"},
    "q":             {"value": ["-1/3", "-1/3", "-1/3"], "provenance": "closed-form"},
    "face_vertices": {"value": [[-1, -1, 1], [-1, 1, -1], [1, -1, -1]], "provenance": "closed-form"},
    "base_locus":    {"value": [{"facet": [-1, -1, -1], "a": 2}], "provenance": "closed-form"},
    "angle_fractions": {"value": [{"facet": [-1, -1, -1], "fraction": "11/17"}], "provenance": "closed-form"}
  }
})json";

const char* kBlpP4 = R"json({
  "name": "blp_p4",
  "dim": 4,
  "vertices": [[-1, -1, -1, 4], [-1, -1, 4, -1], [-1, 4, -1, -1], [4, -1, -1, -1],
               [-1, -1, -1, 2], [-1, -1, 2, -1], [-1, 2, -1, -1], [2, -1, -1, -1]],
  "facets": [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1],
             [1, 1, 1, 1], [-1, -1, -1, -1]],
  "expected": {
    "volume": {"value": "68/3", "provenance": "closed-form"},
    "r":      {"value": "340/421", "provenance": "closed-form"},
    "ke":     {"value": false, "provenance": "closed-form"},
    "pc":     {"value": ["81/1360", "81/1360", "81/1360", "81/1360"], "provenance": "closed-form"},
    "q":      {"value": ["-1/4", "-1/4", "-1/4", "-1/4"], "provenance": "closed-form"},
    "base_locus": {"value": [{"facet": [-1, -1, -1, -1], "a": 2}], "provenance": "closed-form"},
    "angle_fractions": {"value": [{"facet": [-1, -1, -1, -1], "fraction": "259/421"}], "provenance": "closed-form"}
  }
})json";

const char* kBlpP5 = R"json({
  "name": "blp_p5",
  "dim": 5,
  "vertices": [[-1, -1, -1, -1, 5], [-1, -1, -1, 5, -1], [-1, -1, 5, -1, -1],
               [-1, 5, -1, -1, -1], [5, -1, -1, -1, -1],
               [-1, -1, -1, -1, 3], [-1, -1, -1, 3, -1], [-1, -1, 3, -1, -1],
               [-1, 3, -1, -1, -1], [3, -1, -1, -1, -1]],
  "facets": [[1, 0, 0, 0, 0], [0, 1, 0, 0, 0], [0, 0, 1, 0, 0], [0, 0, 0, 1, 0],
             [0, 0, 0, 0, 1], [1, 1, 1, 1, 1], [-1, -1, -1, -1, -1]],
  "expected": {
    "volume": {"value": "844/15", "provenance": "closed-form"},
    "r":      {"value": "633/793", "provenance": "closed-form"},
    "ke":     {"value": false, "provenance": "closed-form"},
    "pc":     {"value": ["32/633", "32/633", "32/633", "32/633", "32/633"], "provenance": "closed-form"},
    "q":      {"value": ["-1/5", "-1/5", "-1/5", "-1/5", "-1/5"], "provenance": "closed-form"},
    "base_locus": {"value": [{"facet": [-1, -1, -1, -1, -1], "a": 2}], "provenance": "closed-form"},
    "angle_fractions": {"value": [{"facet": [-1, -1, -1, -1, -1], "fraction": "473/793"}], "provenance": "closed-form"}
  }
})json";

RatVec parse_ratvec(const json& arr) {
  RatVec v;
  for (const auto& s : arr) v.push_back(rational_from_string(s.get<std::string>()));
  return v;
}

std::string vec_to_string(const IntVec& v) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  os << ")";
  return os.str();
}

void check_case(const json& doc, FixtureResult& res) {
  const json& exp = doc.at("expected");
  auto fail = [&](const std::string& what, const std::string& prov,
                  const std::string& expect, const std::string& got) {
    res.pass = false;
    res.failures.push_back(what + " [" + prov + "]: expected " + expect +
                           ", got " + got);
  };
  auto prov = [&](const char* key) {
    return exp.at(key).at("provenance").get<std::string>();
  };

  LatticePolytope p = load_polytope(doc.dump());

  if (exp.contains("facets")) {
    std::vector<IntVec> want;
    for (const auto& f : exp.at("facets").at("value")) want.push_back(f.get<IntVec>());
    std::sort(want.begin(), want.end());
    if (want != p.facets) {
      std::string got = "{";
      for (const auto& f : p.facets) got += vec_to_string(f);
      fail("facets", prov("facets"), "(list)", got + "}");
    }
  }

  if (exp.contains("volume")) {
    const Rational want = rational_from_string(exp.at("volume").at("value"));
    const Rational got = volume(p);
    if (want != got)
      fail("volume", prov("volume"), to_string(want), to_string(got));
  }

  const FanoInvariants inv = compute_R(p);
  if (exp.contains("r")) {
    const Rational want = rational_from_string(exp.at("r").at("value"));
    if (want != inv.r) fail("R", prov("r"), to_string(want), to_string(inv.r));
  }
  if (exp.contains("ke")) {
    const bool want = exp.at("ke").at("value").get<bool>();
    if (want != inv.ke_exists)
      fail("ke_exists", prov("ke"), want ? "true" : "false",
           inv.ke_exists ? "true" : "false");
  }
  if (exp.contains("pc")) {
    const RatVec want = parse_ratvec(exp.at("pc").at("value"));
    if (want != inv.barycenter)
      fail("P_c", prov("pc"), to_string(want), to_string(inv.barycenter));
  }
  if (exp.contains("q")) {
    const RatVec want = parse_ratvec(exp.at("q").at("value"));
    if (!inv.q || want != *inv.q)
      fail("Q", prov("q"), to_string(want),
           inv.q ? to_string(*inv.q) : "(absent)");
  }
  if (exp.contains("face_vertices")) {
    std::vector<IntVec> want;
    for (const auto& v : exp.at("face_vertices").at("value"))
      want.push_back(v.get<IntVec>());
    std::sort(want.begin(), want.end());
    std::vector<IntVec> got =
        inv.minimal_face ? inv.minimal_face->face_vertices : std::vector<IntVec>{};
    std::sort(got.begin(), got.end());
    if (want != got)
      fail("face_vertices", prov("face_vertices"),
           std::to_string(want.size()) + " vertices",
           std::to_string(got.size()) + " vertices");
  }
  if (exp.contains("base_locus")) {
    auto a = base_locus_fixed_components(p, *inv.minimal_face);
    std::map<IntVec, Int> got;
    for (const auto& [r, m] : a) got[p.facets[r]] = m;
    std::map<IntVec, Int> want;
    for (const auto& item : exp.at("base_locus").at("value"))
      want[item.at("facet").get<IntVec>()] = item.at("a").get<Int>();
    if (want != got)
      fail("base_locus", prov("base_locus"),
           std::to_string(want.size()) + " components",
           std::to_string(got.size()) + " components or mismatched a_i");
  }
  if (exp.contains("angle_fractions")) {
    auto rep = conic_angle_report(p);
    std::map<IntVec, Rational> got;
    for (const auto& [r, comp] : rep.fixed_components)
      got[p.facets[r]] = comp.angle_fraction;
    std::map<IntVec, Rational> want;
    for (const auto& item : exp.at("angle_fractions").at("value"))
      want[item.at("facet").get<IntVec>()] =
          rational_from_string(item.at("fraction").get<std::string>());
    if (want != got) {
      std::string w, g;
      for (const auto& [k, v] : want) w += to_string(v) + " ";
      for (const auto& [k, v] : got) g += to_string(v) + " ";
      fail("angle_fractions", prov("angle_fractions"), w, g);
    }
  }
  if (exp.contains("lattice_point_count")) {
    const int want = exp.at("lattice_point_count").at("value").get<int>();
    const int got = static_cast<int>(lattice_points(p).size());
    if (want != got)
      fail("lattice_point_count", prov("lattice_point_count"),
           std::to_string(want), std::to_string(got));
  }
}

}  // namespace

const std::map<std::string, std::string>& fixture_documents() {
  static const std::map<std::string, std::string> docs = {
      {"p1", kP1},           {"p2", kP2},      {"p3", kP3},
      {"blp_p2", kBlpP2},    {"blpq_p2", kBlpqP2},
      {"blp_p3", kBlpP3},    {"blp_p4", kBlpP4},
      {"blp_p5", kBlpP5},
  };
  return docs;
}

FixtureResult run_fixture(const std::string& name) {
  const auto& docs = fixture_documents();
  auto it = docs.find(name);
  if (it == docs.end()) throw ValidationError("unknown fixture '" + name + "'");
  FixtureResult res;
  res.name = name;
  try {
    check_case(json::parse(it->second), res);
  } catch (const std::exception& e) {
    res.pass = false;
    res.failures.push_back(std::string("exception: ") + e.what());
  }
  return res;
}

std::vector<FixtureResult> run_fixtures() {
  const auto& docs = fixture_documents();
  std::vector<std::future<FixtureResult>> futs;
  for (const auto& [name, text] : docs)
    futs.push_back(std::async(std::launch::async,
                              [n = name]() { return run_fixture(n); }));
  std::vector<FixtureResult> out;
  for (auto& f : futs) out.push_back(f.get());
  return out;
}

std::string resolve_polytope_document(const std::string& path_or_name) {
  if (std::filesystem::exists(path_or_name)) {
    std::ifstream in(path_or_name);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }
  const auto& docs = fixture_documents();
  auto it = docs.find(path_or_name);
  if (it != docs.end()) return it->second;
  throw ValidationError("no such file or built-in polytope: '" + path_or_name +
                        "'");
}

}  // namespace toric
