#pragma once

#include <map>
#include <string>

#include "toric/path.hpp"
#include "toric/polytope.hpp"

namespace toric {

// Polytope document format (JSON): fields `name` (string, optional), `dim`
// (integer), `vertices` (array of integer arrays), optional `facets` (array
// of integer arrays). Unknown fields are ignored.
LatticePolytope load_polytope(const std::string& json_text);
LatticePolytope load_polytope_file(const std::string& path);

// Canonical document for a validated polytope (vertices/facets sorted).
std::string polytope_to_json(const LatticePolytope& p);

// path.csv: one row per accepted t.
void write_path_csv(const std::string& path, const ContinuitySolver& solver,
                    const PathRecord& rec);

// invariants.csv: long format (quantity, exact, decimal).
void write_invariants_csv(const std::string& path, const LatticePolytope& p);

// Final-state grid dump: <stem>.hdr (text header) plus <stem>.bin (float64
// little-endian, row-major phi values).
void write_grid_dump(const std::string& stem, const SolutionState& s);

}  // namespace toric
