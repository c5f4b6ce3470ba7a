#pragma once

#include <map>
#include <string>
#include <vector>

#include "toric/polytope.hpp"

namespace toric {

// Built-in polytope documents with inline expected values and provenance
// tags. A failing comparison thus identifies whether a published value, a
// closed form or a derived oracle broke.
const std::map<std::string, std::string>& fixture_documents();

struct FixtureResult {
  std::string name;
  bool pass = true;
  std::vector<std::string> failures;  // "quantity [provenance]: expected X, got Y"
};

// Evaluates every fixture with exact comparison (no tolerances).
std::vector<FixtureResult> run_fixtures();

// Single case by name (throws ValidationError for unknown names).
FixtureResult run_fixture(const std::string& name);

// Resolves a CLI input: an existing file path, else a built-in fixture name.
// Returns the document text.
std::string resolve_polytope_document(const std::string& path_or_name);

}  // namespace toric
