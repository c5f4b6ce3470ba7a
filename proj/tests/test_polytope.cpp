#include <doctest.h>
#include "toric/polytope.hpp"
TEST_CASE("smoke") {
  auto p = toric::make_polytope(1, {{-1}, {1}});
  CHECK(p.num_facets() == 2);
}
