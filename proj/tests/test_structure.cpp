#include <doctest.h>

#include "scatterlm/error.hpp"
#include "scatterlm/structure.hpp"
#include "test_support.hpp"

using namespace scatterlm;

namespace {

ConcreteLayer trapezoid(double top, double bottom, double height) {
  ConcreteLayer l;
  l.kind = LayerKind::Trapezoid;
  l.thickness_nm = height;
  l.line_material = "Si";
  l.groove_material = "Air";
  l.top_width_nm = top;
  l.bottom_width_nm = bottom;
  return l;
}

}  // namespace

TEST_SUITE("structure") {

TEST_CASE("rectangle slices keep their width") {
  for (int n : {1, 4, 16}) {
    const auto slices = slice_trapezoid(trapezoid(300, 300, 100), n);
    REQUIRE(slices.size() == static_cast<std::size_t>(n));
    for (const auto& s : slices) CHECK(s.line_width_nm == 300.0);
  }
}

TEST_CASE("one slice takes the mid-height width") {
  const auto s = slice_trapezoid(trapezoid(350, 383, 472), 1);
  REQUIRE(s.size() == 1);
  CHECK(s[0].line_width_nm == doctest::Approx(366.5));
  CHECK(s[0].thickness_nm == 472.0);
}

TEST_CASE("two slices sit at three quarters and one quarter of the height") {
  const auto s = slice_trapezoid(trapezoid(100, 200, 50), 2);
  REQUIRE(s.size() == 2);
  CHECK(s[0].line_width_nm == doctest::Approx(125));
  CHECK(s[1].line_width_nm == doctest::Approx(175));
  CHECK(s[0].thickness_nm + s[1].thickness_nm == doctest::Approx(50));
  CHECK(s[0].kind == LayerKind::Lamellar);
}

TEST_CASE("parameters bind by name") {
  const auto model = test_support::si_grating_model().structure();
  CHECK(model.parameter_names() == std::vector<std::string>{"Hgt", "TCD", "BCD"});
  const auto layers = instantiate(model, {{"TCD", 350}, {"Hgt", 472}, {"BCD", 383}}, 16);
  CHECK(layers.size() == 16);
  double h = 0;
  for (const auto& l : layers) h += l.thickness_nm;
  CHECK(h == doctest::Approx(472));
}

TEST_CASE("a parameter may drive several slots") {
  const auto model = test_support::multilayer_model().structure();
  const auto names = model.parameter_names();
  CHECK(names.size() == 6);
  const auto layers = instantiate(model, {{"D1", 75}, {"H1", 135}, {"D2", 86}, {"H2", 10}, {"D3", 124}, {"H3", 134}}, 4);
  REQUIRE(layers.size() == 9);
  CHECK(layers[3].line_width_nm < 86.0);
  CHECK(layers[4].line_width_nm == 86.0);
  CHECK(layers[5].line_width_nm > 86.0);
}

TEST_CASE("critical dimensions must fit the pitch") {
  const auto model = test_support::si_grating_model().structure();
  try {
    instantiate(model, {{"TCD", 900}, {"Hgt", 472}, {"BCD", 383}}, 16);
    FAIL("expected a range error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Range);
  }
  CHECK_THROWS_AS(instantiate(model, {{"TCD", 0}, {"Hgt", 472}, {"BCD", 383}}, 16), Error);
  CHECK_NOTHROW(instantiate(model, {{"TCD", 800}, {"Hgt", 472}, {"BCD", 800}}, 16));
  CHECK_THROWS_AS(instantiate(model, {{"TCD", 300}, {"Hgt", -1}, {"BCD", 300}}, 16), Error);
}

TEST_CASE("zero-thickness layers vanish") {
  const auto model = test_support::si_grating_model().structure();
  CHECK(instantiate(model, {{"TCD", 300}, {"Hgt", 0}, {"BCD", 300}}, 16).empty());
}

TEST_CASE("json round trip and hash") {
  const auto model = test_support::si_grating_model().structure();
  const auto again = structure_from_json(structure_to_json(model));
  CHECK(structure_hash(again) == structure_hash(model));
  auto other = model;
  other.pitch_nm = 801;
  CHECK(structure_hash(other) != structure_hash(model));
  CHECK(structure_hash(model).size() == 16);
}

TEST_CASE("malformed definitions are parse errors") {
  CHECK_THROWS_AS(structure_from_json(nlohmann::json::parse(R"({"pitch": 800})")), Error);
  CHECK_THROWS_AS(structure_from_json(nlohmann::json::parse(
                      R"({"pitch": 800, "substrate": "Si", "layers": [{"kind": "blob", "thickness": 1, "line": "Si"}]})")),
                  Error);
  CHECK_THROWS_AS(structure_from_json(nlohmann::json::parse(
                      R"({"pitch": -5, "substrate": "Si", "layers": []})")),
                  Error);
}

}
