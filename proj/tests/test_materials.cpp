#include <doctest.h>

#include <filesystem>

#include "scatterlm/error.hpp"
#include "scatterlm/materials.hpp"

using namespace scatterlm;

TEST_SUITE("materials") {

TEST_CASE("three-row file parses to three samples") {
  const auto t = parse_dispersion("Si", "# comment\n400 5.57 0.387\n500 4.29 0.0745\n600 3.94 0.0255\n");
  CHECK(t.samples().size() == 3);
  CHECK(t.name() == "Si");
  CHECK(t.min_wavelength() == 400.0);
  CHECK(t.max_wavelength() == 600.0);
}

TEST_CASE("invariant violations are rejected") {
  CHECK_THROWS_AS(parse_dispersion("x", "500 2 0\n400 3 0\n"), Error);
  CHECK_THROWS_AS(parse_dispersion("x", "400 2 0\n500 3 -0.1\n"), Error);
  CHECK_THROWS_AS(parse_dispersion("x", "400 2 0\n"), Error);
  CHECK_THROWS_AS(parse_dispersion("x", "400 2\n500 3 0\n"), Error);
}

TEST_CASE("linear interpolation") {
  const DispersionTable t("t", {{400, 2.0, 0.0}, {600, 3.0, 0.0}});
  CHECK(refractive_index(t, 500) == std::complex<double>(2.5, 0.0));
  CHECK(refractive_index(t, 400) == std::complex<double>(2.0, 0.0));
  CHECK(refractive_index(t, 600) == std::complex<double>(3.0, 0.0));
}

TEST_CASE("sample points are reproduced exactly and pieces are linear") {
  const DispersionTable t("t", {{400, 2.0, 0.1}, {450, 2.7, 0.3}, {600, 3.0, 0.0}});
  for (const auto& s : t.samples()) CHECK(refractive_index(t, s.wavelength_nm) == std::complex<double>(s.n, s.k));
  const auto a = refractive_index(t, 460), b = refractive_index(t, 470), c = refractive_index(t, 480);
  CHECK(std::abs((b - a) - (c - b)) < 1e-12);
}

TEST_CASE("extrapolation is a range error") {
  const DispersionTable t("t", {{400, 2.0, 0.0}, {600, 3.0, 0.0}});
  try {
    refractive_index(t, 399.999);
    FAIL("expected a range error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Range);
  }
  CHECK_THROWS_AS(refractive_index(t, 600.001), Error);
}

TEST_CASE("vacuum is 1 everywhere") {
  MaterialLibrary lib;
  CHECK(lib.contains("vacuum"));
  for (double w : {150.0, 200.0, 633.0, 1500.0}) CHECK(lib.index("vacuum", w) == std::complex<double>(1.0, 0.0));
}

TEST_CASE("shipped tables cover the measurement range") {
  const auto lib = MaterialLibrary::load_directory(std::filesystem::path(SCATTERLM_DATA_DIR) / "materials");
  for (const char* name : {"Si", "SiO2", "Si3N4", "Air"}) {
    REQUIRE(lib.contains(name));
    CHECK(lib.get(name).min_wavelength() <= 200.0);
    CHECK(lib.get(name).max_wavelength() >= 800.0);
  }
  // crystalline Si near 633 nm: n about 3.88, weakly absorbing
  const auto n = lib.index("Si", 633.0);
  CHECK(n.real() == doctest::Approx(3.88).epsilon(0.01));
  CHECK(n.imag() > 0.0);
  CHECK(n.imag() < 0.03);
  // eps = n^2 with the k >= 0 convention
  const auto eps = lib.permittivity("Si", 633.0);
  CHECK(std::abs(eps - n * n) < 1e-12);
  CHECK_THROWS_AS(lib.get("Unobtainium"), Error);
}

}
