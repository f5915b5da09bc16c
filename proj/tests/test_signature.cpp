#include <doctest.h>

#include <cmath>
#include <random>

#include "scatterlm/error.hpp"
#include "scatterlm/forward_model.hpp"
#include "scatterlm/signature.hpp"

using namespace scatterlm;
using cd = std::complex<double>;

namespace {

Signature constant_signature(std::size_t n, double c) {
  Signature s;
  for (std::size_t w = 0; w < n; ++w) {
    s.wavelengths.push_back(200.0 + 10.0 * w);
    MuellerMatrix m;
    m.fill(c);
    m[0] = 1.0;
    s.mueller.push_back(m);
  }
  return s;
}

Signature smooth_signature(std::size_t n) {
  Signature s;
  for (std::size_t w = 0; w < n; ++w) {
    const double a = 0.3 * std::sin(0.1 * w), b = 0.4 * std::cos(0.07 * w);
    s.wavelengths.push_back(200.0 + 10.0 * w);
    s.mueller.push_back(jones_to_mueller(cd(a, b), cd(0.5, -0.2)));
  }
  return s;
}

}  // namespace

TEST_SUITE("signature") {

TEST_CASE("jones to mueller special cases") {
  auto m = jones_to_mueller(cd(0.3, 0.1), cd(0.3, 0.1));
  CHECK(m[1] == doctest::Approx(0.0));
  CHECK(m[10] == doctest::Approx(1.0));
  CHECK(m[11] == doctest::Approx(0.0));
  m = jones_to_mueller(0.0, cd(0.2, 0.4));
  CHECK(m[1] == doctest::Approx(-1.0));
  CHECK(m[10] == doctest::Approx(0.0));
  CHECK(m[11] == doctest::Approx(0.0));
  CHECK_THROWS_AS(jones_to_mueller(0.0, 0.0), Error);
}

TEST_CASE("N, C, S lie on the unit sphere") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (int i = 0; i < 200; ++i) {
    const auto m = jones_to_mueller(cd(g(rng), g(rng)), cd(g(rng), g(rng)));
    const double n = -m[1], c = m[10], s = m[11];
    CHECK(n * n + c * c + s * s == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m[4] == m[1]);
    CHECK(m[15] == m[10]);
    CHECK(m[14] == -m[11]);
  }
}

TEST_CASE("Psi and Delta round trip") {
  // tan(Psi) e^{i Delta} = r_tm / r_te with Psi = 30 deg, Delta = 60 deg
  const double psi = std::numbers::pi / 6, delta = std::numbers::pi / 3;
  const cd r_te(0.7, 0.1);
  const cd r_tm = r_te * std::tan(psi) * std::exp(cd(0, delta));
  const auto m = jones_to_mueller(r_tm, r_te);
  CHECK(-m[1] == doctest::Approx(std::cos(2 * psi)));
  CHECK(m[10] == doctest::Approx(std::sin(2 * psi) * std::cos(delta)));
  CHECK(m[11] == doctest::Approx(std::sin(2 * psi) * std::sin(delta)));
}

TEST_CASE("subsampling the 61-point grid") {
  const auto grid = IncidenceConfig::grid(200, 800, 10);
  REQUIRE(grid.size() == 61);
  const auto idx = subsample_indices(grid, 7);
  std::vector<double> picked;
  for (auto i : idx) picked.push_back(grid[i]);
  CHECK(picked == std::vector<double>{200, 300, 400, 500, 600, 700, 800});
  const auto sig = smooth_signature(61);
  CHECK(subsample(sig, 7).size() == 105);
  CHECK(subsample(sig, 2).size() == 30);
  const auto all = subsample_indices(grid, 61);
  for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);
  CHECK_THROWS_AS(subsample_indices(grid, 62), Error);
  CHECK_THROWS_AS(subsample_indices(grid, 1), Error);
  // 21 points land on every third grid wavelength
  const auto idx21 = subsample_indices(grid, 21);
  for (std::size_t i = 0; i < idx21.size(); ++i) CHECK(idx21[i] == 3 * i);
}

TEST_CASE("subsampling never invents wavelengths") {
  const std::vector<double> grid{200, 215, 227, 260, 301, 333, 390, 400};
  for (int k = 2; k <= 8; ++k) {
    for (auto i : subsample_indices(grid, k)) CHECK(i < grid.size());
  }
}

TEST_CASE("flatten order is wavelength-major m12..m44") {
  const auto sig = smooth_signature(2);
  const auto x = flatten(sig);
  REQUIRE(x.size() == 30);
  for (int e = 1; e < 16; ++e) {
    CHECK(x[e - 1] == sig.mueller[0][e]);
    CHECK(x[15 + e - 1] == sig.mueller[1][e]);
  }
}

TEST_CASE("rms") {
  CHECK(signature_rms(constant_signature(4, 0.0)) == 0.0);
  CHECK(signature_rms(constant_signature(4, -0.3)) == doctest::Approx(0.3));
  Signature s = constant_signature(2, 0.0);
  s.mueller[0][1] = 1.0;
  CHECK(signature_rms(s) == doctest::Approx(std::sqrt(1.0 / 30.0)));
}

TEST_CASE("zero magnitudes leave the signature alone") {
  const auto sig = smooth_signature(20);
  CHECK(inject_errors(sig, {0.0, 0.0, 9}) == sig);
}

TEST_CASE("noise is seeded and keeps the shape") {
  const auto sig = smooth_signature(20);
  const auto a = inject_errors(sig, {0.05, 0.05, 42});
  CHECK(a == inject_errors(sig, {0.05, 0.05, 42}));
  CHECK(!(a == inject_errors(sig, {0.05, 0.05, 43})));
  CHECK(a.wavelengths == sig.wavelengths);
  for (const auto& m : a.mueller) CHECK(m[0] == 1.0);
  CHECK_THROWS_AS(inject_errors(sig, {1.5, 0, 1}), Error);
}

TEST_CASE("random error has the stated standard deviation") {
  const auto sig = smooth_signature(10);
  const double s = signature_rms(sig);
  double sum = 0, sum2 = 0;
  long n = 0;
  for (std::uint64_t seed = 0; seed < 700; ++seed) {
    const auto noisy = inject_errors(sig, {0.05, 0.0, seed});
    for (std::size_t w = 0; w < sig.size(); ++w)
      for (int e = 1; e < 16; ++e) {
        const double d = noisy.mueller[w][e] - sig.mueller[w][e];
        sum += d, sum2 += d * d, ++n;
      }
  }
  REQUIRE(n >= 10000);
  const double sd = std::sqrt(sum2 / n - (sum / n) * (sum / n));
  CHECK(std::abs(sd / (0.05 * s) - 1.0) < 0.05);
}

TEST_CASE("offset error is constant across wavelengths with the stated spread") {
  const auto sig = smooth_signature(10);
  const double s = signature_rms(sig);
  double sum2 = 0;
  long n = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto noisy = inject_errors(sig, {0.0, 0.05, seed});
    for (int e = 1; e < 16; ++e) {
      const double d0 = noisy.mueller[0][e] - sig.mueller[0][e];
      for (std::size_t w = 1; w < sig.size(); ++w)
        CHECK(noisy.mueller[w][e] - sig.mueller[w][e] == doctest::Approx(d0).epsilon(1e-9));
      sum2 += d0 * d0, ++n;
    }
  }
  REQUIRE(n >= 10000);
  CHECK(std::abs(std::sqrt(sum2 / n) / (0.05 * s) - 1.0) < 0.05);
}

TEST_CASE("signature text round trip") {
  const auto sig = smooth_signature(7);
  CHECK(parse_signature(format_signature(sig)) == sig);
  CHECK_THROWS_AS(parse_signature("lambda_nm m12\n200 1\n"), Error);
  CHECK_THROWS_AS(parse_signature(""), Error);
  std::string bad = format_signature(sig);
  bad += "900 1 2\n";
  CHECK_THROWS_AS(parse_signature(bad), Error);
}

}
