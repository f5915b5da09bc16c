#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace scatterlm {

/// Row-major 4x4 Mueller matrix; element (i, j) of the 1-based m_ij
/// notation lives at [(i - 1) * 4 + (j - 1)].
using MuellerMatrix = std::array<double, 16>;

/// Number of free elements of an m11-normalised Mueller matrix.
inline constexpr int kElementsPerWavelength = 15;

/// Mueller-matrix spectrum, m11 = 1 at every wavelength.
struct Signature {
  std::vector<double> wavelengths;
  std::vector<MuellerMatrix> mueller;

  std::size_t size() const noexcept { return wavelengths.size(); }
  /// Element m_ij (1-based) at wavelength index w.
  double element(std::size_t w, int i, int j) const { return mueller[w][(i - 1) * 4 + (j - 1)]; }
  void validate() const;

  bool operator==(const Signature&) const = default;
};

/// Wavelength-major flattening of m12, m13, ..., m44 (15 values per
/// wavelength). Used both as SVM input and as the residual layout.
using FeatureVector = std::vector<double>;

/// Normalised block-diagonal Mueller matrix from the planar-mount complex
/// reflection coefficients. With rho = r_tm / r_te = tan(Psi) e^{i Delta}:
/// N = cos 2Psi, C = sin 2Psi cos Delta, S = sin 2Psi sin Delta.
MuellerMatrix jones_to_mueller(std::complex<double> r_tm, std::complex<double> r_te);

/// Indices of `k` grid points equally spaced in wavelength from the first
/// to the last grid point, each rounded to the nearest grid point.
std::vector<std::size_t> subsample_indices(std::span<const double> grid, int k);

FeatureVector flatten(const Signature& sig);
FeatureVector subsample(const Signature& sig, int k);
Signature select_wavelengths(const Signature& sig, std::span<const std::size_t> indices);

/// Root-mean-square over the 15 normalised elements at all wavelengths.
double signature_rms(const Signature& sig);

struct ErrorSpec {
  double random_magnitude = 0.0;
  double offset_magnitude = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Adds measurement errors scaled by s = signature_rms(sig): one offset per
/// element (15 draws of N(0, (offset * s)^2), constant across wavelengths)
/// then independent N(0, (random * s)^2) per element per wavelength. The
/// offsets are drawn first, then the random errors wavelength-major. Standard
/// normals are always drawn, so magnitudes only rescale a fixed realisation.
Signature inject_errors(const Signature& sig, const ErrorSpec& spec);

/// Text format: optional `#` comment lines, a header row
/// `lambda_nm m12 m13 ... m44`, then one row per wavelength.
std::string format_signature(const Signature& sig);
Signature parse_signature(const std::string& text);
void save_signature(const std::filesystem::path& path, const Signature& sig);
Signature load_signature(const std::filesystem::path& path);

}  // namespace scatterlm
