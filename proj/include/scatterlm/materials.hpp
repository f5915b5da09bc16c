#pragma once

#include <complex>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace scatterlm {

struct DispersionSample {
  double wavelength_nm = 0.0;
  double n = 1.0;
  double k = 0.0;
};

/// Tabulated optical constants of one material. Immutable after
/// construction; the constructor enforces strictly increasing wavelengths,
/// at least two samples and k >= 0.
class DispersionTable {
 public:
  DispersionTable(std::string name, std::vector<DispersionSample> samples);

  /// n = 1, k = 0 over [1 nm, 1e6 nm].
  static DispersionTable vacuum();

  const std::string& name() const noexcept { return name_; }
  std::span<const DispersionSample> samples() const noexcept { return samples_; }
  double min_wavelength() const noexcept { return samples_.front().wavelength_nm; }
  double max_wavelength() const noexcept { return samples_.back().wavelength_nm; }

 private:
  std::string name_;
  std::vector<DispersionSample> samples_;
};

/// Reads `# comment` lines followed by `wavelength_nm n k` rows. The table
/// name defaults to the file stem.
DispersionTable load_dispersion(const std::filesystem::path& path);
DispersionTable parse_dispersion(std::string name, const std::string& text);

/// Linear interpolation of n and k independently. Throws a range error
/// outside the tabulated interval; there is no extrapolation.
std::complex<double> refractive_index(const DispersionTable& table, double wavelength_nm);

/// Named collection of dispersion tables. "vacuum" is always present.
class MaterialLibrary {
 public:
  MaterialLibrary();

  /// Loads every `*.txt` file in `dir`; the file stem is the material name.
  static MaterialLibrary load_directory(const std::filesystem::path& dir);

  void add(DispersionTable table);
  bool contains(const std::string& name) const;
  const DispersionTable& get(const std::string& name) const;
  std::vector<std::string> names() const;

  std::complex<double> index(const std::string& name, double wavelength_nm) const;
  std::complex<double> permittivity(const std::string& name, double wavelength_nm) const;

 private:
  std::map<std::string, DispersionTable> tables_;
};

}  // namespace scatterlm
