#include "scatterlm/materials.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "scatterlm/error.hpp"

namespace scatterlm {

DispersionTable::DispersionTable(std::string name, std::vector<DispersionSample> samples)
    : name_(std::move(name)), samples_(std::move(samples)) {
  if (samples_.size() < 2) {
    throw Error(ErrorKind::Validation,
                "dispersion table '" + name_ + "' needs at least 2 samples");
  }
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const auto& s = samples_[i];
    if (!std::isfinite(s.wavelength_nm) || !std::isfinite(s.n) || !std::isfinite(s.k)) {
      throw Error(ErrorKind::Validation, "dispersion table '" + name_ + "' has non-finite values");
    }
    if (s.k < 0.0) {
      throw Error(ErrorKind::Validation, "dispersion table '" + name_ +
                                             "' has negative k at " +
                                             std::to_string(s.wavelength_nm) + " nm");
    }
    if (i > 0 && !(s.wavelength_nm > samples_[i - 1].wavelength_nm)) {
      throw Error(ErrorKind::Validation,
                  "dispersion table '" + name_ + "' wavelengths are not strictly increasing");
    }
  }
}

DispersionTable DispersionTable::vacuum() {
  return DispersionTable("vacuum", {{1.0, 1.0, 0.0}, {1.0e6, 1.0, 0.0}});
}

DispersionTable parse_dispersion(std::string name, const std::string& text) {
  std::vector<DispersionSample> samples;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream row(line);
    DispersionSample s;
    std::string extra;
    if (!(row >> s.wavelength_nm >> s.n >> s.k) || (row >> extra)) {
      throw Error(ErrorKind::Parse, "dispersion table '" + name + "' line " +
                                        std::to_string(line_no) +
                                        ": expected 'wavelength_nm n k'");
    }
    samples.push_back(s);
  }
  if (samples.empty()) {
    throw Error(ErrorKind::Parse, "dispersion table '" + name + "' is empty");
  }
  return DispersionTable(std::move(name), std::move(samples));
}

DispersionTable load_dispersion(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open dispersion file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dispersion(path.stem().string(), buf.str());
}

std::complex<double> refractive_index(const DispersionTable& table, double wavelength_nm) {
  const auto samples = table.samples();
  if (!(wavelength_nm >= table.min_wavelength() && wavelength_nm <= table.max_wavelength())) {
    throw Error(ErrorKind::Range, "wavelength " + std::to_string(wavelength_nm) +
                                      " nm outside table '" + table.name() + "'");
  }
  auto hi = std::lower_bound(samples.begin(), samples.end(), wavelength_nm,
                             [](const DispersionSample& s, double w) { return s.wavelength_nm < w; });
  if (hi->wavelength_nm == wavelength_nm) return {hi->n, hi->k};
  auto lo = hi - 1;
  const double t = (wavelength_nm - lo->wavelength_nm) / (hi->wavelength_nm - lo->wavelength_nm);
  return {lo->n + t * (hi->n - lo->n), lo->k + t * (hi->k - lo->k)};
}

MaterialLibrary::MaterialLibrary() { add(DispersionTable::vacuum()); }

MaterialLibrary MaterialLibrary::load_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorKind::Io, "materials directory not found: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  MaterialLibrary lib;
  for (const auto& f : files) lib.add(load_dispersion(f));
  return lib;
}

void MaterialLibrary::add(DispersionTable table) {
  auto name = table.name();
  tables_.insert_or_assign(std::move(name), std::move(table));
}

bool MaterialLibrary::contains(const std::string& name) const { return tables_.count(name) != 0; }

const DispersionTable& MaterialLibrary::get(const std::string& name) const {
  auto it = tables_.find(name);
  if (it == tables_.end()) throw Error(ErrorKind::Validation, "unknown material '" + name + "'");
  return it->second;
}

std::vector<std::string> MaterialLibrary::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : tables_) out.push_back(name);
  return out;
}

std::complex<double> MaterialLibrary::index(const std::string& name, double wavelength_nm) const {
  return refractive_index(get(name), wavelength_nm);
}

std::complex<double> MaterialLibrary::permittivity(const std::string& name,
                                                   double wavelength_nm) const {
  const auto n = index(name, wavelength_nm);
  return n * n;
}

}  // namespace scatterlm
