#include "scatterlm/signature.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "scatterlm/error.hpp"
#include "scatterlm/util.hpp"

namespace scatterlm {

namespace {

const char* const kElementNames[kElementsPerWavelength] = {
    "m12", "m13", "m14", "m21", "m22", "m23", "m24", "m31",
    "m32", "m33", "m34", "m41", "m42", "m43", "m44"};

}  // namespace

void Signature::validate() const {
  if (wavelengths.size() != mueller.size()) {
    throw Error(ErrorKind::Validation, "signature grid and matrix count differ");
  }
  for (std::size_t w = 0; w < size(); ++w) {
    if (w > 0 && !(wavelengths[w] > wavelengths[w - 1])) {
      throw Error(ErrorKind::Validation, "signature wavelengths not strictly increasing");
    }
    if (mueller[w][0] != 1.0) throw Error(ErrorKind::Validation, "signature m11 must be 1");
    for (double v : mueller[w]) {
      if (!std::isfinite(v)) throw Error(ErrorKind::Validation, "signature has non-finite elements");
    }
  }
}

MuellerMatrix jones_to_mueller(std::complex<double> r_tm, std::complex<double> r_te) {
  const double te2 = std::norm(r_te);
  const double tm2 = std::norm(r_tm);
  const double total = te2 + tm2;
  if (total == 0.0) throw Error(ErrorKind::Numerical, "both reflection coefficients are zero");
  const std::complex<double> cross = r_tm * std::conj(r_te);
  const double n = (te2 - tm2) / total;
  const double c = 2.0 * cross.real() / total;
  const double s = 2.0 * cross.imag() / total;
  return {1.0, -n, 0.0, 0.0,
          -n, 1.0, 0.0, 0.0,
          0.0, 0.0, c, s,
          0.0, 0.0, -s, c};
}

std::vector<std::size_t> subsample_indices(std::span<const double> grid, int k) {
  if (k < 2) throw Error(ErrorKind::Validation, "subsample needs k >= 2");
  if (static_cast<std::size_t>(k) > grid.size()) {
    throw Error(ErrorKind::Validation, "subsample k = " + std::to_string(k) +
                                           " exceeds grid length " + std::to_string(grid.size()));
  }
  const double first = grid.front();
  const double last = grid.back();
  std::vector<std::size_t> out;
  out.reserve(k);
  std::size_t cursor = 0;
  for (int i = 0; i < k; ++i) {
    const double target = i == k - 1 ? last : first + (last - first) * i / (k - 1);
    while (cursor + 1 < grid.size() && std::abs(grid[cursor + 1] - target) < std::abs(grid[cursor] - target)) {
      ++cursor;
    }
    out.push_back(cursor);
  }
  return out;
}

Signature select_wavelengths(const Signature& sig, std::span<const std::size_t> indices) {
  Signature out;
  out.wavelengths.reserve(indices.size());
  out.mueller.reserve(indices.size());
  for (auto i : indices) {
    out.wavelengths.push_back(sig.wavelengths.at(i));
    out.mueller.push_back(sig.mueller.at(i));
  }
  return out;
}

FeatureVector flatten(const Signature& sig) {
  FeatureVector v;
  v.reserve(sig.size() * kElementsPerWavelength);
  for (const auto& m : sig.mueller) v.insert(v.end(), m.begin() + 1, m.end());
  return v;
}

FeatureVector subsample(const Signature& sig, int k) {
  const auto idx = subsample_indices(sig.wavelengths, k);
  return flatten(select_wavelengths(sig, idx));
}

double signature_rms(const Signature& sig) {
  if (sig.size() == 0) return 0.0;
  double sum = 0.0;
  for (const auto& m : sig.mueller)
    for (int e = 1; e < 16; ++e) sum += m[e] * m[e];
  return std::sqrt(sum / (static_cast<double>(sig.size()) * kElementsPerWavelength));
}

void ErrorSpec::validate() const {
  auto ok = [](double m) { return m >= 0.0 && m <= 1.0; };
  if (!ok(random_magnitude) || !ok(offset_magnitude)) {
    throw Error(ErrorKind::Validation, "error magnitudes must lie in [0, 1]");
  }
}

Signature inject_errors(const Signature& sig, const ErrorSpec& spec) {
  spec.validate();
  const double rms = signature_rms(sig);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::array<double, kElementsPerWavelength> offsets{};
  for (auto& o : offsets) o = normal(rng) * spec.offset_magnitude * rms;
  Signature out = sig;
  for (auto& m : out.mueller) {
    for (int e = 1; e < 16; ++e) {
      m[e] += offsets[e - 1] + normal(rng) * spec.random_magnitude * rms;
    }
  }
  return out;
}

std::string format_signature(const Signature& sig) {
  std::string out = "lambda_nm";
  for (const char* name : kElementNames) {
    out += ' ';
    out += name;
  }
  out += '\n';
  for (std::size_t w = 0; w < sig.size(); ++w) {
    out += format_double(sig.wavelengths[w]);
    for (int e = 1; e < 16; ++e) {
      out += ' ';
      out += format_double(sig.mueller[w][e]);
    }
    out += '\n';
  }
  return out;
}

Signature parse_signature(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  bool header_seen = false;
  Signature sig;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream row(line);
    if (!header_seen) {
      std::string tok;
      row >> tok;
      if (tok != "lambda_nm") throw Error(ErrorKind::Parse, "signature header must start with lambda_nm");
      for (const char* name : kElementNames) {
        if (!(row >> tok) || tok != name) throw Error(ErrorKind::Parse, "unexpected signature header");
      }
      header_seen = true;
      continue;
    }
    double lambda = 0.0;
    MuellerMatrix m{};
    m[0] = 1.0;
    std::string extra;
    bool ok = static_cast<bool>(row >> lambda);
    for (int e = 1; e < 16 && ok; ++e) ok = static_cast<bool>(row >> m[e]);
    if (!ok || (row >> extra)) {
      throw Error(ErrorKind::Parse, "signature line " + std::to_string(line_no) + ": expected 16 numbers");
    }
    sig.wavelengths.push_back(lambda);
    sig.mueller.push_back(m);
  }
  if (!header_seen || sig.size() == 0) throw Error(ErrorKind::Parse, "signature file has no data");
  sig.validate();
  return sig;
}

void save_signature(const std::filesystem::path& path, const Signature& sig) {
  write_text_file(path, format_signature(sig));
}

Signature load_signature(const std::filesystem::path& path) {
  return parse_signature(read_text_file(path));
}

}  // namespace scatterlm
