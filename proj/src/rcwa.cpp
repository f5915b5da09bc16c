#include "scatterlm/rcwa.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <bit>
#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>
#include <unordered_map>

#include "scatterlm/error.hpp"

namespace scatterlm {

namespace {

using cd = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

constexpr cd kI{0.0, 1.0};

// Rayleigh anomalies put kz exactly on zero; a tiny imaginary part keeps the
// mode normalisation finite without measurably changing the result.
constexpr double kMinKz = 1e-12;

cd uniform_permittivity(const GratingSlab& s) {
  if (s.eps_line == s.eps_groove) return s.eps_line;
  return s.fill >= 1.0 ? s.eps_line : s.eps_groove;
}

/// Branch with Im(kz) >= 0 (decaying downward), Re(kz) >= 0 when lossless.
cd forward_kz(cd kz2) {
  cd kz = std::sqrt(kz2);
  if (kz.imag() < 0.0 || (kz.imag() == 0.0 && kz.real() < 0.0)) kz = -kz;
  if (std::abs(kz) < kMinKz) kz = cd(kz.real(), kMinKz);
  return kz;
}

/// Fourier coefficient p of a centred line of value `line` on `groove`.
cd lamellar_coefficient(int p, cd line, cd groove, double fill) {
  if (p == 0) return groove + (line - groove) * fill;
  const double arg = std::numbers::pi * p;
  return (line - groove) * (std::sin(arg * fill) / arg);
}

Mat toeplitz(int order, cd line, cd groove, double fill) {
  const int m = 2 * order + 1;
  std::vector<cd> coef(2 * m - 1);
  for (int p = -(m - 1); p <= m - 1; ++p) coef[p + m - 1] = lamellar_coefficient(p, line, groove, fill);
  Mat t(m, m);
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c) t(r, c) = coef[r - c + m - 1];
  return t;
}

/// Eigenmodes of one region. Tangential fields at a plane are
///   [W (a + b); V (a - b)]
/// with a the down-going and b the up-going modal amplitudes.
struct Modes {
  bool homogeneous = true;
  Vec kz;
  Vec v_diag;  // V when homogeneous (W = I)
  Mat W;
  Mat V;
  Eigen::PartialPivLU<Mat> W_lu;
  Eigen::PartialPivLU<Mat> V_lu;

  Mat apply_w(const Mat& x) const { return homogeneous ? x : Mat(W * x); }
  Mat apply_v(const Mat& x) const { return homogeneous ? Mat(v_diag.asDiagonal() * x) : Mat(V * x); }
  Mat solve_w(const Mat& x) const { return homogeneous ? x : Mat(W_lu.solve(x)); }
  Mat solve_v(const Mat& x) const {
    return homogeneous ? Mat(v_diag.cwiseInverse().asDiagonal() * x) : Mat(V_lu.solve(x));
  }
};

Modes homogeneous_modes(const Vec& kx, cd eps, Polarization pol) {
  Modes m;
  m.homogeneous = true;
  m.kz.resize(kx.size());
  m.v_diag.resize(kx.size());
  for (Eigen::Index i = 0; i < kx.size(); ++i) {
    m.kz[i] = forward_kz(eps - kx[i] * kx[i]);
    m.v_diag[i] = pol == Polarization::TE ? kI * m.kz[i] : kI * m.kz[i] / eps;
  }
  return m;
}

Modes grating_modes(const Vec& kx, const GratingSlab& slab, int order, Polarization pol) {
  const Eigen::Index m = kx.size();
  const Mat E = toeplitz(order, slab.eps_line, slab.eps_groove, slab.fill);
  Mat A;
  Mat P;
  if (pol == Polarization::TE) {
    A = Mat(kx.cwiseProduct(kx).asDiagonal()) - E;
  } else {
    P = toeplitz(order, 1.0 / slab.eps_line, 1.0 / slab.eps_groove, slab.fill);
    Eigen::PartialPivLU<Mat> e_lu(E);
    Mat kx_einv_kx = kx.asDiagonal() * e_lu.solve(Mat(kx.asDiagonal()));
    kx_einv_kx -= Mat::Identity(m, m);
    A = Eigen::PartialPivLU<Mat>(P).solve(kx_einv_kx);
  }

  Eigen::ComplexEigenSolver<Mat> solver(A, true);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::Numerical, "layer eigen-decomposition failed");
  }
  Modes modes;
  modes.homogeneous = false;
  modes.W = solver.eigenvectors();
  modes.kz.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) modes.kz[i] = forward_kz(-solver.eigenvalues()[i]);
  Vec ikz = kI * modes.kz;
  modes.V = modes.W * ikz.asDiagonal();
  if (pol == Polarization::TM) modes.V = P * modes.V;
  modes.W_lu.compute(modes.W);
  modes.V_lu.compute(modes.V);
  return modes;
}

// Layer modes do not depend on thickness, so a finite-difference step in a
// height parameter reuses every eigendecomposition of the base point. Entries
// are keyed on the exact inputs; a hit returns the same bits as recomputing.
struct ModeKey {
  double wavelength_nm, angle_deg, pitch_nm, eps_ambient, fill;
  cd eps_line, eps_groove;
  int order, polarization;

  bool operator==(const ModeKey&) const = default;
};

struct ModeKeyHash {
  std::size_t operator()(const ModeKey& k) const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](double v) { h = (h ^ std::bit_cast<std::uint64_t>(v)) * 0x100000001b3ULL; };
    for (double v : {k.wavelength_nm, k.angle_deg, k.pitch_nm, k.eps_ambient, k.fill, k.eps_line.real(),
                     k.eps_line.imag(), k.eps_groove.real(), k.eps_groove.imag()}) {
      mix(v);
    }
    mix(static_cast<double>(k.order * 2 + k.polarization));
    return static_cast<std::size_t>(h);
  }
};

class ModeCache {
 public:
  std::shared_ptr<const Modes> find(const ModeKey& key) {
    std::lock_guard lock(mutex_);
    const auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : it->second;
  }

  void clear() {
    std::lock_guard lock(mutex_);
    entries_.clear();
  }

  void insert(const ModeKey& key, std::shared_ptr<const Modes> modes) {
    std::lock_guard lock(mutex_);
    // A few evaluations' worth of layers; dropped wholesale when full.
    if (entries_.size() >= 4096) entries_.clear();
    entries_.emplace(key, std::move(modes));
  }

 private:
  std::mutex mutex_;
  std::unordered_map<ModeKey, std::shared_ptr<const Modes>, ModeKeyHash> entries_;
};

ModeCache& mode_cache() {
  static ModeCache cache;
  return cache;
}

void check_finite(const Mat& m, const char* what) {
  if (!m.allFinite()) {
    throw Error(ErrorKind::Numerical, std::string("non-finite values in ") + what);
  }
}

void validate(const LayerStack& stack, const PlanarIncidence& inc, int order) {
  if (!(stack.pitch_nm > 0.0)) throw Error(ErrorKind::Validation, "pitch must be positive");
  if (order < 0) throw Error(ErrorKind::Validation, "truncation order must be >= 0");
  if (!(inc.wavelength_nm > 0.0)) throw Error(ErrorKind::Validation, "wavelength must be positive");
  if (!(inc.angle_deg >= 0.0 && inc.angle_deg < 90.0)) {
    throw Error(ErrorKind::Validation, "angle of incidence must be in [0, 90)");
  }
  if (std::abs(stack.eps_ambient.imag()) > 0.0 || stack.eps_ambient.real() <= 0.0) {
    throw Error(ErrorKind::Validation, "ambient must be a lossless dielectric");
  }
  for (const auto& s : stack.slabs) {
    if (!(s.thickness_nm >= 0.0)) throw Error(ErrorKind::Validation, "slab thickness must be >= 0");
    if (!(s.fill >= 0.0 && s.fill <= 1.0)) throw Error(ErrorKind::Validation, "fill factor outside [0, 1]");
  }
}

}  // namespace

void clear_mode_cache() { mode_cache().clear(); }

double DiffractionResult::total_efficiency() const {
  double sum = 0.0;
  for (double e : reflected_efficiency) sum += e;
  for (double e : transmitted_efficiency) sum += e;
  return sum;
}

DiffractionResult rcwa_solve(const LayerStack& stack, const PlanarIncidence& inc, int order) {
  validate(stack, inc, order);
  const Eigen::Index m = 2 * order + 1;
  const double k0 = 2.0 * std::numbers::pi / inc.wavelength_nm;
  const double n_amb = std::sqrt(stack.eps_ambient.real());
  const double kx0 = n_amb * std::sin(inc.angle_deg * std::numbers::pi / 180.0);

  Vec kx(m);
  for (int i = 0; i < m; ++i) {
    const int p = i - order;
    kx[i] = kx0 - p * inc.wavelength_nm / stack.pitch_nm;
  }

  const Modes ambient = homogeneous_modes(kx, stack.eps_ambient, inc.polarization);
  const Modes substrate = homogeneous_modes(kx, stack.eps_substrate, inc.polarization);
  const Mat identity = Mat::Identity(m, m);

  // Bottom-up recursion. At the top of the region below the current
  // interface, up-going = R * down-going and substrate transmission =
  // T * down-going.
  Mat R = Mat::Zero(m, m);
  Mat T = identity;
  const Modes* below = &substrate;
  std::shared_ptr<const Modes> held;

  auto step_interface = [&](const Modes& above) {
    const Mat F = above.solve_w(below->apply_w(identity + R));
    const Mat G = above.solve_v(below->apply_v(identity - R));
    const Mat sum_inv = Eigen::PartialPivLU<Mat>(F + G).inverse();
    R = (F - G) * sum_inv;
    T = 2.0 * T * sum_inv;
  };

  for (auto it = stack.slabs.rbegin(); it != stack.slabs.rend(); ++it) {
    const GratingSlab& slab = *it;
    if (slab.thickness_nm <= 0.0) continue;
    std::shared_ptr<const Modes> modes;
    if (slab.homogeneous()) {
      modes = std::make_shared<const Modes>(homogeneous_modes(kx, uniform_permittivity(slab), inc.polarization));
    } else {
      const ModeKey key{inc.wavelength_nm, inc.angle_deg,  stack.pitch_nm, stack.eps_ambient.real(),
                        slab.fill,         slab.eps_line,   slab.eps_groove, order,
                        static_cast<int>(inc.polarization)};
      modes = mode_cache().find(key);
      if (!modes) {
        modes = std::make_shared<const Modes>(grating_modes(kx, slab, order, inc.polarization));
        mode_cache().insert(key, modes);
      }
    }
    step_interface(*modes);
    Vec phase(m);
    for (Eigen::Index i = 0; i < m; ++i) phase[i] = std::exp(kI * modes->kz[i] * (k0 * slab.thickness_nm));
    R = phase.asDiagonal() * R * phase.asDiagonal();
    T = T * phase.asDiagonal();
    check_finite(R, "layer reflection matrix");
    held = std::move(modes);
    below = held.get();
  }
  step_interface(ambient);
  check_finite(R, "stack reflection matrix");
  check_finite(T, "stack transmission matrix");

  DiffractionResult out;
  const cd kz_in = ambient.kz[order];
  out.orders.resize(m);
  out.reflected.resize(m);
  out.transmitted.resize(m);
  out.reflected_efficiency.resize(m);
  out.transmitted_efficiency.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    out.orders[i] = static_cast<int>(i) - order;
    out.reflected[i] = R(i, order);
    out.transmitted[i] = T(i, order);
    double refl_norm = (ambient.kz[i] / kz_in).real();
    double trans_norm = 0.0;
    if (inc.polarization == Polarization::TE) {
      trans_norm = (substrate.kz[i] / kz_in).real();
    } else {
      trans_norm = ((substrate.kz[i] / stack.eps_substrate) / (kz_in / stack.eps_ambient)).real();
    }
    out.reflected_efficiency[i] = std::norm(out.reflected[i]) * refl_norm;
    out.transmitted_efficiency[i] = std::norm(out.transmitted[i]) * trans_norm;
  }
  out.r0 = out.reflected[order];
  return out;
}

std::complex<double> rcwa_reflection(const LayerStack& stack, const PlanarIncidence& incidence,
                                     int truncation_order) {
  return rcwa_solve(stack, incidence, truncation_order).r0;
}

std::complex<double> film_reflection(const LayerStack& stack, const PlanarIncidence& inc) {
  validate(stack, inc, 0);
  const double k0 = 2.0 * std::numbers::pi / inc.wavelength_nm;
  const double kx = std::sqrt(stack.eps_ambient.real()) * std::sin(inc.angle_deg * std::numbers::pi / 180.0);
  const bool te = inc.polarization == Polarization::TE;
  auto admittance = [&](cd eps, cd kz) { return te ? kz : kz / eps; };

  const cd kz_amb = forward_kz(stack.eps_ambient - kx * kx);
  const cd kz_sub = forward_kz(stack.eps_substrate - kx * kx);
  const cd eta_amb = admittance(stack.eps_ambient, kz_amb);

  // [B; C] = prod_j M_j [1; eta_sub]
  Eigen::Matrix2cd total = Eigen::Matrix2cd::Identity();
  for (const auto& slab : stack.slabs) {
    if (!slab.homogeneous()) throw Error(ErrorKind::Validation, "film_reflection needs uniform films");
    const cd eps = uniform_permittivity(slab);
    const cd kz = forward_kz(eps - kx * kx);
    const cd eta = admittance(eps, kz);
    const cd delta = kz * k0 * slab.thickness_nm;
    Eigen::Matrix2cd layer;
    layer << std::cos(delta), -kI * std::sin(delta) / eta, -kI * eta * std::sin(delta), std::cos(delta);
    total = total * layer;
  }
  const Eigen::Vector2cd bc = total * Eigen::Vector2cd(1.0, admittance(stack.eps_substrate, kz_sub));
  return (eta_amb * bc[0] - bc[1]) / (eta_amb * bc[0] + bc[1]);
}

}  // namespace scatterlm
