#pragma once

#include <complex>
#include <vector>

namespace scatterlm {

enum class Polarization { TE, TM };

/// One z-invariant slab of a 1D grating: a single line of permittivity
/// `eps_line` centred at x = 0 with width `fill * pitch`, surrounded by
/// `eps_groove`. fill = 0 or 1 (or equal permittivities) is a uniform film.
struct GratingSlab {
  double thickness_nm = 0.0;
  std::complex<double> eps_line{1.0, 0.0};
  std::complex<double> eps_groove{1.0, 0.0};
  double fill = 1.0;

  bool homogeneous() const noexcept {
    return fill <= 0.0 || fill >= 1.0 || eps_line == eps_groove;
  }
};

/// Permittivity stack, slabs ordered top (ambient side) to bottom.
struct LayerStack {
  double pitch_nm = 1.0;
  std::complex<double> eps_ambient{1.0, 0.0};
  std::complex<double> eps_substrate{1.0, 0.0};
  std::vector<GratingSlab> slabs;
};

/// Planar-mount incidence for the solver: polar angle in the x-z plane.
struct PlanarIncidence {
  double angle_deg = 65.0;
  double wavelength_nm = 500.0;
  Polarization polarization = Polarization::TE;
};

struct DiffractionResult {
  /// Specular reflection coefficient. TE: ratio of E_y amplitudes; TM: ratio
  /// of H_y amplitudes (equal to the ellipsometric r_p).
  std::complex<double> r0;
  std::vector<int> orders;
  std::vector<std::complex<double>> reflected;
  std::vector<std::complex<double>> transmitted;
  /// Diffraction efficiencies; zero for evanescent orders.
  std::vector<double> reflected_efficiency;
  std::vector<double> transmitted_efficiency;

  double total_efficiency() const;
};

/// Rigorous coupled-wave analysis, orders -N..N, e^{-i omega t} convention.
/// Layer eigenmodes come from the Toeplitz permittivity matrix (TE) or the
/// inverse-rule factorisation P^{-1}(Kx E^{-1} Kx - I) with P the Toeplitz
/// matrix of 1/eps (TM). The stack is assembled bottom-up by a scattering
/// matrix recursion in which only decaying exponentials appear, so any layer
/// thickness is safe.
DiffractionResult rcwa_solve(const LayerStack& stack, const PlanarIncidence& incidence,
                             int truncation_order);

/// Patterned-layer eigenmodes are memoised process-wide (bounded). Results are
/// bit-identical with or without a cached entry; this releases the memory.
void clear_mode_cache();

std::complex<double> rcwa_reflection(const LayerStack& stack, const PlanarIncidence& incidence,
                                     int truncation_order);

/// Abeles characteristic-matrix reflection coefficient of a stack of uniform
/// films. Independent of the RCWA code path; throws if a slab is patterned.
std::complex<double> film_reflection(const LayerStack& stack, const PlanarIncidence& incidence);

}  // namespace scatterlm
