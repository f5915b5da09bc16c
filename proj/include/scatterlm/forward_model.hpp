#pragma once

#include <complex>
#include <span>
#include <vector>

#include "scatterlm/materials.hpp"
#include "scatterlm/rcwa.hpp"
#include "scatterlm/signature.hpp"
#include "scatterlm/structure.hpp"

namespace scatterlm {

/// Measurement geometry and solver discretisation.
struct IncidenceConfig {
  double angle_deg = 65.0;
  double azimuth_deg = 0.0;
  std::vector<double> wavelengths;
  int truncation_order = 12;
  int staircase_slices = 16;

  void validate() const;

  /// Inclusive uniform grid start, start + step, ..., stop.
  static std::vector<double> grid(double start_nm, double stop_nm, double step_nm);
};

/// A structure bound to optical constants: maps profile parameters to
/// permittivity stacks and simulated signatures. Immutable and safe to share
/// across threads.
class ForwardModel {
 public:
  ForwardModel(StructureModel structure, MaterialLibrary materials);

  const StructureModel& structure() const noexcept { return structure_; }
  const MaterialLibrary& materials() const noexcept { return materials_; }
  std::vector<std::string> parameter_names() const { return structure_.parameter_names(); }

  LayerStack stack(const ParamMap& params, double wavelength_nm, int staircase_slices) const;

  std::complex<double> reflection(const ParamMap& params, const IncidenceConfig& incidence,
                                  double wavelength_nm, Polarization polarization) const;

  /// Signature over `wavelengths` (defaults to the incidence grid).
  Signature simulate(const ParamMap& params, const IncidenceConfig& incidence) const;
  Signature simulate(const ParamMap& params, const IncidenceConfig& incidence,
                     std::span<const double> wavelengths) const;

 private:
  StructureModel structure_;
  MaterialLibrary materials_;
};

Signature simulate_signature(const ForwardModel& model, const ParamMap& params,
                             const IncidenceConfig& incidence);

}  // namespace scatterlm
