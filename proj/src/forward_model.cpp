#include "scatterlm/forward_model.hpp"

#include <cmath>

#include "scatterlm/error.hpp"

namespace scatterlm {

void IncidenceConfig::validate() const {
  if (!(angle_deg >= 0.0 && angle_deg < 90.0)) {
    throw Error(ErrorKind::Validation, "angle of incidence must be in [0, 90)");
  }
  if (azimuth_deg != 0.0) throw Error(ErrorKind::Validation, "only azimuth 0 (planar mount) is supported");
  if (truncation_order < 0) throw Error(ErrorKind::Validation, "truncation order must be >= 0");
  if (staircase_slices < 1) throw Error(ErrorKind::Validation, "staircase slices must be >= 1");
  for (std::size_t i = 1; i < wavelengths.size(); ++i) {
    if (!(wavelengths[i] > wavelengths[i - 1])) {
      throw Error(ErrorKind::Validation, "wavelength grid must be strictly increasing");
    }
  }
}

std::vector<double> IncidenceConfig::grid(double start_nm, double stop_nm, double step_nm) {
  if (!(step_nm > 0.0) || stop_nm < start_nm) throw Error(ErrorKind::Validation, "invalid wavelength grid");
  const auto count = static_cast<std::size_t>(std::floor((stop_nm - start_nm) / step_nm + 1e-9)) + 1;
  std::vector<double> g(count);
  for (std::size_t i = 0; i < count; ++i) g[i] = start_nm + step_nm * static_cast<double>(i);
  return g;
}

ForwardModel::ForwardModel(StructureModel structure, MaterialLibrary materials)
    : structure_(std::move(structure)), materials_(std::move(materials)) {
  structure_.validate();
  auto require = [&](const std::string& name) {
    if (!materials_.contains(name)) {
      throw Error(ErrorKind::Validation, "structure references unknown material '" + name + "'");
    }
  };
  require(structure_.ambient);
  require(structure_.substrate);
  for (const auto& l : structure_.layers) {
    require(l.line_material);
    if (l.kind != LayerKind::Film) require(l.groove_material);
  }
}

LayerStack ForwardModel::stack(const ParamMap& params, double wavelength_nm, int staircase_slices) const {
  LayerStack s;
  s.pitch_nm = structure_.pitch_nm;
  s.eps_ambient = materials_.permittivity(structure_.ambient, wavelength_nm);
  s.eps_substrate = materials_.permittivity(structure_.substrate, wavelength_nm);
  for (const auto& layer : instantiate(structure_, params, staircase_slices)) {
    GratingSlab slab;
    slab.thickness_nm = layer.thickness_nm;
    slab.eps_line = materials_.permittivity(layer.line_material, wavelength_nm);
    if (layer.kind == LayerKind::Film) {
      slab.eps_groove = slab.eps_line;
      slab.fill = 1.0;
    } else {
      slab.eps_groove = materials_.permittivity(layer.groove_material, wavelength_nm);
      slab.fill = layer.line_width_nm / structure_.pitch_nm;
    }
    s.slabs.push_back(slab);
  }
  return s;
}

std::complex<double> ForwardModel::reflection(const ParamMap& params, const IncidenceConfig& incidence,
                                              double wavelength_nm, Polarization polarization) const {
  const LayerStack s = stack(params, wavelength_nm, incidence.staircase_slices);
  return rcwa_reflection(s, {incidence.angle_deg, wavelength_nm, polarization}, incidence.truncation_order);
}

Signature ForwardModel::simulate(const ParamMap& params, const IncidenceConfig& incidence) const {
  return simulate(params, incidence, incidence.wavelengths);
}

Signature ForwardModel::simulate(const ParamMap& params, const IncidenceConfig& incidence,
                                 std::span<const double> wavelengths) const {
  incidence.validate();
  for (const auto& name : structure_.parameter_names()) {
    if (!params.count(name)) throw Error(ErrorKind::Validation, "missing parameter '" + name + "'");
  }
  Signature sig;
  sig.wavelengths.assign(wavelengths.begin(), wavelengths.end());
  sig.mueller.reserve(wavelengths.size());
  for (double lambda : wavelengths) {
    const LayerStack s = stack(params, lambda, incidence.staircase_slices);
    const auto r_te = rcwa_reflection(s, {incidence.angle_deg, lambda, Polarization::TE},
                                      incidence.truncation_order);
    const auto r_tm = rcwa_reflection(s, {incidence.angle_deg, lambda, Polarization::TM},
                                      incidence.truncation_order);
    sig.mueller.push_back(jones_to_mueller(r_tm, r_te));
  }
  return sig;
}

Signature simulate_signature(const ForwardModel& model, const ParamMap& params,
                             const IncidenceConfig& incidence) {
  return model.simulate(params, incidence);
}

}  // namespace scatterlm
