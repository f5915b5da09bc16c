#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace scatterlm {

/// Named profile parameters, values in nm.
using ParamMap = std::map<std::string, double>;

/// A geometric quantity that is either a fixed constant or bound to a
/// named profile parameter.
struct Dimension {
  double value = 0.0;
  std::string parameter;

  static Dimension fixed(double v) { return {v, {}}; }
  static Dimension bound(std::string name) { return {0.0, std::move(name)}; }

  bool is_bound() const noexcept { return !parameter.empty(); }
  double resolve(const ParamMap& params) const;
};

enum class LayerKind { Film, Lamellar, Trapezoid };

std::string to_string(LayerKind kind);

/// One layer of the grating stack. Films use only `line_material`; lamellar
/// layers use `line_width`; trapezoids use `top_width` and `bottom_width`.
struct Layer {
  LayerKind kind = LayerKind::Film;
  Dimension thickness;
  std::string line_material;
  std::string groove_material;
  Dimension line_width;
  Dimension top_width;
  Dimension bottom_width;
};

/// Parametric 1D grating, layers ordered top (ambient side) to bottom.
struct StructureModel {
  double pitch_nm = 0.0;
  std::string ambient = "vacuum";
  std::string substrate;
  std::vector<Layer> layers;

  /// Distinct bound parameter names in order of first appearance.
  std::vector<std::string> parameter_names() const;
  void validate() const;
};

StructureModel structure_from_json(const nlohmann::json& j);
nlohmann::json structure_to_json(const StructureModel& model);
StructureModel load_structure(const std::filesystem::path& path);

/// Stable 64-bit FNV-1a hash of the canonical JSON form, as 16 hex digits.
std::string structure_hash(const StructureModel& model);

/// A layer with every dimension resolved to nm.
struct ConcreteLayer {
  LayerKind kind = LayerKind::Film;
  double thickness_nm = 0.0;
  std::string line_material;
  std::string groove_material;
  double line_width_nm = 0.0;
  double top_width_nm = 0.0;
  double bottom_width_nm = 0.0;
};

/// Staircase approximation: `n_slices` lamellar layers of equal thickness,
/// each with the trapezoid width at the slice mid-height.
std::vector<ConcreteLayer> slice_trapezoid(const ConcreteLayer& trapezoid, int n_slices);

/// Resolves every bound dimension, checks 0 < CD <= pitch, drops
/// zero-thickness layers and staircases trapezoids. The result contains only
/// films and lamellar layers.
std::vector<ConcreteLayer> instantiate(const StructureModel& model, const ParamMap& params,
                                       int n_slices);

}  // namespace scatterlm
