#include "scatterlm/structure.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "scatterlm/error.hpp"
#include "scatterlm/util.hpp"

namespace scatterlm {

double Dimension::resolve(const ParamMap& params) const {
  if (!is_bound()) return value;
  auto it = params.find(parameter);
  if (it == params.end()) throw Error(ErrorKind::Validation, "missing parameter '" + parameter + "'");
  return it->second;
}

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Film: return "film";
    case LayerKind::Lamellar: return "lamellar";
    case LayerKind::Trapezoid: return "trapezoid";
  }
  return "film";
}

namespace {

LayerKind parse_kind(const std::string& s) {
  if (s == "film") return LayerKind::Film;
  if (s == "lamellar") return LayerKind::Lamellar;
  if (s == "trapezoid") return LayerKind::Trapezoid;
  throw Error(ErrorKind::Parse, "unknown layer kind '" + s + "'");
}

Dimension parse_dimension(const nlohmann::json& layer, const char* key) {
  if (!layer.contains(key)) throw Error(ErrorKind::Parse, std::string("layer missing '") + key + "'");
  const auto& v = layer.at(key);
  if (v.is_number()) return Dimension::fixed(v.get<double>());
  if (v.is_string()) return Dimension::bound(v.get<std::string>());
  throw Error(ErrorKind::Parse, std::string("layer field '") + key + "' must be a number or parameter name");
}

nlohmann::json dimension_json(const Dimension& d) {
  if (d.is_bound()) return d.parameter;
  return d.value;
}

void check_width(double w, double pitch, const std::string& what) {
  if (!(w > 0.0 && w <= pitch)) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s = %g nm outside (0, pitch = %g nm]", what.c_str(), w, pitch);
    throw Error(ErrorKind::Range, buf);
  }
}

}  // namespace

std::vector<std::string> StructureModel::parameter_names() const {
  std::vector<std::string> names;
  auto visit = [&](const Dimension& d) {
    if (d.is_bound() && std::find(names.begin(), names.end(), d.parameter) == names.end()) {
      names.push_back(d.parameter);
    }
  };
  for (const auto& l : layers) {
    visit(l.thickness);
    if (l.kind == LayerKind::Lamellar) visit(l.line_width);
    if (l.kind == LayerKind::Trapezoid) {
      visit(l.top_width);
      visit(l.bottom_width);
    }
  }
  return names;
}

void StructureModel::validate() const {
  if (!(pitch_nm > 0.0)) throw Error(ErrorKind::Validation, "pitch must be positive");
  if (substrate.empty()) throw Error(ErrorKind::Validation, "substrate material not set");
  for (const auto& l : layers) {
    if (l.line_material.empty()) throw Error(ErrorKind::Validation, "layer without line material");
    if (l.kind != LayerKind::Film && l.groove_material.empty()) {
      throw Error(ErrorKind::Validation, "patterned layer without groove material");
    }
    if (!l.thickness.is_bound() && !(l.thickness.value > 0.0)) {
      throw Error(ErrorKind::Validation, "fixed layer thickness must be positive");
    }
    auto fixed_width = [&](const Dimension& d, const char* what) {
      if (!d.is_bound()) check_width(d.value, pitch_nm, what);
    };
    if (l.kind == LayerKind::Lamellar) fixed_width(l.line_width, "line width");
    if (l.kind == LayerKind::Trapezoid) {
      fixed_width(l.top_width, "top width");
      fixed_width(l.bottom_width, "bottom width");
    }
  }
}

StructureModel structure_from_json(const nlohmann::json& j) {
  StructureModel m;
  try {
    m.pitch_nm = j.at("pitch").get<double>();
    m.ambient = j.value("ambient", std::string("vacuum"));
    m.substrate = j.at("substrate").get<std::string>();
    for (const auto& lj : j.at("layers")) {
      Layer l;
      l.kind = parse_kind(lj.at("kind").get<std::string>());
      l.thickness = parse_dimension(lj, "thickness");
      l.line_material = lj.at("line").get<std::string>();
      if (l.kind != LayerKind::Film) l.groove_material = lj.at("groove").get<std::string>();
      if (l.kind == LayerKind::Lamellar) l.line_width = parse_dimension(lj, "width");
      if (l.kind == LayerKind::Trapezoid) {
        l.top_width = parse_dimension(lj, "top_width");
        l.bottom_width = parse_dimension(lj, "bottom_width");
      }
      m.layers.push_back(std::move(l));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("structure definition: ") + e.what());
  }
  m.validate();
  return m;
}

nlohmann::json structure_to_json(const StructureModel& m) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : m.layers) {
    nlohmann::json lj;
    lj["kind"] = to_string(l.kind);
    lj["thickness"] = dimension_json(l.thickness);
    lj["line"] = l.line_material;
    if (l.kind != LayerKind::Film) lj["groove"] = l.groove_material;
    if (l.kind == LayerKind::Lamellar) lj["width"] = dimension_json(l.line_width);
    if (l.kind == LayerKind::Trapezoid) {
      lj["top_width"] = dimension_json(l.top_width);
      lj["bottom_width"] = dimension_json(l.bottom_width);
    }
    layers.push_back(std::move(lj));
  }
  return {{"pitch", m.pitch_nm}, {"ambient", m.ambient}, {"substrate", m.substrate}, {"layers", layers}};
}

StructureModel load_structure(const std::filesystem::path& path) {
  return structure_from_json(read_json_file(path));
}

std::string structure_hash(const StructureModel& model) {
  return fnv1a_hex(structure_to_json(model).dump());
}

std::vector<ConcreteLayer> slice_trapezoid(const ConcreteLayer& trapezoid, int n_slices) {
  if (trapezoid.kind != LayerKind::Trapezoid) {
    throw Error(ErrorKind::Validation, "slice_trapezoid needs a trapezoid layer");
  }
  if (n_slices < 1) throw Error(ErrorKind::Validation, "n_slices must be >= 1");
  std::vector<ConcreteLayer> out;
  out.reserve(n_slices);
  const double dz = trapezoid.thickness_nm / n_slices;
  for (int j = 0; j < n_slices; ++j) {
    // j = 0 is the topmost slice
    const double depth = (j + 0.5) / n_slices;
    ConcreteLayer s;
    s.kind = LayerKind::Lamellar;
    s.thickness_nm = dz;
    s.line_material = trapezoid.line_material;
    s.groove_material = trapezoid.groove_material;
    s.line_width_nm = trapezoid.top_width_nm + (trapezoid.bottom_width_nm - trapezoid.top_width_nm) * depth;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<ConcreteLayer> instantiate(const StructureModel& model, const ParamMap& params,
                                       int n_slices) {
  model.validate();
  std::vector<ConcreteLayer> out;
  for (const auto& l : model.layers) {
    ConcreteLayer c;
    c.kind = l.kind;
    c.thickness_nm = l.thickness.resolve(params);
    c.line_material = l.line_material;
    c.groove_material = l.groove_material;
    if (!std::isfinite(c.thickness_nm) || c.thickness_nm < 0.0) {
      throw Error(ErrorKind::Range, "layer thickness must be >= 0");
    }
    if (l.kind == LayerKind::Lamellar) {
      c.line_width_nm = l.line_width.resolve(params);
      check_width(c.line_width_nm, model.pitch_nm, "line width");
    }
    if (l.kind == LayerKind::Trapezoid) {
      c.top_width_nm = l.top_width.resolve(params);
      c.bottom_width_nm = l.bottom_width.resolve(params);
      check_width(c.top_width_nm, model.pitch_nm, "top width");
      check_width(c.bottom_width_nm, model.pitch_nm, "bottom width");
    }
    if (c.thickness_nm == 0.0) continue;
    if (c.kind == LayerKind::Trapezoid) {
      for (auto& s : slice_trapezoid(c, n_slices)) out.push_back(std::move(s));
    } else {
      out.push_back(std::move(c));
    }
  }
  return out;
}

}  // namespace scatterlm
