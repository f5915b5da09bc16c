#pragma once

#include <filesystem>

#include "scatterlm/forward_model.hpp"

namespace test_support {

inline std::filesystem::path source_dir() { return SCATTERLM_SOURCE_DIR; }

inline scatterlm::MaterialLibrary materials() {
  return scatterlm::MaterialLibrary::load_directory(source_dir() / "data" / "materials");
}

inline scatterlm::ForwardModel si_grating_model() {
  return {scatterlm::load_structure(source_dir() / "configs" / "structures" / "si_grating.json"), materials()};
}

inline scatterlm::ForwardModel multilayer_model() {
  return {scatterlm::load_structure(source_dir() / "configs" / "structures" / "multilayer.json"), materials()};
}

}  // namespace test_support
