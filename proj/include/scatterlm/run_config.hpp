#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scatterlm/forward_model.hpp"
#include "scatterlm/lm_solver.hpp"
#include "scatterlm/pipeline.hpp"
#include "scatterlm/svm.hpp"

namespace scatterlm {

/// Everything a command needs, read from one JSON file. Relative paths are
/// resolved against the file's directory.
struct RunConfig {
  nlohmann::json raw;
  std::filesystem::path structure_path;
  std::filesystem::path materials_dir;
  ParameterSpace space;
  IncidenceConfig incidence;
  int k_points = 7;
  KernelSpec kernel;
  SvmConfig svm;
  LmConfig lm;
  ErrorSpec errors;
  std::uint64_t train_seed = 1;
  std::uint64_t bench_seed = 2;
  std::uint64_t noise_seed = 3;
  int n_cases = 100;
  std::string lm_only_init = "median";
  std::filesystem::path output_dir;

  /// Checks that referenced files exist and every field is in range.
  void validate() const;
  /// FNV-1a of the canonical (sorted-key) JSON, 16 hex digits.
  std::string hash() const;
};

/// Applies "a.b.c=value" overrides; the value is parsed as JSON when it
/// parses, otherwise taken as a string.
void apply_override(nlohmann::json& j, const std::string& assignment);

RunConfig run_config_from_json(nlohmann::json j, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

StructureModel load_config_structure(const RunConfig& config);
MaterialLibrary load_config_materials(const RunConfig& config);

}  // namespace scatterlm
