#include "scatterlm/run_config.hpp"

#include "scatterlm/error.hpp"
#include "scatterlm/util.hpp"

namespace scatterlm {

using nlohmann::json;

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw Error(ErrorKind::Usage, "override must look like key.path=value, got '" + assignment + "'");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json* node = &j;
  std::size_t start = 0;
  for (;;) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw Error(ErrorKind::Usage, "empty key in override '" + assignment + "'");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

RunConfig run_config_from_json(json j, const std::filesystem::path& base_dir) {
  RunConfig c;
  try {
    c.structure_path = resolve(base_dir, j.at("structure").get<std::string>());
    c.materials_dir = resolve(base_dir, j.value("materials", std::string(SCATTERLM_DATA_DIR) + "/materials"));
    c.space = parameter_space_from_json(j);

    const json inc = j.value("incidence", json::object());
    c.incidence.angle_deg = inc.value("angle_deg", 65.0);
    c.incidence.azimuth_deg = inc.value("azimuth_deg", 0.0);
    c.incidence.wavelengths = IncidenceConfig::grid(inc.value("wavelength_start", 200.0),
                                                    inc.value("wavelength_stop", 800.0),
                                                    inc.value("wavelength_step", 10.0));
    c.incidence.truncation_order = inc.value("truncation_order", 12);
    c.incidence.staircase_slices = inc.value("staircase_slices", 16);

    c.k_points = j.value("k_points", 7);
    const json k = j.value("kernel", json::object());
    c.kernel.kind = parse_kernel_kind(k.value("kind", std::string("rbf")));
    c.kernel.factor = k.value("factor", 1.0);
    c.kernel.rbf_squared = k.value("rbf_squared", false);

    const json s = j.value("svm", json::object());
    c.svm.C = s.value("C", c.svm.C);
    c.svm.tol = s.value("tol", c.svm.tol);
    c.svm.max_iterations = s.value("max_iterations", c.svm.max_iterations);
    c.svm.cache_bytes = static_cast<std::size_t>(s.value("cache_mb", 512)) << 20;

    const json l = j.value("lm", json::object());
    c.lm.max_iterations = l.value("max_iterations", c.lm.max_iterations);
    c.lm.cost_tolerance = l.value("cost_tolerance", c.lm.cost_tolerance);
    c.lm.step_tolerance = l.value("step_tolerance", c.lm.step_tolerance);
    c.lm.initial_damping = l.value("initial_damping", c.lm.initial_damping);
    c.lm.damping_up = l.value("damping_up", c.lm.damping_up);
    c.lm.damping_down = l.value("damping_down", c.lm.damping_down);
    c.lm.fd_step = l.value("fd_step", c.lm.fd_step);

    const json e = j.value("errors", json::object());
    c.errors.random_magnitude = e.value("random_magnitude", 0.0);
    c.errors.offset_magnitude = e.value("offset_magnitude", 0.0);

    const json seeds = j.value("seeds", json::object());
    c.train_seed = seeds.value("train", std::uint64_t{1});
    c.bench_seed = seeds.value("bench", std::uint64_t{2});
    c.noise_seed = seeds.value("noise", std::uint64_t{3});
    c.errors.seed = c.noise_seed;

    const json b = j.value("bench", json::object());
    c.n_cases = b.value("n_cases", 100);
    c.lm_only_init = b.value("lm_only_init", std::string("median"));

    c.output_dir = resolve(base_dir, j.value("output", std::string("out")));
  } catch (const json::exception& ex) {
    throw Error(ErrorKind::Parse, std::string("config: ") + ex.what());
  }
  c.raw = std::move(j);
  c.validate();
  return c;
}

void RunConfig::validate() const {
  if (!std::filesystem::is_regular_file(structure_path)) {
    throw Error(ErrorKind::Validation, "structure file not found: " + structure_path.string());
  }
  if (!std::filesystem::is_directory(materials_dir)) {
    throw Error(ErrorKind::Validation, "materials directory not found: " + materials_dir.string());
  }
  space.validate();
  incidence.validate();
  kernel.validate();
  svm.validate();
  lm.validate();
  errors.validate();
  if (k_points < 2 || static_cast<std::size_t>(k_points) > incidence.wavelengths.size()) {
    throw Error(ErrorKind::Validation, "k_points must lie in [2, grid length]");
  }
  if (n_cases < 0) throw Error(ErrorKind::Validation, "bench.n_cases must be >= 0");
  if (lm_only_init != "median" && lm_only_init != "low") {
    throw Error(ErrorKind::Validation, "bench.lm_only_init must be 'median' or 'low'");
  }
}

std::string RunConfig::hash() const { return fnv1a_hex(raw.dump()); }

RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  json j = read_json_file(path);
  for (const auto& o : overrides) apply_override(j, o);
  return run_config_from_json(std::move(j), path.parent_path());
}

StructureModel load_config_structure(const RunConfig& config) { return load_structure(config.structure_path); }

MaterialLibrary load_config_materials(const RunConfig& config) {
  return MaterialLibrary::load_directory(config.materials_dir);
}

}  // namespace scatterlm
