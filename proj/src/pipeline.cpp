#include "scatterlm/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <tuple>

#include "scatterlm/error.hpp"
#include "scatterlm/util.hpp"

namespace scatterlm {

using nlohmann::json;

std::vector<Subrange> ParameterSpec::subranges() const {
  std::vector<Subrange> out;
  const double width = (high - low) / n_subranges;
  for (int j = 0; j < n_subranges; ++j) {
    const double a = j == 0 ? low : low + width * j;
    const double b = j == n_subranges - 1 ? high : low + width * (j + 1);
    out.emplace_back(a, b);
  }
  return out;
}

int ParameterSpec::subrange_of(double value) const {
  const auto subs = subranges();
  for (int j = 0; j < n_subranges; ++j) {
    if (value < subs[j].second) return j;
  }
  return n_subranges - 1;
}

double subrange_median(const Subrange& s) { return (s.first + s.second) / 2.0; }

void ParameterSpace::validate() const {
  if (params.empty()) throw Error(ErrorKind::Validation, "parameter space is empty");
  std::set<std::string> seen;
  for (const auto& p : params) {
    if (p.name.empty()) throw Error(ErrorKind::Validation, "parameter without a name");
    if (!seen.insert(p.name).second) throw Error(ErrorKind::Validation, "duplicate parameter '" + p.name + "'");
    if (!(p.low < p.high)) throw Error(ErrorKind::Validation, "parameter '" + p.name + "' needs low < high");
    if (p.n_subranges < 2) throw Error(ErrorKind::Validation, "parameter '" + p.name + "' needs >= 2 sub-ranges");
    if (p.samples_per_subrange < 1 || p.samples_full_range < 1) {
      throw Error(ErrorKind::Validation, "parameter '" + p.name + "' sample counts must be >= 1");
    }
  }
}

std::size_t ParameterSpace::index(const std::string& name) const {
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].name == name) return i;
  }
  throw Error(ErrorKind::Validation, "unknown parameter '" + name + "'");
}

std::vector<ParamBound> ParameterSpace::bounds() const {
  std::vector<ParamBound> out;
  for (const auto& p : params) out.push_back({p.name, p.low, p.high});
  return out;
}

ParamMap ParameterSpace::medians() const {
  ParamMap m;
  for (const auto& p : params) m[p.name] = p.median();
  return m;
}

ParamMap ParameterSpace::lows() const {
  ParamMap m;
  for (const auto& p : params) m[p.name] = p.low;
  return m;
}

long ParameterSpace::pairs_per_class(std::size_t i) const {
  long n = params.at(i).samples_per_subrange;
  for (std::size_t l = 0; l < params.size(); ++l) {
    if (l != i) n *= params[l].samples_full_range;
  }
  return n;
}

ParameterSpace parameter_space_from_json(const json& j) {
  ParameterSpace space;
  for (const auto& e : j.at("parameters")) {
    ParameterSpec p;
    p.name = e.at("name").get<std::string>();
    const auto range = e.at("range");
    if (!range.is_array() || range.size() != 2) {
      throw Error(ErrorKind::Validation, "parameter '" + p.name + "' range must be [low, high]");
    }
    p.low = range[0].get<double>();
    p.high = range[1].get<double>();
    p.n_subranges = e.value("subranges", 4);
    p.samples_per_subrange = e.value("samples_per_subrange", 8);
    p.samples_full_range = e.value("samples_full_range", 8);
    space.params.push_back(p);
  }
  space.validate();
  return space;
}

json parameter_space_to_json(const ParameterSpace& space) {
  json arr = json::array();
  for (const auto& p : space.params) {
    arr.push_back({{"name", p.name},
                   {"range", {p.low, p.high}},
                   {"subranges", p.n_subranges},
                   {"samples_per_subrange", p.samples_per_subrange},
                   {"samples_full_range", p.samples_full_range}});
  }
  return {{"parameters", arr}};
}

namespace {

double uniform_in(std::mt19937_64& rng, double a, double b) {
  // Explicit mapping instead of uniform_real_distribution: its output is
  // implementation-defined, this is not.
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return a + (b - a) * u;
}

constexpr std::uint64_t kTestStream = 0x7e57;
constexpr std::uint64_t kCaseStream = 0xca5e;

}  // namespace

ParamMap sample_uniform(const ParameterSpace& space, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ParamMap m;
  for (const auto& p : space.params) m[p.name] = uniform_in(rng, p.low, p.high);
  return m;
}

std::vector<std::pair<ParamMap, int>> training_samples(const ParameterSpace& space, std::size_t i,
                                                      std::uint64_t seed) {
  space.validate();
  if (i >= space.size()) throw Error(ErrorKind::Validation, "parameter index out of range");
  const auto& target = space.params[i];
  const auto subs = target.subranges();
  std::vector<std::pair<ParamMap, int>> out;
  for (int j = 0; j < target.n_subranges; ++j) {
    std::mt19937_64 rng(derive_seed(seed, i, static_cast<std::uint64_t>(j)));
    // Per-parameter value lists, then their cross product.
    std::vector<std::vector<double>> values(space.size());
    for (std::size_t l = 0; l < space.size(); ++l) {
      const auto& p = space.params[l];
      if (l == i) {
        for (int s = 0; s < p.samples_per_subrange; ++s) values[l].push_back(uniform_in(rng, subs[j].first, subs[j].second));
      } else {
        for (int s = 0; s < p.samples_full_range; ++s) values[l].push_back(uniform_in(rng, p.low, p.high));
      }
    }
    std::vector<std::size_t> odometer(space.size(), 0);
    bool more = true;
    while (more) {
      ParamMap m;
      for (std::size_t l = 0; l < space.size(); ++l) m[space.params[l].name] = values[l][odometer[l]];
      out.emplace_back(std::move(m), j);
      more = false;
      for (std::size_t l = space.size(); l-- > 0;) {
        if (++odometer[l] < values[l].size()) {
          more = true;
          break;
        }
        odometer[l] = 0;
      }
    }
  }
  return out;
}

namespace {

std::string describe(const ParamMap& m) {
  std::string s;
  for (const auto& [k, v] : m) s += (s.empty() ? "" : ", ") + k + "=" + format_double(v);
  return s;
}

/// Simulates every sample at `wavelengths`; failures name the combination.
std::vector<Signature> simulate_all(const std::vector<ParamMap>& samples, const ForwardModel& model,
                                    const IncidenceConfig& incidence, const std::vector<double>& wavelengths,
                                    int workers) {
  std::vector<Signature> out(samples.size());
  parallel_for(samples.size(), workers, [&](std::size_t s) {
    try {
      out[s] = model.simulate(samples[s], incidence, wavelengths);
    } catch (const Error& e) {
      throw Error(e.kind(), std::string(e.what()) + " (at " + describe(samples[s]) + ")");
    }
  });
  return out;
}

std::vector<double> pick(const std::vector<double>& grid, const std::vector<std::size_t>& idx) {
  std::vector<double> out;
  for (auto i : idx) out.push_back(grid.at(i));
  return out;
}

}  // namespace

TrainingSet generate_training_sets(const ParameterSpace& space, std::size_t i, const ForwardModel& model,
                                   const IncidenceConfig& incidence, int k_points, std::uint64_t seed,
                                   int workers) {
  incidence.validate();
  const auto wl = pick(incidence.wavelengths, subsample_indices(incidence.wavelengths, k_points));
  const auto samples = training_samples(space, i, seed);
  std::vector<ParamMap> params;
  for (const auto& s : samples) params.push_back(s.first);
  const auto sigs = simulate_all(params, model, incidence, wl, workers);
  TrainingSet set;
  set.class_count = space.params[i].n_subranges;
  for (std::size_t s = 0; s < samples.size(); ++s) {
    set.x.push_back(flatten(sigs[s]));
    set.y.push_back(samples[s].second);
  }
  return set;
}

void ClassifierBundle::validate() const {
  space.validate();
  if (models.size() != space.size()) throw Error(ErrorKind::Validation, "bundle model count != parameter count");
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (models[i].class_labels.size() != static_cast<std::size_t>(space.params[i].n_subranges)) {
      throw Error(ErrorKind::Validation, "bundle model for '" + space.params[i].name + "' has wrong class count");
    }
  }
  if (wavelengths.size() != static_cast<std::size_t>(k_points)) {
    throw Error(ErrorKind::Validation, "bundle wavelength count != k_points");
  }
}

ClassifierBundle train_classifiers(const ParameterSpace& space, const ForwardModel& model,
                                   const IncidenceConfig& incidence, const TrainOptions& options) {
  space.validate();
  incidence.validate();
  options.kernel.validate();
  options.svm.validate();
  ClassifierBundle bundle;
  bundle.space = space;
  bundle.kernel = options.kernel;
  bundle.k_points = options.k_points;
  bundle.wavelengths = pick(incidence.wavelengths, subsample_indices(incidence.wavelengths, options.k_points));
  bundle.incidence = incidence;
  bundle.structure_hash = structure_hash(model.structure());
  bundle.seed = options.seed;
  for (std::size_t i = 0; i < space.size(); ++i) {
    const TrainingSet set =
        generate_training_sets(space, i, model, incidence, options.k_points, options.seed, options.workers);
    const auto subs = space.params[i].subranges();
    if (options.training_set_dir) {
      TrainingSetInfo info{space.params[i].name, options.k_points, bundle.wavelengths, subs};
      write_text_file(*options.training_set_dir / ("training_" + space.params[i].name + ".txt"),
                      format_training_set(set, info));
    }
    bundle.models.push_back(ovo_train(set, options.kernel, options.svm, subs, options.workers));
  }
  return bundle;
}

namespace {

constexpr int kBundleFormatVersion = 1;

json incidence_to_json(const IncidenceConfig& inc) {
  return {{"angle_deg", inc.angle_deg},
          {"azimuth_deg", inc.azimuth_deg},
          {"wavelengths", inc.wavelengths},
          {"truncation_order", inc.truncation_order},
          {"staircase_slices", inc.staircase_slices}};
}

IncidenceConfig incidence_from_json(const json& j) {
  IncidenceConfig inc;
  inc.angle_deg = j.at("angle_deg").get<double>();
  inc.azimuth_deg = j.at("azimuth_deg").get<double>();
  inc.wavelengths = j.at("wavelengths").get<std::vector<double>>();
  inc.truncation_order = j.at("truncation_order").get<int>();
  inc.staircase_slices = j.at("staircase_slices").get<int>();
  return inc;
}

}  // namespace

void save_bundle(const std::filesystem::path& dir, const ClassifierBundle& bundle) {
  bundle.validate();
  json manifest;
  manifest["format_version"] = kBundleFormatVersion;
  manifest["structure_hash"] = bundle.structure_hash;
  manifest["seed"] = bundle.seed;
  manifest["k_points"] = bundle.k_points;
  manifest["wavelengths"] = bundle.wavelengths;
  manifest["kernel"] = {{"kind", to_string(bundle.kernel.kind)},
                        {"factor", bundle.kernel.factor},
                        {"rbf_squared", bundle.kernel.rbf_squared}};
  manifest["incidence"] = incidence_to_json(bundle.incidence);
  manifest["space"] = parameter_space_to_json(bundle.space);
  json files = json::array();
  for (std::size_t i = 0; i < bundle.models.size(); ++i) {
    const std::string file = "model_" + bundle.space.params[i].name + ".txt";
    save_model(dir / file, bundle.models[i]);
    files.push_back(file);
  }
  manifest["models"] = files;
  write_text_file(dir / "bundle.json", manifest.dump(2) + "\n");
}

ClassifierBundle load_bundle(const std::filesystem::path& dir) {
  const json m = read_json_file(dir / "bundle.json");
  try {
    if (m.at("format_version").get<int>() != kBundleFormatVersion) {
      throw Error(ErrorKind::Compatibility, "unsupported bundle format_version in " + dir.string());
    }
    ClassifierBundle b;
    b.structure_hash = m.at("structure_hash").get<std::string>();
    b.seed = m.at("seed").get<std::uint64_t>();
    b.k_points = m.at("k_points").get<int>();
    b.wavelengths = m.at("wavelengths").get<std::vector<double>>();
    b.kernel.kind = parse_kernel_kind(m.at("kernel").at("kind").get<std::string>());
    b.kernel.factor = m.at("kernel").at("factor").get<double>();
    b.kernel.rbf_squared = m.at("kernel").at("rbf_squared").get<bool>();
    b.incidence = incidence_from_json(m.at("incidence"));
    b.space = parameter_space_from_json(m.at("space"));
    for (const auto& f : m.at("models")) b.models.push_back(load_model(dir / f.get<std::string>()));
    b.validate();
    return b;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, "bad bundle manifest " + (dir / "bundle.json").string() + ": " + e.what());
  }
}

std::vector<SubrangeMapping> map_to_subranges(const ClassifierBundle& bundle, const Signature& measured) {
  std::vector<std::size_t> idx;
  for (double w : bundle.wavelengths) {
    const auto it = std::find_if(measured.wavelengths.begin(), measured.wavelengths.end(),
                                 [&](double v) { return std::abs(v - w) < 1e-9; });
    if (it == measured.wavelengths.end()) {
      throw Error(ErrorKind::Validation, "measured grid lacks bundle wavelength " + format_double(w) + " nm");
    }
    idx.push_back(static_cast<std::size_t>(it - measured.wavelengths.begin()));
  }
  const FeatureVector x = flatten(select_wavelengths(measured, idx));
  std::vector<SubrangeMapping> out;
  for (std::size_t i = 0; i < bundle.models.size(); ++i) {
    const Classification c = ovo_classify(bundle.models[i], x);
    out.push_back({bundle.space.params[i].name, c.label, c.subrange, subrange_median(c.subrange)});
  }
  return out;
}

Reconstruction reconstruct(const Signature& measured, const ForwardModel& model, const ParameterSpace& space,
                           const ClassifierBundle& bundle, const IncidenceConfig& incidence,
                           const LmConfig& lm) {
  Reconstruction rec;
  const Stopwatch svm_clock;
  rec.mapping = map_to_subranges(bundle, measured);
  rec.svm_time_s = svm_clock.seconds();
  ParamMap init;
  for (const auto& m : rec.mapping) init[m.name] = m.median;
  rec.fit = lm_fit(measured, model, init, space.bounds(), incidence, lm);
  rec.lm_time_s = rec.fit.wall_time_s;
  return rec;
}

std::string to_string(Method m) { return m == Method::SvmLm ? "svm_lm" : "lm_only"; }

Method parse_method(const std::string& name) {
  if (name == "svm_lm") return Method::SvmLm;
  if (name == "lm_only") return Method::LmOnly;
  throw Error(ErrorKind::Usage, "unknown method '" + name + "' (svm_lm, lm_only)");
}

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

BenchReport run_benchmark(const ParameterSpace& space, const ForwardModel& model,
                          const IncidenceConfig& incidence, const ClassifierBundle* bundle,
                          const BenchOptions& options) {
  space.validate();
  incidence.validate();
  options.errors.validate();
  if (options.n_cases < 0) throw Error(ErrorKind::Validation, "n_cases must be >= 0");
  if (options.lm_only_init != "median" && options.lm_only_init != "low") {
    throw Error(ErrorKind::Validation, "lm_only_init must be 'median' or 'low'");
  }
  const bool want_svm = std::find(options.methods.begin(), options.methods.end(), Method::SvmLm) != options.methods.end();
  if (want_svm && bundle == nullptr) throw Error(ErrorKind::Validation, "svm_lm needs a trained bundle");
  if (bundle) {
    if (bundle->structure_hash != structure_hash(model.structure())) {
      throw Error(ErrorKind::Compatibility, "bundle was trained for a different structure");
    }
  }

  BenchReport report;
  for (const auto& p : space.params) report.names.push_back(p.name);
  const std::size_t n_methods = options.methods.size();
  report.cases.resize(static_cast<std::size_t>(options.n_cases) * n_methods);
  const ParamMap lm_only_start = options.lm_only_init == "low" ? space.lows() : space.medians();

  parallel_for(static_cast<std::size_t>(options.n_cases), options.workers, [&](std::size_t c) {
    const ParamMap truth = sample_uniform(space, derive_seed(options.seed, kCaseStream, c));
    ErrorSpec noise = options.errors;
    noise.seed = derive_seed(options.errors.seed, kCaseStream, c);
    std::optional<Signature> measured;
    std::string sim_failure;
    try {
      measured = inject_errors(model.simulate(truth, incidence), noise);
    } catch (const Error& e) {
      sim_failure = std::string(to_string(e.kind())) + ": " + e.what();
    }
    for (std::size_t k = 0; k < n_methods; ++k) {
      CaseRecord& rec = report.cases[c * n_methods + k];
      rec.case_index = static_cast<int>(c);
      rec.method = options.methods[k];
      for (const auto& p : space.params) {
        rec.truth.push_back(truth.at(p.name));
        rec.true_class.push_back(p.subrange_of(truth.at(p.name)));
      }
      if (!measured) {
        rec.failure = sim_failure;
        continue;
      }
      const Stopwatch clock;
      try {
        FitResult fit;
        if (rec.method == Method::SvmLm) {
          const Reconstruction r = reconstruct(*measured, model, space, *bundle, incidence, options.lm);
          for (const auto& m : r.mapping) {
            rec.mapped.push_back(m.label);
            rec.init.push_back(m.median);
          }
          rec.svm_time_s = r.svm_time_s;
          fit = r.fit;
        } else {
          for (const auto& p : space.params) rec.init.push_back(lm_only_start.at(p.name));
          fit = lm_fit(*measured, model, lm_only_start, space.bounds(), incidence, options.lm);
        }
        rec.lm_time_s = fit.wall_time_s;
        rec.iterations = fit.iterations;
        rec.converged = fit.converged;
        for (std::size_t i = 0; i < space.size(); ++i) {
          const double v = fit.params.at(space.params[i].name);
          rec.extracted.push_back(v);
          rec.abs_error.push_back(std::abs(v - rec.truth[i]));
        }
      } catch (const Error& e) {
        rec.failure = std::string(to_string(e.kind())) + ": " + e.what();
      }
      rec.wall_time_s = clock.seconds();
    }
  });
  summarize(report);
  return report;
}

void summarize(BenchReport& report) {
  const std::size_t m = report.names.size();
  report.summaries.clear();
  report.classification_accuracy.assign(m, std::numeric_limits<double>::quiet_NaN());
  std::vector<Method> methods;
  for (const auto& c : report.cases) {
    if (std::find(methods.begin(), methods.end(), c.method) == methods.end()) methods.push_back(c.method);
  }
  for (Method method : methods) {
    MethodSummary s;
    s.method = method;
    std::vector<std::vector<double>> errors(m);
    std::vector<double> times;
    std::vector<int> correct(m, 0);
    int mapped_cases = 0;
    for (const auto& c : report.cases) {
      if (c.method != method) continue;
      ++s.cases;
      const bool ok = c.failure.empty() && c.abs_error.size() == m;
      if (ok && c.converged) ++s.converged;
      bool divergent = !ok || !c.converged;
      if (ok) {
        for (std::size_t i = 0; i < m; ++i) {
          errors[i].push_back(c.abs_error[i]);
          if (c.abs_error[i] > kDivergenceThresholdNm) divergent = true;
        }
        times.push_back(c.wall_time_s);
      }
      if (divergent) ++s.divergent;
      if (c.mapped.size() == m && c.true_class.size() == m) {
        ++mapped_cases;
        for (std::size_t i = 0; i < m; ++i) correct[i] += c.mapped[i] == c.true_class[i];
      }
    }
    for (std::size_t i = 0; i < m; ++i) s.median_abs_error.push_back(median(errors[i]));
    s.median_wall_time_s = median(times);
    if (method == Method::SvmLm && mapped_cases > 0) {
      for (std::size_t i = 0; i < m; ++i) {
        report.classification_accuracy[i] = static_cast<double>(correct[i]) / mapped_cases;
      }
    }
    report.summaries.push_back(s);
  }
}

std::string format_bench_cases(const BenchReport& report) {
  std::string out = "case\tmethod";
  for (const char* group : {"true_", "mapped_", "init_", "extracted_", "abserr_"}) {
    for (const auto& n : report.names) out += std::string("\t") + group + n;
  }
  out += "\titerations\tconverged\tsvm_time_s\tlm_time_s\twall_time_s\tfailure\n";
  auto cells = [&](const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < report.names.size(); ++i) s += "\t" + (i < v.size() ? format_double(v[i]) : "NA");
    return s;
  };
  for (const auto& c : report.cases) {
    out += std::to_string(c.case_index) + "\t" + to_string(c.method) + cells(c.truth);
    for (std::size_t i = 0; i < report.names.size(); ++i) {
      out += "\t" + (i < c.mapped.size() ? std::to_string(c.mapped[i]) : std::string("NA"));
    }
    out += cells(c.init) + cells(c.extracted) + cells(c.abs_error);
    out += "\t" + std::to_string(c.iterations) + "\t" + (c.converged ? "1" : "0") + "\t" +
           format_double(c.svm_time_s) + "\t" + format_double(c.lm_time_s) + "\t" + format_double(c.wall_time_s) +
           "\t" + (c.failure.empty() ? "-" : c.failure) + "\n";
  }
  return out;
}

json bench_summary_json(const BenchReport& report) {
  json j;
  j["parameters"] = report.names;
  j["cases"] = report.cases.size();
  json acc = json::object();
  for (std::size_t i = 0; i < report.names.size(); ++i) {
    const double a = report.classification_accuracy[i];
    acc[report.names[i]] = std::isnan(a) ? json(nullptr) : json(a);
  }
  j["classification_accuracy"] = acc;
  json methods = json::object();
  for (const auto& s : report.summaries) {
    json mj;
    mj["cases"] = s.cases;
    mj["converged"] = s.converged;
    mj["divergent"] = s.divergent;
    json med = json::object();
    for (std::size_t i = 0; i < report.names.size(); ++i) {
      med[report.names[i]] = std::isnan(s.median_abs_error[i]) ? json(nullptr) : json(s.median_abs_error[i]);
    }
    mj["median_abs_error_nm"] = med;
    mj["median_wall_time_s"] = std::isnan(s.median_wall_time_s) ? json(nullptr) : json(s.median_wall_time_s);
    methods[to_string(s.method)] = mj;
  }
  j["methods"] = methods;
  return j;
}

std::vector<SweepRow> kernel_sweep(const ParameterSpace& space, const ForwardModel& model,
                                   const IncidenceConfig& incidence, const std::vector<SweepCell>& cells,
                                   const SweepOptions& options) {
  space.validate();
  incidence.validate();
  const std::size_t pi = options.param_index;
  if (pi >= space.size()) throw Error(ErrorKind::Validation, "sweep parameter index out of range");
  if (options.n_test < 1) throw Error(ErrorKind::Validation, "sweep needs at least one test signature");
  if (cells.empty()) return {};
  const auto& grid = incidence.wavelengths;

  // Union of the wavelength indices every cell reads.
  std::set<std::size_t> needed;
  for (const auto& cell : cells) {
    cell.kernel.validate();
    cell.errors.validate();
    for (auto i : subsample_indices(grid, cell.k_points)) needed.insert(i);
  }
  const std::vector<std::size_t> union_idx(needed.begin(), needed.end());
  const auto union_wl = pick(grid, union_idx);
  auto local = [&](int k) {
    std::vector<std::size_t> out;
    for (auto g : subsample_indices(grid, k)) {
      out.push_back(static_cast<std::size_t>(std::lower_bound(union_idx.begin(), union_idx.end(), g) - union_idx.begin()));
    }
    return out;
  };

  // Training simulations, shared between cells with the same sampling.
  std::map<std::pair<int, int>, std::pair<std::vector<Signature>, std::vector<int>>> training;
  for (const auto& cell : cells) {
    const auto key = std::make_pair(cell.samples_per_subrange, cell.samples_full_range);
    if (training.count(key)) continue;
    ParameterSpace s = space;
    for (std::size_t l = 0; l < s.size(); ++l) {
      if (l == pi) s.params[l].samples_per_subrange = key.first;
      else s.params[l].samples_full_range = key.second;
    }
    const auto samples = training_samples(s, pi, options.seed);
    std::vector<ParamMap> params;
    std::vector<int> labels;
    for (const auto& [p, label] : samples) {
      params.push_back(p);
      labels.push_back(label);
    }
    training[key] = {simulate_all(params, model, incidence, union_wl, options.workers), labels};
  }

  // Clean test signatures on the full grid, so errors scale with the full rms.
  std::vector<ParamMap> test_params;
  std::vector<int> test_labels;
  for (int t = 0; t < options.n_test; ++t) {
    test_params.push_back(sample_uniform(space, derive_seed(options.seed, kTestStream, static_cast<std::uint64_t>(t))));
    test_labels.push_back(space.params[pi].subrange_of(test_params.back().at(space.params[pi].name)));
  }
  const auto tests = simulate_all(test_params, model, incidence, grid, options.workers);

  // Cells differing only in their error spec share one classifier.
  auto train_key = [](const SweepCell& c) {
    return std::make_tuple(static_cast<int>(c.kernel.kind), c.kernel.factor, c.kernel.rbf_squared, c.k_points,
                           c.samples_per_subrange, c.samples_full_range);
  };
  std::vector<std::size_t> classifier_of(cells.size());
  std::vector<std::size_t> representative;
  {
    std::map<decltype(train_key(cells.front())), std::size_t> seen;
    for (std::size_t ci = 0; ci < cells.size(); ++ci) {
      const auto [it, inserted] = seen.emplace(train_key(cells[ci]), representative.size());
      if (inserted) representative.push_back(ci);
      classifier_of[ci] = it->second;
    }
  }
  const auto subs = space.params[pi].subranges();
  std::vector<MulticlassSvmModel> classifiers(representative.size());
  parallel_for(representative.size(), options.workers, [&](std::size_t r) {
    const auto& cell = cells[representative[r]];
    const auto& [sigs, labels] = training.at({cell.samples_per_subrange, cell.samples_full_range});
    const auto idx_local = local(cell.k_points);
    TrainingSet set;
    set.class_count = space.params[pi].n_subranges;
    for (std::size_t s = 0; s < sigs.size(); ++s) {
      set.x.push_back(flatten(select_wavelengths(sigs[s], idx_local)));
      set.y.push_back(labels[s]);
    }
    classifiers[r] = ovo_train(set, cell.kernel, options.svm, subs, 1);
  });

  std::vector<SweepRow> rows(cells.size());
  parallel_for(cells.size(), options.workers, [&](std::size_t ci) {
    const auto& cell = cells[ci];
    const auto& classifier = classifiers[classifier_of[ci]];
    const auto idx_full = subsample_indices(grid, cell.k_points);
    int correct = 0;
    for (int t = 0; t < options.n_test; ++t) {
      Signature measured = tests[static_cast<std::size_t>(t)];
      if (cell.errors.random_magnitude > 0.0 || cell.errors.offset_magnitude > 0.0) {
        ErrorSpec e = cell.errors;
        e.seed = derive_seed(cell.errors.seed, kTestStream, static_cast<std::uint64_t>(t));
        measured = inject_errors(measured, e);
      }
      const auto x = flatten(select_wavelengths(measured, idx_full));
      if (ovo_classify(classifier, x).label == test_labels[static_cast<std::size_t>(t)]) ++correct;
    }
    SweepRow row;
    row.cell = cell;
    ParameterSpace s = space;
    s.params[pi].samples_per_subrange = cell.samples_per_subrange;
    for (std::size_t l = 0; l < s.size(); ++l) {
      if (l != pi) s.params[l].samples_full_range = cell.samples_full_range;
    }
    row.pairs_per_class = s.pairs_per_class(pi);
    row.accuracy = static_cast<double>(correct) / options.n_test;
    rows[ci] = row;
  });
  return rows;
}

std::string format_sweep_table(const std::vector<SweepRow>& rows) {
  std::string out =
      "kernel\tfactor\tk_points\tpairs_per_class\trandom_magnitude\toffset_magnitude\terror_seed\taccuracy\n";
  for (const auto& r : rows) {
    out += to_string(r.cell.kernel.kind) + "\t" + format_double(r.cell.kernel.factor) + "\t" +
           std::to_string(r.cell.k_points) + "\t" + std::to_string(r.pairs_per_class) + "\t" +
           format_double(r.cell.errors.random_magnitude) + "\t" + format_double(r.cell.errors.offset_magnitude) +
           "\t" + std::to_string(r.cell.errors.seed) + "\t" + format_double(r.accuracy) + "\n";
  }
  return out;
}

}  // namespace scatterlm
