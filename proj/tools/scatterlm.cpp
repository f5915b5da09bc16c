// scatterlm: train / fit / simulate / bench front end.
#include <algorithm>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "scatterlm/error.hpp"
#include "scatterlm/forward_model.hpp"
#include "scatterlm/lm_solver.hpp"
#include "scatterlm/pipeline.hpp"
#include "scatterlm/run_config.hpp"
#include "scatterlm/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace scatterlm;

namespace {

constexpr const char* kVersion = "0.1.0";

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Usage: return 2;
    case ErrorKind::Parse: return 3;
    case ErrorKind::Validation: return 4;
    case ErrorKind::Range: return 5;
    case ErrorKind::Io: return 6;
    case ErrorKind::Compatibility: return 7;
    case ErrorKind::Numerical: return 8;
    case ErrorKind::Convergence: return 9;
  }
  return 1;
}

void report_error(std::string_view kind, std::string message) {
  std::replace(message.begin(), message.end(), '\n', ' ');
  std::cerr << "error: " << kind << ": " << message << "\n";
}

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  int workers = 0;
  std::string out;
};

struct Loaded {
  RunConfig config;
  ForwardModel model;
  int workers;
};

Loaded load(const Common& c) {
  RunConfig config = load_run_config(c.config, c.overrides);
  if (!c.out.empty()) config.output_dir = c.out;
  // Materials and structure are checked before any compute starts.
  ForwardModel model(load_config_structure(config), load_config_materials(config));
  for (const auto& name : model.parameter_names()) config.space.index(name);
  if (config.space.size() != model.parameter_names().size()) {
    throw Error(ErrorKind::Validation, "parameter space and structure parameters differ");
  }
  const int workers = c.workers > 0 ? c.workers : default_workers();
  return {std::move(config), std::move(model), workers};
}

json manifest(const std::string& command, const Loaded& l, const json& extra, const std::vector<std::string>& outputs) {
  json m;
  m["command"] = command;
  m["tool_version"] = kVersion;
  m["config_hash"] = l.config.hash();
  m["config"] = l.config.raw;
  m["structure_hash"] = structure_hash(l.model.structure());
  m["seeds"] = {{"train", l.config.train_seed}, {"bench", l.config.bench_seed}, {"noise", l.config.noise_seed}};
  m["format_versions"] = {{"svm_model", 1}, {"bundle", 1}, {"fit_report", 1}, {"training_set", 1}};
  m["outputs"] = outputs;
  for (const auto& [k, v] : extra.items()) m[k] = v;
  return m;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw Error(ErrorKind::Usage, "not a number: '" + tok + "'");
    }
  }
  return out;
}

ParamMap values_to_params(const ParameterSpace& space, const std::vector<double>& values) {
  if (values.size() != space.size()) {
    throw Error(ErrorKind::Usage, "expected " + std::to_string(space.size()) + " values, got " +
                                      std::to_string(values.size()));
  }
  ParamMap m;
  for (std::size_t i = 0; i < values.size(); ++i) m[space.params[i].name] = values[i];
  return m;
}

void check_rough_ranges(const ParameterSpace& space, const ParamMap& params) {
  for (const auto& p : space.params) {
    const double v = params.at(p.name);
    if (v < p.low || v > p.high) {
      throw Error(ErrorKind::Range, p.name + " = " + format_double(v) + " outside rough range [" +
                                        format_double(p.low) + ", " + format_double(p.high) + "]");
    }
  }
}

TrainOptions train_options(const Loaded& l) {
  TrainOptions o;
  o.kernel = l.config.kernel;
  o.svm = l.config.svm;
  o.k_points = l.config.k_points;
  o.seed = l.config.train_seed;
  o.workers = l.workers;
  return o;
}

// ---------------------------------------------------------------------------

int cmd_train(const Common& c, bool save_sets, const std::string& bundle_arg) {
  const Loaded l = load(c);
  const fs::path bundle_dir = bundle_arg.empty() ? l.config.output_dir / "bundle" : fs::path(bundle_arg);
  TrainOptions o = train_options(l);
  if (save_sets) o.training_set_dir = bundle_dir / "training_sets";
  const Stopwatch clock;
  const ClassifierBundle bundle = train_classifiers(l.config.space, l.model, l.config.incidence, o);
  save_bundle(bundle_dir, bundle);
  std::vector<std::string> outputs{(bundle_dir / "bundle.json").string()};
  for (const auto& p : l.config.space.params) outputs.push_back((bundle_dir / ("model_" + p.name + ".txt")).string());
  write_text_file(bundle_dir / "manifest.json",
                  manifest("train", l, {{"pairs_per_class", [&] {
                             json j;
                             for (std::size_t i = 0; i < l.config.space.size(); ++i)
                               j[l.config.space.params[i].name] = l.config.space.pairs_per_class(i);
                             return j;
                           }()}}, outputs).dump(2) + "\n");
  std::cout << "trained " << bundle.models.size() << " classifiers in " << clock.seconds() << " s -> "
            << bundle_dir.string() << "\n";
  return 0;
}

int cmd_simulate(const Common& c, const std::string& values, const std::vector<std::string>& assignments,
                 bool noise, std::optional<std::uint64_t> seed, const std::string& out_arg) {
  const Loaded l = load(c);
  ParamMap params;
  if (!values.empty()) params = values_to_params(l.config.space, parse_list(values));
  for (const auto& a : assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::Usage, "--param expects NAME=VALUE");
    l.config.space.index(a.substr(0, eq));
    params[a.substr(0, eq)] = parse_list(a.substr(eq + 1)).at(0);
  }
  for (const auto& p : l.config.space.params) {
    if (!params.count(p.name)) throw Error(ErrorKind::Usage, "missing value for '" + p.name + "'");
  }
  // The CD <= pitch check in the structure reports geometry errors first.
  instantiate(l.model.structure(), params, l.config.incidence.staircase_slices);
  check_rough_ranges(l.config.space, params);
  Signature sig = l.model.simulate(params, l.config.incidence);
  ErrorSpec errors = l.config.errors;
  if (seed) errors.seed = *seed;
  if (noise) sig = inject_errors(sig, errors);
  const fs::path out = out_arg.empty() ? l.config.output_dir / "signature.txt" : fs::path(out_arg);
  save_signature(out, sig);
  json extra;
  for (const auto& [k, v] : params) extra["params"][k] = v;
  extra["noise"] = noise ? json{{"random_magnitude", errors.random_magnitude},
                                {"offset_magnitude", errors.offset_magnitude},
                                {"seed", errors.seed}}
                         : json(nullptr);
  write_text_file(out.string() + ".manifest.json", manifest("simulate", l, extra, {out.string()}).dump(2) + "\n");
  std::cout << "wrote " << sig.size() << " wavelengths -> " << out.string() << "\n";
  return 0;
}

int cmd_fit(const Common& c, const std::string& signature_path, const std::string& bundle_arg,
            const std::string& method_name, const std::string& init_arg, const std::string& report_arg) {
  const Loaded l = load(c);
  const Method method = parse_method(method_name);
  const Signature measured = load_signature(signature_path);
  const fs::path report = report_arg.empty() ? l.config.output_dir / "fit_report.txt" : fs::path(report_arg);
  LmConfig lm = l.config.lm;
  lm.workers = l.workers;
  std::string text;
  json extra{{"method", method_name}, {"signature", signature_path}};
  if (method == Method::SvmLm) {
    if (!init_arg.empty()) throw Error(ErrorKind::Usage, "--init applies to lm_only; svm_lm starts from the mapping");
    const fs::path bundle_dir = bundle_arg.empty() ? l.config.output_dir / "bundle" : fs::path(bundle_arg);
    const ClassifierBundle bundle = load_bundle(bundle_dir);
    if (bundle.structure_hash != structure_hash(l.model.structure())) {
      throw Error(ErrorKind::Compatibility, "bundle " + bundle_dir.string() + " was trained for a different structure");
    }
    const Reconstruction rec = reconstruct(measured, l.model, l.config.space, bundle, l.config.incidence, lm);
    text = "# mapped sub-ranges\n";
    for (const auto& m : rec.mapping) {
      text += "subrange " + m.name + " " + std::to_string(m.label) + " " + format_double(m.subrange.first) + " " +
              format_double(m.subrange.second) + " median " + format_double(m.median) + "\n";
    }
    text += "svm_time_s " + format_double(rec.svm_time_s) + "\nlm_time_s " + format_double(rec.lm_time_s) + "\n";
    text += format_fit_report(rec.fit);
    extra["bundle"] = bundle_dir.string();
  } else {
    const ParamMap init = init_arg.empty() ? l.config.space.medians() : values_to_params(l.config.space, parse_list(init_arg));
    const FitResult fit = lm_fit(measured, l.model, init, l.config.space.bounds(), l.config.incidence, lm);
    text = format_fit_report(fit);
  }
  write_text_file(report, text);
  write_text_file(report.string() + ".manifest.json", manifest("fit", l, extra, {report.string()}).dump(2) + "\n");
  std::cout << text;
  return 0;
}

std::vector<double> json_list(const json& j, const char* key, std::vector<double> fallback) {
  return j.contains(key) ? j.at(key).get<std::vector<double>>() : fallback;
}

int cmd_bench(const Common& c, const std::string& study, const std::string& bundle_arg) {
  static const std::vector<std::string> studies{"svm_vs_lm", "kernel_sweep", "noise_sweep", "training_size"};
  if (std::find(studies.begin(), studies.end(), study) == studies.end()) {
    throw Error(ErrorKind::Usage, "unknown study '" + study + "' (svm_vs_lm, kernel_sweep, noise_sweep, training_size)");
  }
  const Loaded l = load(c);
  const fs::path dir = l.config.output_dir / study;
  std::vector<std::string> outputs;
  json extra{{"study", study}};
  const Stopwatch clock;

  if (study == "svm_vs_lm") {
    ClassifierBundle bundle;
    if (!bundle_arg.empty()) {
      bundle = load_bundle(bundle_arg);
    } else {
      bundle = train_classifiers(l.config.space, l.model, l.config.incidence, train_options(l));
      save_bundle(dir / "bundle", bundle);
    }
    BenchOptions o;
    o.n_cases = l.config.n_cases;
    o.errors = l.config.errors;
    o.seed = l.config.bench_seed;
    o.workers = l.workers;
    o.lm = l.config.lm;
    o.lm_only_init = l.config.lm_only_init;
    const BenchReport report = run_benchmark(l.config.space, l.model, l.config.incidence, &bundle, o);
    write_text_file(dir / "cases.tsv", format_bench_cases(report));
    write_text_file(dir / "summary.json", bench_summary_json(report).dump(2) + "\n");
    outputs = {(dir / "cases.tsv").string(), (dir / "summary.json").string()};
    std::cout << bench_summary_json(report).dump(2) << "\n";
  } else {
    const json sweep = l.config.raw.value("sweep", json::object());
    SweepOptions o;
    o.param_index = l.config.space.index(sweep.value("parameter", l.config.space.params.front().name));
    o.n_test = sweep.value("n_test", 100);
    o.svm = l.config.svm;
    o.seed = l.config.train_seed;
    o.workers = l.workers;
    const auto& target = l.config.space.params[o.param_index];
    std::size_t other = o.param_index == 0 ? 1 : 0;
    const int base_kj = target.samples_per_subrange;
    const int base_ki = l.config.space.size() > 1 ? l.config.space.params[other].samples_full_range : 1;

    std::vector<SweepCell> cells;
    auto cell = [&](KernelKind kind, double factor, int k, int kj, int ki, double rnd, double off, std::uint64_t seed) {
      SweepCell s;
      s.kernel.kind = kind;
      s.kernel.factor = factor;
      s.k_points = k;
      s.samples_per_subrange = kj;
      s.samples_full_range = ki;
      s.errors = {rnd, off, seed};
      cells.push_back(s);
    };
    if (study == "kernel_sweep") {
      const auto ks = json_list(sweep, "k_points", {3, 5, 7, 9, 11});
      for (double k : ks) {
        for (double d : json_list(sweep, "polynomial", {1, 2, 3, 4, 5, 6}))
          cell(KernelKind::Polynomial, d, static_cast<int>(k), base_kj, base_ki, 0, 0, 0);
        for (double s : json_list(sweep, "rbf", {0.01, 0.1, 1, 10, 100}))
          cell(KernelKind::Rbf, s, static_cast<int>(k), base_kj, base_ki, 0, 0, 0);
        for (double b : json_list(sweep, "sigmoid", {0.01, 0.1, 1, 10, 100}))
          cell(KernelKind::Sigmoid, b, static_cast<int>(k), base_kj, base_ki, 0, 0, 0);
      }
    } else if (study == "training_size") {
      const json sizes = sweep.value("sampling", json::array({{4, 4}, {8, 4}, {8, 8}, {12, 12}, {15, 15}}));
      for (const auto& s : sizes) {
        cell(KernelKind::Rbf, 1, l.config.k_points, s[0].get<int>(), s[1].get<int>(), 0, 0, 0);
        cell(KernelKind::Polynomial, 5, l.config.k_points, s[0].get<int>(), s[1].get<int>(), 0, 0, 0);
      }
    } else {
      const auto levels = json_list(sweep, "magnitudes", {0, 0.02, 0.04, 0.06, 0.08, 0.10});
      for (double off : levels)
        for (double rnd : levels) {
          cell(KernelKind::Rbf, 1, l.config.k_points, base_kj, base_ki, rnd, off, l.config.noise_seed);
          cell(KernelKind::Polynomial, 5, l.config.k_points, base_kj, base_ki, rnd, off, l.config.noise_seed);
        }
    }
    const auto rows = kernel_sweep(l.config.space, l.model, l.config.incidence, cells, o);
    write_text_file(dir / "accuracy.tsv", format_sweep_table(rows));
    outputs = {(dir / "accuracy.tsv").string()};
    extra["parameter"] = target.name;
    std::cout << format_sweep_table(rows);
  }
  write_text_file(dir / "manifest.json", manifest("bench", l, extra, outputs).dump(2) + "\n");
  std::cerr << study << " finished in " << clock.seconds() << " s -> " << dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SVM-guided Levenberg-Marquardt reconstruction for Mueller-matrix scatterometry"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", common.config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--set", common.overrides, "override a config value, e.g. --set lm.max_iterations=50");
    sub->add_option("-j,--workers", common.workers, "worker threads (default: SCATTERLM_WORKERS or all cores)");
    sub->add_option("-o,--output", common.out, "output directory (overrides the config)");
  };

  auto* train = app.add_subcommand("train", "train one classifier per parameter");
  add_common(train);
  bool save_sets = false;
  std::string bundle_arg;
  train->add_flag("--save-training-sets", save_sets, "also write the training sets");
  train->add_option("--bundle", bundle_arg, "bundle directory (default <output>/bundle)");

  auto* fit = app.add_subcommand("fit", "reconstruct profile parameters from a signature");
  add_common(fit);
  std::string signature, method = "svm_lm", init, report;
  fit->add_option("-s,--signature", signature, "measured signature file")->required()->check(CLI::ExistingFile);
  fit->add_option("--bundle", bundle_arg, "classifier bundle directory (svm_lm)");
  fit->add_option("--method", method, "svm_lm or lm_only")->check(CLI::IsMember({"svm_lm", "lm_only"}));
  fit->add_option("--init", init, "explicit lm_only start, comma separated in parameter order");
  fit->add_option("--report", report, "report path (default <output>/fit_report.txt)");

  auto* simulate = app.add_subcommand("simulate", "write a synthetic signature");
  add_common(simulate);
  std::string values, sim_out;
  std::vector<std::string> assignments;
  bool noise = false;
  std::optional<std::uint64_t> seed;
  simulate->add_option("--values", values, "parameter values, comma separated in parameter order");
  simulate->add_option("-p,--param", assignments, "NAME=VALUE");
  simulate->add_flag("--noise", noise, "inject the configured random and offset errors");
  simulate->add_option("--seed", seed, "noise seed (default seeds.noise)");
  simulate->add_option("--out", sim_out, "signature path (default <output>/signature.txt)");

  auto* bench = app.add_subcommand("bench", "run a benchmark study");
  add_common(bench);
  std::string study;
  bench->add_option("--study", study, "svm_vs_lm, kernel_sweep, noise_sweep or training_size")->required();
  bench->add_option("--bundle", bundle_arg, "pre-trained bundle (svm_vs_lm); trained on the fly otherwise");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("usage_error", e.what());
    return 2;
  }

  try {
    if (*train) return cmd_train(common, save_sets, bundle_arg);
    if (*simulate) return cmd_simulate(common, values, assignments, noise, seed, sim_out);
    if (*fit) return cmd_fit(common, signature, bundle_arg, method, init, report);
    if (*bench) return cmd_bench(common, study, bundle_arg);
  } catch (const Error& e) {
    report_error(to_string(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    report_error("internal_error", e.what());
    return 1;
  }
  return 0;
}
