// Python bindings: forward model, signatures, SVM, LM and the reconstruction
// pipeline. Arrays cross the boundary as numpy float64.
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>

#include "scatterlm/error.hpp"
#include "scatterlm/forward_model.hpp"
#include "scatterlm/lm_solver.hpp"
#include "scatterlm/pipeline.hpp"
#include "scatterlm/run_config.hpp"
#include "scatterlm/signature.hpp"
#include "scatterlm/svm.hpp"
#include "scatterlm/util.hpp"

namespace py = pybind11;
using namespace scatterlm;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

py::array_t<double> mueller_array(const Signature& s) {
  py::array_t<double> out({static_cast<py::ssize_t>(s.size()), py::ssize_t{4}, py::ssize_t{4}});
  auto m = out.mutable_unchecked<3>();
  for (std::size_t w = 0; w < s.size(); ++w)
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) m(w, i, j) = s.mueller[w][i * 4 + j];
  return out;
}

Signature signature_from(const std::vector<double>& wavelengths, const Array& mueller) {
  if (mueller.ndim() != 3 || mueller.shape(1) != 4 || mueller.shape(2) != 4 ||
      static_cast<std::size_t>(mueller.shape(0)) != wavelengths.size()) {
    throw Error(ErrorKind::Validation, "mueller must have shape (len(wavelengths), 4, 4)");
  }
  Signature s;
  s.wavelengths = wavelengths;
  auto m = mueller.unchecked<3>();
  for (std::size_t w = 0; w < wavelengths.size(); ++w) {
    MuellerMatrix mm{};
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) mm[i * 4 + j] = m(w, i, j);
    s.mueller.push_back(mm);
  }
  s.validate();
  return s;
}

std::vector<FeatureVector> rows_of(const Array& x) {
  if (x.ndim() != 2) throw Error(ErrorKind::Validation, "expected a 2-D array of feature rows");
  auto r = x.unchecked<2>();
  std::vector<FeatureVector> out(static_cast<std::size_t>(x.shape(0)), FeatureVector(static_cast<std::size_t>(x.shape(1))));
  for (py::ssize_t i = 0; i < x.shape(0); ++i)
    for (py::ssize_t j = 0; j < x.shape(1); ++j) out[i][j] = r(i, j);
  return out;
}

KernelSpec kernel_spec(const std::string& kind, double factor, bool rbf_squared) {
  KernelSpec k;
  k.kind = parse_kernel_kind(kind);
  k.factor = factor;
  k.rbf_squared = rbf_squared;
  k.validate();
  return k;
}

py::dict fit_dict(const FitResult& f) {
  py::dict d;
  d["params"] = f.params;
  d["residual_norm"] = f.residual_norm;
  d["iterations"] = f.iterations;
  d["converged"] = f.converged;
  d["stop_reason"] = f.stop_reason;
  d["wall_time_s"] = f.wall_time_s;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "SVM-guided Levenberg-Marquardt reconstruction for Mueller-matrix scatterometry";

  // Leaked on purpose: the translator outlives any module-level object.
  static py::handle error_type = py::exception<Error>(m, "ScatterlmError").release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error_type, (std::string(to_string(e.kind())) + ": " + e.what()).c_str());
    }
  });

  py::class_<IncidenceConfig>(m, "Incidence")
      .def(py::init([](std::vector<double> wavelengths, double angle_deg, double azimuth_deg, int truncation_order,
                       int staircase_slices) {
             IncidenceConfig c;
             c.wavelengths = std::move(wavelengths);
             c.angle_deg = angle_deg;
             c.azimuth_deg = azimuth_deg;
             c.truncation_order = truncation_order;
             c.staircase_slices = staircase_slices;
             c.validate();
             return c;
           }),
           py::arg("wavelengths"), py::arg("angle_deg") = 65.0, py::arg("azimuth_deg") = 0.0,
           py::arg("truncation_order") = 12, py::arg("staircase_slices") = 16)
      .def_readwrite("wavelengths", &IncidenceConfig::wavelengths)
      .def_readwrite("angle_deg", &IncidenceConfig::angle_deg)
      .def_readwrite("azimuth_deg", &IncidenceConfig::azimuth_deg)
      .def_readwrite("truncation_order", &IncidenceConfig::truncation_order)
      .def_readwrite("staircase_slices", &IncidenceConfig::staircase_slices)
      .def_static("grid", &IncidenceConfig::grid, py::arg("start_nm"), py::arg("stop_nm"), py::arg("step_nm"));

  py::class_<Signature>(m, "Signature")
      .def(py::init(&signature_from), py::arg("wavelengths"), py::arg("mueller"))
      .def_readonly("wavelengths", &Signature::wavelengths)
      .def_property_readonly("mueller", &mueller_array)
      .def("features", [](const Signature& s) {
        const auto f = flatten(s);
        return py::array_t<double>(static_cast<py::ssize_t>(f.size()), f.data());
      })
      .def("__len__", &Signature::size)
      .def("__eq__", [](const Signature& a, const Signature& b) { return a == b; })
      .def("save", [](const Signature& s, const std::filesystem::path& p) { save_signature(p, s); })
      .def_static("load", &load_signature, py::arg("path"));

  m.def("jones_to_mueller", [](std::complex<double> r_tm, std::complex<double> r_te) {
    const auto mm = jones_to_mueller(r_tm, r_te);
    py::array_t<double> out({4, 4});
    std::copy(mm.begin(), mm.end(), out.mutable_data());
    return out;
  }, py::arg("r_tm"), py::arg("r_te"));

  m.def("inject_errors", [](const Signature& s, double random_magnitude, double offset_magnitude, std::uint64_t seed) {
    return inject_errors(s, ErrorSpec{random_magnitude, offset_magnitude, seed});
  }, py::arg("signature"), py::arg("random_magnitude"), py::arg("offset_magnitude"), py::arg("seed"));

  py::class_<ForwardModel>(m, "ForwardModel")
      .def(py::init([](const std::filesystem::path& structure, const std::filesystem::path& materials) {
             return ForwardModel(load_structure(structure), MaterialLibrary::load_directory(materials));
           }),
           py::arg("structure"), py::arg("materials"))
      .def_property_readonly("parameter_names", &ForwardModel::parameter_names)
      .def("simulate",
           [](const ForwardModel& f, const ParamMap& params, const IncidenceConfig& inc) {
             py::gil_scoped_release release;
             return f.simulate(params, inc);
           },
           py::arg("params"), py::arg("incidence"));

  m.def("kernel", [](const std::string& kind, double factor, const std::vector<double>& x, const std::vector<double>& y,
                     bool rbf_squared) { return kernel_eval(kernel_spec(kind, factor, rbf_squared), x, y); },
        py::arg("kind"), py::arg("factor"), py::arg("x"), py::arg("y"), py::arg("rbf_squared") = false);

  py::class_<MulticlassSvmModel>(m, "SvmModel")
      .def_readonly("class_labels", &MulticlassSvmModel::class_labels)
      .def("predict", [](const MulticlassSvmModel& model, const Array& x) {
        std::vector<int> out;
        for (const auto& row : rows_of(x)) out.push_back(ovo_classify(model, row).label);
        return out;
      }, py::arg("x"))
      .def("save", [](const MulticlassSvmModel& model, const std::filesystem::path& p) { save_model(p, model); })
      .def_static("load", &load_model, py::arg("path"));

  m.def("train_svm",
        [](const Array& x, const std::vector<int>& y, const std::string& kind, double factor, double C, double tol,
           bool rbf_squared) {
          TrainingSet set;
          set.x = rows_of(x);
          set.y = y;
          set.class_count = y.empty() ? 0 : *std::max_element(y.begin(), y.end()) + 1;
          SvmConfig cfg;
          cfg.C = C;
          cfg.tol = tol;
          std::vector<Subrange> subs;
          for (int c = 0; c < set.class_count; ++c) subs.emplace_back(c, c + 1);
          py::gil_scoped_release release;
          return ovo_train(set, kernel_spec(kind, factor, rbf_squared), cfg, subs);
        },
        py::arg("x"), py::arg("y"), py::arg("kind") = "rbf", py::arg("factor") = 1.0, py::arg("C") = 10.0,
        py::arg("tol") = 1e-3, py::arg("rbf_squared") = false);

  m.def("lm_minimize",
        [](const std::function<std::vector<double>(std::vector<double>)>& fn, std::vector<double> x0,
           std::vector<double> low, std::vector<double> high, int max_iterations, double cost_tolerance,
           double step_tolerance, double fd_step) {
          LmConfig cfg;
          cfg.max_iterations = max_iterations;
          cfg.cost_tolerance = cost_tolerance;
          cfg.step_tolerance = step_tolerance;
          cfg.fd_step = fd_step;
          const ResidualFn residual = [&](const Eigen::VectorXd& p) {
            const auto r = fn(std::vector<double>(p.data(), p.data() + p.size()));
            return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(r.size())));
          };
          const Eigen::VectorXd start = Eigen::Map<const Eigen::VectorXd>(x0.data(), static_cast<Eigen::Index>(x0.size()));
          const auto out = lm_minimize(residual, start, Bounds{std::move(low), std::move(high)}, cfg);
          py::dict d;
          d["params"] = std::vector<double>(out.params.data(), out.params.data() + out.params.size());
          d["cost"] = out.cost;
          d["iterations"] = out.iterations;
          d["converged"] = out.converged;
          d["stop_reason"] = out.stop_reason;
          return d;
        },
        py::arg("fn"), py::arg("x0"), py::arg("low"), py::arg("high"), py::arg("max_iterations") = 200,
        py::arg("cost_tolerance") = 1e-10, py::arg("step_tolerance") = 1e-8, py::arg("fd_step") = 1e-4);

  py::class_<RunConfig>(m, "RunConfig")
      .def_static("load", &load_run_config, py::arg("path"), py::arg("overrides") = std::vector<std::string>{})
      .def_readonly("incidence", &RunConfig::incidence)
      .def_readonly("k_points", &RunConfig::k_points)
      .def_property_readonly("parameter_names", [](const RunConfig& c) {
        std::vector<std::string> out;
        for (const auto& p : c.space.params) out.push_back(p.name);
        return out;
      })
      .def_property_readonly("rough_ranges", [](const RunConfig& c) {
        std::vector<std::pair<double, double>> out;
        for (const auto& p : c.space.params) out.emplace_back(p.low, p.high);
        return out;
      })
      .def("hash", &RunConfig::hash)
      .def("model", [](const RunConfig& c) { return ForwardModel(load_config_structure(c), load_config_materials(c)); });

  py::class_<ClassifierBundle>(m, "Bundle")
      .def_static("load", &load_bundle, py::arg("path"))
      .def_readonly("wavelengths", &ClassifierBundle::wavelengths)
      .def_readonly("structure_hash", &ClassifierBundle::structure_hash)
      .def("map", [](const ClassifierBundle& b, const Signature& s) {
        py::list out;
        for (const auto& mp : map_to_subranges(b, s)) {
          py::dict d;
          d["name"] = mp.name;
          d["label"] = mp.label;
          d["subrange"] = mp.subrange;
          d["median"] = mp.median;
          out.append(d);
        }
        return out;
      }, py::arg("signature"));

  m.def("train_bundle", [](const RunConfig& c, int workers) {
    TrainOptions o;
    o.kernel = c.kernel;
    o.svm = c.svm;
    o.k_points = c.k_points;
    o.seed = c.train_seed;
    o.workers = workers > 0 ? workers : default_workers();
    const ForwardModel model(load_config_structure(c), load_config_materials(c));
    py::gil_scoped_release release;
    return train_classifiers(c.space, model, c.incidence, o);
  }, py::arg("config"), py::arg("workers") = 0);
  m.def("save_bundle", [](const ClassifierBundle& b, const std::filesystem::path& p) { save_bundle(p, b); },
        py::arg("bundle"), py::arg("path"));

  m.def("lm_fit", [](const RunConfig& c, const Signature& target, const ParamMap& init) {
    const ForwardModel model(load_config_structure(c), load_config_materials(c));
    py::gil_scoped_release release;
    return lm_fit(target, model, init, c.space.bounds(), c.incidence, c.lm);
  }, py::arg("config"), py::arg("target"), py::arg("init"));

  m.def("reconstruct", [](const RunConfig& c, const Signature& measured, const ClassifierBundle& bundle) {
    const ForwardModel model(load_config_structure(c), load_config_materials(c));
    Reconstruction rec;
    {
      py::gil_scoped_release release;
      rec = reconstruct(measured, model, c.space, bundle, c.incidence, c.lm);
    }
    py::dict d = fit_dict(rec.fit);
    py::dict medians;
    for (const auto& mp : rec.mapping) medians[py::str(mp.name)] = mp.median;
    d["init"] = medians;
    d["svm_time_s"] = rec.svm_time_s;
    return d;
  }, py::arg("config"), py::arg("measured"), py::arg("bundle"));

  py::class_<FitResult>(m, "FitResult")
      .def_readonly("params", &FitResult::params)
      .def_readonly("residual_norm", &FitResult::residual_norm)
      .def_readonly("iterations", &FitResult::iterations)
      .def_readonly("converged", &FitResult::converged)
      .def_readonly("stop_reason", &FitResult::stop_reason)
      .def("report", &format_fit_report);
}
