#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scatterlm/forward_model.hpp"
#include "scatterlm/lm_solver.hpp"
#include "scatterlm/signature.hpp"
#include "scatterlm/svm.hpp"

namespace scatterlm {

/// One fitted parameter: its rough range, the number of sub-ranges it is
/// sliced into, and how many training samples are drawn for it.
struct ParameterSpec {
  std::string name;
  double low = 0.0;
  double high = 0.0;
  int n_subranges = 4;
  /// K_j: draws inside the sub-range when this parameter is the one being classified.
  int samples_per_subrange = 8;
  /// K_i: draws across the full rough range when another parameter is classified.
  int samples_full_range = 8;

  std::vector<Subrange> subranges() const;
  /// Index of the sub-range containing `value`; the top edge belongs to the last one.
  int subrange_of(double value) const;
  double median() const { return (low + high) / 2.0; }
};

double subrange_median(const Subrange& s);

struct ParameterSpace {
  std::vector<ParameterSpec> params;

  void validate() const;
  std::size_t size() const noexcept { return params.size(); }
  std::size_t index(const std::string& name) const;
  std::vector<ParamBound> bounds() const;
  ParamMap medians() const;
  ParamMap lows() const;
  /// Training pairs per class for parameter i: K_j times the product of the others' K_i.
  long pairs_per_class(std::size_t i) const;
};

ParameterSpace parameter_space_from_json(const nlohmann::json& j);
nlohmann::json parameter_space_to_json(const ParameterSpace& space);

/// Draws one value per parameter uniformly in its rough range.
ParamMap sample_uniform(const ParameterSpace& space, std::uint64_t seed);

/// Profile samples labelled with their class for parameter i, in a fixed
/// order: class-major, then the cross product with the last parameter fastest.
std::vector<std::pair<ParamMap, int>> training_samples(const ParameterSpace& space, std::size_t i,
                                                      std::uint64_t seed);

/// Simulates training_samples(space, i, seed) at the k subsampled wavelengths
/// of the incidence grid.
TrainingSet generate_training_sets(const ParameterSpace& space, std::size_t i, const ForwardModel& model,
                                   const IncidenceConfig& incidence, int k_points, std::uint64_t seed,
                                   int workers = 1);

struct ClassifierBundle {
  ParameterSpace space;
  KernelSpec kernel;
  int k_points = 0;
  /// The k wavelengths the classifiers read.
  std::vector<double> wavelengths;
  IncidenceConfig incidence;
  std::string structure_hash;
  std::uint64_t seed = 0;
  std::vector<MulticlassSvmModel> models;

  void validate() const;
};

struct TrainOptions {
  KernelSpec kernel;
  SvmConfig svm;
  int k_points = 7;
  std::uint64_t seed = 1;
  int workers = 1;
  /// When set, each parameter's training set is written here.
  std::optional<std::filesystem::path> training_set_dir;
};

ClassifierBundle train_classifiers(const ParameterSpace& space, const ForwardModel& model,
                                   const IncidenceConfig& incidence, const TrainOptions& options);

void save_bundle(const std::filesystem::path& dir, const ClassifierBundle& bundle);
ClassifierBundle load_bundle(const std::filesystem::path& dir);

struct SubrangeMapping {
  std::string name;
  int label = 0;
  Subrange subrange;
  double median = 0.0;
};

std::vector<SubrangeMapping> map_to_subranges(const ClassifierBundle& bundle, const Signature& measured);

struct Reconstruction {
  std::vector<SubrangeMapping> mapping;
  FitResult fit;
  double svm_time_s = 0.0;
  double lm_time_s = 0.0;
};

/// SVM mapping, then LM from the mapped medians within the rough ranges.
Reconstruction reconstruct(const Signature& measured, const ForwardModel& model, const ParameterSpace& space,
                           const ClassifierBundle& bundle, const IncidenceConfig& incidence,
                           const LmConfig& lm);

enum class Method { SvmLm, LmOnly };
std::string to_string(Method m);
Method parse_method(const std::string& name);

struct BenchOptions {
  int n_cases = 100;
  ErrorSpec errors;
  std::vector<Method> methods{Method::SvmLm, Method::LmOnly};
  std::uint64_t seed = 1;
  int workers = 1;
  LmConfig lm;
  /// lm_only start: "median" of the rough ranges or their "low" edges.
  std::string lm_only_init = "median";
};

struct CaseRecord {
  int case_index = 0;
  Method method = Method::SvmLm;
  std::vector<double> truth;
  std::vector<int> true_class;
  /// svm_lm only: mapped class per parameter.
  std::vector<int> mapped;
  std::vector<double> init;
  std::vector<double> extracted;
  std::vector<double> abs_error;
  int iterations = 0;
  bool converged = false;
  double svm_time_s = 0.0;
  double lm_time_s = 0.0;
  double wall_time_s = 0.0;
  /// Empty unless the case failed.
  std::string failure;
};

struct MethodSummary {
  Method method = Method::SvmLm;
  int cases = 0;
  int converged = 0;
  /// Not converged, failed, or some parameter off by more than the divergence threshold.
  int divergent = 0;
  std::vector<double> median_abs_error;
  double median_wall_time_s = 0.0;
};

struct BenchReport {
  std::vector<std::string> names;
  std::vector<CaseRecord> cases;
  /// Filled for svm_lm: fraction of cases whose mapped class holds the truth.
  std::vector<double> classification_accuracy;
  std::vector<MethodSummary> summaries;
};

inline constexpr double kDivergenceThresholdNm = 10.0;

/// Draws cases, simulates on the incidence grid, injects errors and runs each
/// method on the same noisy signature.
BenchReport run_benchmark(const ParameterSpace& space, const ForwardModel& model,
                          const IncidenceConfig& incidence, const ClassifierBundle* bundle,
                          const BenchOptions& options);

/// Recomputes the aggregate fields from the case records.
void summarize(BenchReport& report);

std::string format_bench_cases(const BenchReport& report);
nlohmann::json bench_summary_json(const BenchReport& report);

double median(std::vector<double> values);

struct SweepCell {
  KernelSpec kernel;
  int k_points = 7;
  int samples_per_subrange = 8;
  int samples_full_range = 8;
  ErrorSpec errors;
};

struct SweepRow {
  SweepCell cell;
  long pairs_per_class = 0;
  double accuracy = 0.0;
};

struct SweepOptions {
  std::size_t param_index = 0;
  int n_test = 100;
  SvmConfig svm;
  std::uint64_t seed = 1;
  int workers = 1;
};

/// Trains one classifier per cell for a single parameter and scores it on
/// freshly drawn test signatures. Cells with equal sampling share training
/// simulations and all cells share the clean test signatures; errors are
/// injected on the full incidence grid before subsampling.
std::vector<SweepRow> kernel_sweep(const ParameterSpace& space, const ForwardModel& model,
                                   const IncidenceConfig& incidence, const std::vector<SweepCell>& cells,
                                   const SweepOptions& options);

std::string format_sweep_table(const std::vector<SweepRow>& rows);

}  // namespace scatterlm
