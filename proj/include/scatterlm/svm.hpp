#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "scatterlm/signature.hpp"

namespace scatterlm {

enum class KernelKind { Polynomial, Rbf, Sigmoid };

std::string to_string(KernelKind kind);
KernelKind parse_kernel_kind(const std::string& name);

/// Kernel family plus its controlling factor: the degree d (polynomial),
/// the scale sigma (rbf) or the slope beta (sigmoid).
struct KernelSpec {
  KernelKind kind = KernelKind::Rbf;
  double factor = 1.0;
  /// rbf only: exp(-|x - x'|^2 / sigma) instead of exp(-|x - x'| / sigma).
  bool rbf_squared = false;

  void validate() const;
  bool operator==(const KernelSpec&) const = default;
};

/// polynomial (x.x')^d, rbf exp(-|x - x'|_2 / sigma), sigmoid tanh(beta x.x').
double kernel_eval(const KernelSpec& spec, std::span<const double> x, std::span<const double> y);

struct SvmConfig {
  double C = 10.0;
  double tol = 1e-3;
  long max_iterations = 10'000'000;
  /// Upper bound on cached kernel rows per binary problem, in bytes.
  std::size_t cache_bytes = std::size_t{512} << 20;

  void validate() const;
};

/// Labelled feature vectors; labels are class indices 0..class_count-1.
struct TrainingSet {
  std::vector<FeatureVector> x;
  std::vector<int> y;
  int class_count = 0;

  std::size_t size() const noexcept { return x.size(); }
  void validate() const;
};

/// Solution of the soft-margin dual
///   min 1/2 a'Qa - e'a,  0 <= a_i <= C,  y'a = 0,  Q_ij = y_i y_j k(x_i, x_j).
struct DualSolution {
  std::vector<double> alpha;
  double bias = 0.0;
  double objective = 0.0;
  long iterations = 0;
};

/// SMO with maximal-violating-pair working-set selection. `y` holds +1/-1.
/// Stops when the maximal KKT violation drops below tol; throws a
/// convergence error when max_iterations is exhausted first.
DualSolution smo_solve(std::span<const FeatureVector> x, std::span<const int> y,
                       const KernelSpec& kernel, const SvmConfig& config);

struct BinarySvmModel {
  KernelSpec kernel;
  std::vector<FeatureVector> support_vectors;
  std::vector<double> alpha_y;
  double bias = 0.0;

  double decision_value(std::span<const double> x) const;
  /// sign(decision_value), with 0 mapped to +1.
  int decide(std::span<const double> x) const;
};

BinarySvmModel smo_train(std::span<const FeatureVector> x, std::span<const int> y,
                         const KernelSpec& kernel, const SvmConfig& config);

using Subrange = std::pair<double, double>;

/// One-vs-one ensemble. Machine (a, b), a < b, votes for a on +1.
struct MulticlassSvmModel {
  struct Machine {
    int positive = 0;
    int negative = 1;
    BinarySvmModel model;
  };

  KernelSpec kernel;
  std::vector<int> class_labels;
  std::vector<Subrange> class_subranges;
  std::vector<Machine> machines;

  std::size_t feature_length() const;
};

MulticlassSvmModel ovo_train(const TrainingSet& data, const KernelSpec& kernel, const SvmConfig& config,
                             std::vector<Subrange> class_subranges, int workers = 1);

struct Classification {
  int label = 0;
  Subrange subrange;
};

/// Majority vote; ties go to the lowest class label.
Classification ovo_classify(const MulticlassSvmModel& model, std::span<const double> x);

double classification_accuracy(const MulticlassSvmModel& model, const TrainingSet& test);

/// Metadata recorded in a training-set file header.
struct TrainingSetInfo {
  std::string parameter;
  int k_points = 0;
  std::vector<double> wavelengths;
  std::vector<Subrange> subranges;
};

std::string format_training_set(const TrainingSet& data, const TrainingSetInfo& info);
std::pair<TrainingSet, TrainingSetInfo> parse_training_set(const std::string& text);

std::string format_model(const MulticlassSvmModel& model);
MulticlassSvmModel parse_model(const std::string& text);
void save_model(const std::filesystem::path& path, const MulticlassSvmModel& model);
MulticlassSvmModel load_model(const std::filesystem::path& path);

}  // namespace scatterlm
