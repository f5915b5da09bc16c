#include "scatterlm/svm.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <sstream>

#include "scatterlm/error.hpp"
#include "scatterlm/util.hpp"

namespace scatterlm {

std::string to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::Polynomial: return "polynomial";
    case KernelKind::Rbf: return "rbf";
    case KernelKind::Sigmoid: return "sigmoid";
  }
  return "rbf";
}

KernelKind parse_kernel_kind(const std::string& name) {
  if (name == "polynomial" || name == "poly") return KernelKind::Polynomial;
  if (name == "rbf") return KernelKind::Rbf;
  if (name == "sigmoid") return KernelKind::Sigmoid;
  throw Error(ErrorKind::Validation, "unknown kernel '" + name + "' (polynomial, rbf, sigmoid)");
}

void KernelSpec::validate() const {
  if (!std::isfinite(factor)) throw Error(ErrorKind::Validation, "kernel factor must be finite");
  if (kind == KernelKind::Polynomial && (factor < 1.0 || factor != std::floor(factor))) {
    throw Error(ErrorKind::Validation, "polynomial degree must be an integer >= 1");
  }
  if (kind == KernelKind::Rbf && !(factor > 0.0)) {
    throw Error(ErrorKind::Validation, "rbf sigma must be positive");
  }
}

double kernel_eval(const KernelSpec& spec, std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorKind::Validation, "kernel arguments differ in length");
  switch (spec.kind) {
    case KernelKind::Polynomial: {
      double dot = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) dot += x[i] * y[i];
      return std::pow(dot, spec.factor);
    }
    case KernelKind::Rbf: {
      double d2 = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        d2 += d * d;
      }
      return std::exp(-(spec.rbf_squared ? d2 : std::sqrt(d2)) / spec.factor);
    }
    case KernelKind::Sigmoid: {
      double dot = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) dot += x[i] * y[i];
      return std::tanh(spec.factor * dot);
    }
  }
  return 0.0;
}

void SvmConfig::validate() const {
  if (!(C > 0.0)) throw Error(ErrorKind::Validation, "SVM C must be positive");
  if (!(tol > 0.0)) throw Error(ErrorKind::Validation, "SVM tolerance must be positive");
  if (max_iterations < 1) throw Error(ErrorKind::Validation, "SVM max_iterations must be >= 1");
}

void TrainingSet::validate() const {
  if (x.size() != y.size()) throw Error(ErrorKind::Validation, "training set x/y size mismatch");
  if (class_count < 2) throw Error(ErrorKind::Validation, "training set needs at least 2 classes");
  std::vector<int> counts(class_count, 0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i].size() != x.front().size()) throw Error(ErrorKind::Validation, "feature vectors differ in length");
    if (y[i] < 0 || y[i] >= class_count) throw Error(ErrorKind::Validation, "label out of range");
    ++counts[y[i]];
  }
  for (int c = 0; c < class_count; ++c) {
    if (counts[c] == 0) {
      throw Error(ErrorKind::Validation, "class " + std::to_string(c) + " has no training pairs");
    }
  }
}

namespace {

/// Lazily computed rows of K, evicted first-in first-out once the byte
/// budget is reached.
class KernelRows {
 public:
  KernelRows(std::span<const FeatureVector> x, const KernelSpec& kernel, std::size_t budget_bytes)
      : x_(x), kernel_(kernel), rows_(x.size()) {
    const std::size_t row_bytes = std::max<std::size_t>(1, x.size() * sizeof(double));
    capacity_ = std::max<std::size_t>(2, budget_bytes / row_bytes);
    diagonal_.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) diagonal_[i] = kernel_eval(kernel_, x_[i], x_[i]);
  }

  double diagonal(std::size_t i) const { return diagonal_[i]; }

  const std::vector<double>& row(std::size_t i) {
    if (rows_[i].empty()) {
      if (order_.size() >= capacity_) {
        rows_[order_.front()] = {};
        order_.pop_front();
      }
      auto& r = rows_[i];
      r.resize(x_.size());
      for (std::size_t j = 0; j < x_.size(); ++j) r[j] = j == i ? diagonal_[i] : kernel_eval(kernel_, x_[i], x_[j]);
      order_.push_back(i);
    }
    return rows_[i];
  }

 private:
  std::span<const FeatureVector> x_;
  KernelSpec kernel_;
  std::vector<std::vector<double>> rows_;
  std::vector<double> diagonal_;
  std::deque<std::size_t> order_;
  std::size_t capacity_ = 2;
};

constexpr double kTau = 1e-12;

}  // namespace

DualSolution smo_solve(std::span<const FeatureVector> x, std::span<const int> y, const KernelSpec& kernel,
                       const SvmConfig& config) {
  kernel.validate();
  config.validate();
  const std::size_t n = x.size();
  if (n != y.size()) throw Error(ErrorKind::Validation, "smo: x/y size mismatch");
  bool has_pos = false, has_neg = false;
  for (int label : y) {
    if (label == 1) has_pos = true;
    else if (label == -1) has_neg = true;
    else throw Error(ErrorKind::Validation, "smo: labels must be +1 or -1");
  }
  if (!has_pos || !has_neg) throw Error(ErrorKind::Validation, "smo: both labels must be present");

  const double C = config.C;
  KernelRows K(x, kernel, config.cache_bytes);
  std::vector<double> alpha(n, 0.0);
  std::vector<double> grad(n, -1.0);  // G = Q alpha - e

  auto in_up = [&](std::size_t t) { return (y[t] == 1 && alpha[t] < C) || (y[t] == -1 && alpha[t] > 0.0); };
  auto in_low = [&](std::size_t t) { return (y[t] == 1 && alpha[t] > 0.0) || (y[t] == -1 && alpha[t] < C); };

  long iter = 0;
  for (;; ++iter) {
    double g_max = -std::numeric_limits<double>::infinity();
    double g_min = std::numeric_limits<double>::infinity();
    std::size_t i = n, j = n;
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -y[t] * grad[t];
      if (in_up(t) && v > g_max) {
        g_max = v;
        i = t;
      }
      if (in_low(t) && v < g_min) {
        g_min = v;
        j = t;
      }
    }
    if (i == n || j == n || g_max - g_min < config.tol) break;
    if (iter >= config.max_iterations) {
      throw Error(ErrorKind::Convergence, "SMO did not converge within " + std::to_string(config.max_iterations) +
                                              " iterations (violation " + format_double(g_max - g_min) + ")");
    }

    const auto& Ki = K.row(i);
    const auto& Kj = K.row(j);
    const double old_ai = alpha[i];
    const double old_aj = alpha[j];
    const double kij = Ki[j];

    if (y[i] != y[j]) {
      double quad = K.diagonal(i) + K.diagonal(j) - 2.0 * kij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) {
          alpha[j] = 0.0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = -diff;
      }
      if (diff > 0.0) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = C - diff;
        }
      } else if (alpha[j] > C) {
        alpha[j] = C;
        alpha[i] = C + diff;
      }
    } else {
      double quad = K.diagonal(i) + K.diagonal(j) - 2.0 * kij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = sum - C;
        }
      } else if (alpha[j] < 0.0) {
        alpha[j] = 0.0;
        alpha[i] = sum;
      }
      if (sum > C) {
        if (alpha[j] > C) {
          alpha[j] = C;
          alpha[i] = sum - C;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = sum;
      }
    }

    const double dai = (alpha[i] - old_ai) * y[i];
    const double daj = (alpha[j] - old_aj) * y[j];
    for (std::size_t t = 0; t < n; ++t) grad[t] += y[t] * (Ki[t] * dai + Kj[t] * daj);
  }

  // rho as in the LIBSVM lineage: mean of y_t G_t over free variables,
  // otherwise the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (alpha[t] >= C) {
      if (y[t] == -1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (alpha[t] <= 0.0) {
      if (y[t] == 1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;

  DualSolution sol;
  sol.objective = 0.0;
  for (std::size_t t = 0; t < n; ++t) sol.objective += alpha[t] * (grad[t] - 1.0);
  sol.objective /= 2.0;
  sol.alpha = std::move(alpha);
  sol.bias = -rho;
  sol.iterations = iter;
  return sol;
}

double BinarySvmModel::decision_value(std::span<const double> x) const {
  double sum = bias;
  for (std::size_t i = 0; i < support_vectors.size(); ++i) {
    if (support_vectors[i].size() != x.size()) {
      throw Error(ErrorKind::Validation, "feature length does not match the model");
    }
    sum += alpha_y[i] * kernel_eval(kernel, x, support_vectors[i]);
  }
  return sum;
}

int BinarySvmModel::decide(std::span<const double> x) const { return decision_value(x) >= 0.0 ? 1 : -1; }

BinarySvmModel smo_train(std::span<const FeatureVector> x, std::span<const int> y, const KernelSpec& kernel,
                         const SvmConfig& config) {
  const DualSolution sol = smo_solve(x, y, kernel, config);
  BinarySvmModel model;
  model.kernel = kernel;
  model.bias = sol.bias;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (sol.alpha[i] > 0.0) {
      model.support_vectors.push_back(x[i]);
      model.alpha_y.push_back(sol.alpha[i] * y[i]);
    }
  }
  return model;
}

std::size_t MulticlassSvmModel::feature_length() const {
  for (const auto& m : machines) {
    if (!m.model.support_vectors.empty()) return m.model.support_vectors.front().size();
  }
  return 0;
}

MulticlassSvmModel ovo_train(const TrainingSet& data, const KernelSpec& kernel, const SvmConfig& config,
                             std::vector<Subrange> class_subranges, int workers) {
  data.validate();
  kernel.validate();
  if (!class_subranges.empty() && class_subranges.size() != static_cast<std::size_t>(data.class_count)) {
    throw Error(ErrorKind::Validation, "one sub-range per class required");
  }
  MulticlassSvmModel model;
  model.kernel = kernel;
  model.class_subranges = std::move(class_subranges);
  for (int c = 0; c < data.class_count; ++c) model.class_labels.push_back(c);

  std::vector<std::pair<int, int>> pairs;
  for (int a = 0; a < data.class_count; ++a)
    for (int b = a + 1; b < data.class_count; ++b) pairs.emplace_back(a, b);
  model.machines.resize(pairs.size());

  parallel_for(pairs.size(), workers, [&](std::size_t p) {
    const auto [a, b] = pairs[p];
    std::vector<FeatureVector> xs;
    std::vector<int> ys;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data.y[i] == a || data.y[i] == b) {
        xs.push_back(data.x[i]);
        ys.push_back(data.y[i] == a ? 1 : -1);
      }
    }
    model.machines[p] = {a, b, smo_train(xs, ys, kernel, config)};
  });
  return model;
}

Classification ovo_classify(const MulticlassSvmModel& model, std::span<const double> x) {
  if (model.class_labels.empty()) throw Error(ErrorKind::Validation, "empty multiclass model");
  const std::size_t expected = model.feature_length();
  if (expected != 0 && expected != x.size()) {
    throw Error(ErrorKind::Validation, "feature length " + std::to_string(x.size()) +
                                           " does not match model length " + std::to_string(expected));
  }
  std::vector<int> votes(model.class_labels.size(), 0);
  for (const auto& m : model.machines) {
    ++votes[m.model.decide(x) == 1 ? m.positive : m.negative];
  }
  // max_element returns the first maximum, i.e. the lowest label on ties
  const auto best = static_cast<std::size_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
  Classification out;
  out.label = model.class_labels[best];
  if (best < model.class_subranges.size()) out.subrange = model.class_subranges[best];
  return out;
}

double classification_accuracy(const MulticlassSvmModel& model, const TrainingSet& test) {
  if (test.size() == 0) throw Error(ErrorKind::Validation, "accuracy needs a nonempty test set");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (ovo_classify(model, test.x[i]).label == test.y[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

// ---------------------------------------------------------------------------
// Text formats

namespace {

constexpr int kModelFormatVersion = 1;

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

double to_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw Error(ErrorKind::Parse, "not a number: '" + s + "'");
  }
  if (used != s.size()) throw Error(ErrorKind::Parse, "not a number: '" + s + "'");
  return v;
}

int to_int(const std::string& s) {
  const double v = to_double(s);
  if (v != std::floor(v)) throw Error(ErrorKind::Parse, "not an integer: '" + s + "'");
  return static_cast<int>(v);
}

class LineReader {
 public:
  explicit LineReader(const std::string& text) : in_(text) {}

  std::vector<std::string> next(const char* what) {
    std::string line;
    while (std::getline(in_, line)) {
      auto toks = split_ws(line);
      if (!toks.empty()) return toks;
    }
    throw Error(ErrorKind::Parse, std::string("unexpected end of file, expected ") + what);
  }

  std::vector<std::string> expect(const std::string& key, std::size_t min_tokens) {
    auto toks = next(key.c_str());
    if (toks.front() != key || toks.size() < min_tokens) {
      throw Error(ErrorKind::Parse, "expected '" + key + "' line, got '" + toks.front() + "'");
    }
    return toks;
  }

 private:
  std::istringstream in_;
};

}  // namespace

std::string format_training_set(const TrainingSet& data, const TrainingSetInfo& info) {
  std::string out = "# scatterlm training set, format_version 1\n";
  out += "# parameter " + info.parameter + "\n";
  out += "# k " + std::to_string(info.k_points) + "\n";
  out += "# wavelengths";
  for (double w : info.wavelengths) out += " " + format_double(w);
  out += "\n# subranges";
  for (const auto& [lo, hi] : info.subranges) out += " " + format_double(lo) + ":" + format_double(hi);
  out += "\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    out += std::to_string(data.y[i]);
    for (double v : data.x[i]) out += " " + format_double(v);
    out += "\n";
  }
  return out;
}

std::pair<TrainingSet, TrainingSetInfo> parse_training_set(const std::string& text) {
  TrainingSet data;
  TrainingSetInfo info;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto toks = split_ws(line);
    if (toks.empty()) continue;
    if (toks.front() == "#") {
      if (toks.size() >= 2 && toks[1] == "parameter" && toks.size() >= 3) info.parameter = toks[2];
      if (toks.size() >= 3 && toks[1] == "k") info.k_points = to_int(toks[2]);
      if (toks.size() >= 2 && toks[1] == "wavelengths") {
        for (std::size_t i = 2; i < toks.size(); ++i) info.wavelengths.push_back(to_double(toks[i]));
      }
      if (toks.size() >= 2 && toks[1] == "subranges") {
        for (std::size_t i = 2; i < toks.size(); ++i) {
          const auto colon = toks[i].find(':');
          if (colon == std::string::npos) throw Error(ErrorKind::Parse, "bad sub-range '" + toks[i] + "'");
          info.subranges.emplace_back(to_double(toks[i].substr(0, colon)), to_double(toks[i].substr(colon + 1)));
        }
      }
      continue;
    }
    FeatureVector x;
    x.reserve(toks.size() - 1);
    for (std::size_t i = 1; i < toks.size(); ++i) x.push_back(to_double(toks[i]));
    data.y.push_back(to_int(toks.front()));
    data.x.push_back(std::move(x));
  }
  int max_label = -1;
  for (int label : data.y) max_label = std::max(max_label, label);
  data.class_count = info.subranges.empty() ? max_label + 1 : static_cast<int>(info.subranges.size());
  data.validate();
  return {std::move(data), std::move(info)};
}

std::string format_model(const MulticlassSvmModel& model) {
  // Support vectors are shared between machines; store each once.
  std::map<FeatureVector, std::size_t> pool_index;
  std::vector<const FeatureVector*> pool;
  for (const auto& m : model.machines) {
    for (const auto& sv : m.model.support_vectors) {
      if (pool_index.emplace(sv, pool.size()).second) pool.push_back(&sv);
    }
  }
  std::string out = "scatterlm-svm-model\n";
  out += "format_version " + std::to_string(kModelFormatVersion) + "\n";
  out += "kernel " + to_string(model.kernel.kind) + " " + format_double(model.kernel.factor) + " squared " +
         (model.kernel.rbf_squared ? "1" : "0") + "\n";
  out += "classes " + std::to_string(model.class_labels.size()) + "\n";
  for (std::size_t c = 0; c < model.class_labels.size(); ++c) {
    const Subrange sr = c < model.class_subranges.size() ? model.class_subranges[c] : Subrange{0.0, 0.0};
    out += "class " + std::to_string(model.class_labels[c]) + " " + format_double(sr.first) + " " +
           format_double(sr.second) + "\n";
  }
  const std::size_t dim = pool.empty() ? 0 : pool.front()->size();
  out += "vectors " + std::to_string(pool.size()) + " dim " + std::to_string(dim) + "\n";
  for (const auto* sv : pool) {
    for (std::size_t i = 0; i < sv->size(); ++i) {
      if (i) out += ' ';
      out += format_double((*sv)[i]);
    }
    out += "\n";
  }
  out += "machines " + std::to_string(model.machines.size()) + "\n";
  for (const auto& m : model.machines) {
    out += "machine " + std::to_string(m.positive) + " " + std::to_string(m.negative) + " bias " +
           format_double(m.model.bias) + " nsv " + std::to_string(m.model.support_vectors.size()) + "\n";
    for (std::size_t i = 0; i < m.model.support_vectors.size(); ++i) {
      out += std::to_string(pool_index.at(m.model.support_vectors[i])) + " " + format_double(m.model.alpha_y[i]) + "\n";
    }
  }
  return out;
}

MulticlassSvmModel parse_model(const std::string& text) {
  LineReader r(text);
  auto magic = r.next("magic");
  if (magic.front() != "scatterlm-svm-model") throw Error(ErrorKind::Parse, "not a scatterlm SVM model file");
  const auto ver = r.expect("format_version", 2);
  if (to_int(ver[1]) != kModelFormatVersion) {
    throw Error(ErrorKind::Compatibility, "unsupported model format_version " + ver[1]);
  }
  MulticlassSvmModel model;
  const auto k = r.expect("kernel", 5);
  model.kernel.kind = parse_kernel_kind(k[1]);
  model.kernel.factor = to_double(k[2]);
  model.kernel.rbf_squared = k[4] == "1";
  const int classes = to_int(r.expect("classes", 2)[1]);
  for (int c = 0; c < classes; ++c) {
    const auto cl = r.expect("class", 4);
    model.class_labels.push_back(to_int(cl[1]));
    model.class_subranges.emplace_back(to_double(cl[2]), to_double(cl[3]));
  }
  const auto vec_hdr = r.expect("vectors", 4);
  const int n_vectors = to_int(vec_hdr[1]);
  const int dim = to_int(vec_hdr[3]);
  std::vector<FeatureVector> pool(n_vectors);
  for (auto& v : pool) {
    const auto toks = r.next("support vector");
    if (static_cast<int>(toks.size()) != dim) throw Error(ErrorKind::Parse, "support vector has wrong length");
    v.reserve(dim);
    for (const auto& t : toks) v.push_back(to_double(t));
  }
  const int n_machines = to_int(r.expect("machines", 2)[1]);
  for (int m = 0; m < n_machines; ++m) {
    const auto hdr = r.expect("machine", 7);
    MulticlassSvmModel::Machine machine;
    machine.positive = to_int(hdr[1]);
    machine.negative = to_int(hdr[2]);
    machine.model.kernel = model.kernel;
    machine.model.bias = to_double(hdr[4]);
    const int nsv = to_int(hdr[6]);
    for (int s = 0; s < nsv; ++s) {
      const auto toks = r.next("coefficient");
      if (toks.size() != 2) throw Error(ErrorKind::Parse, "bad coefficient line");
      const int idx = to_int(toks[0]);
      if (idx < 0 || idx >= n_vectors) throw Error(ErrorKind::Parse, "support vector index out of range");
      machine.model.support_vectors.push_back(pool[idx]);
      machine.model.alpha_y.push_back(to_double(toks[1]));
    }
    model.machines.push_back(std::move(machine));
  }
  const std::size_t n = model.class_labels.size();
  if (model.machines.size() != n * (n - 1) / 2) {
    throw Error(ErrorKind::Parse, "model must hold n(n-1)/2 machines");
  }
  return model;
}

void save_model(const std::filesystem::path& path, const MulticlassSvmModel& model) {
  write_text_file(path, format_model(model));
}

MulticlassSvmModel load_model(const std::filesystem::path& path) { return parse_model(read_text_file(path)); }

}  // namespace scatterlm
