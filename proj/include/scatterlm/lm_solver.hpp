#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "scatterlm/forward_model.hpp"

namespace scatterlm {

struct LmConfig {
  int max_iterations = 200;
  /// On the squared residual norm: converged when cost or its decrease falls below.
  double cost_tolerance = 1e-10;
  /// Relative step: |delta| <= step_tolerance * (|p| + step_tolerance).
  double step_tolerance = 1e-8;
  double initial_damping = 1e-3;
  double damping_up = 10.0;
  double damping_down = 0.1;
  double fd_step = 1e-4;
  /// Damping above this is treated as a singular normal system.
  double max_damping = 1e16;
  /// Threads used for Jacobian columns.
  int workers = 1;

  void validate() const;
};

/// Box bounds, one interval per parameter.
struct Bounds {
  std::vector<double> low;
  std::vector<double> high;

  std::size_t size() const noexcept { return low.size(); }
  void validate() const;
  Eigen::VectorXd project(const Eigen::VectorXd& p) const;
  bool contains(const Eigen::VectorXd& p) const;
};

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Forward differences with step h_i = max(fd_step |p_i|, fd_step (high_i - low_i)),
/// taken backwards where p_i + h_i would leave the box. `r0` is residual_fn(p).
Eigen::MatrixXd finite_diff_jacobian(const ResidualFn& residual_fn, const Eigen::VectorXd& p,
                                     const Eigen::VectorXd& r0, double fd_step, const Bounds& bounds,
                                     int workers = 1);

struct LmIteration {
  double cost = 0.0;
  double damping = 0.0;
  std::vector<double> params;
};

struct LmOutcome {
  Eigen::VectorXd params;
  double cost = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string stop_reason;
  /// One entry per accepted iterate, starting with the initial point.
  std::vector<LmIteration> trace;
};

/// Levenberg-Marquardt with Marquardt scaling, accepted steps projected onto
/// the bounds. Cost is the squared residual norm.
LmOutcome lm_minimize(const ResidualFn& residual_fn, const Eigen::VectorXd& init, const Bounds& bounds,
                      const LmConfig& config);

/// Simulated minus target over all fit wavelengths, wavelength-major with the
/// 15 elements m12..m44 in row-major order inside each wavelength.
std::vector<double> residuals(const Signature& target, const ForwardModel& model, const ParamMap& params,
                              const IncidenceConfig& incidence);

struct ParamBound {
  std::string name;
  double low = 0.0;
  double high = 0.0;
};

struct FitResult {
  ParamMap params;
  std::vector<std::string> names;
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string stop_reason;
  double wall_time_s = 0.0;
  std::vector<LmIteration> trace;
};

/// Fits the structure parameters to `target`. The fit grid is the target's
/// wavelength grid; `incidence` supplies angle and discretisation.
FitResult lm_fit(const Signature& target, const ForwardModel& model, const ParamMap& init,
                 const std::vector<ParamBound>& bounds, const IncidenceConfig& incidence,
                 const LmConfig& config);

std::string format_fit_report(const FitResult& fit);

}  // namespace scatterlm
