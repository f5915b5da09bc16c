#include "scatterlm/lm_solver.hpp"

#include <algorithm>
#include <cmath>

#include "scatterlm/error.hpp"
#include "scatterlm/util.hpp"

namespace scatterlm {

void LmConfig::validate() const {
  if (max_iterations < 1) throw Error(ErrorKind::Validation, "lm max_iterations must be >= 1");
  if (!(cost_tolerance > 0.0) || !(step_tolerance > 0.0) || !(fd_step > 0.0) || !(initial_damping > 0.0)) {
    throw Error(ErrorKind::Validation, "lm tolerances, fd_step and initial damping must be positive");
  }
  if (!(damping_up > 1.0)) throw Error(ErrorKind::Validation, "lm damping_up must exceed 1");
  if (!(damping_down > 0.0 && damping_down < 1.0)) {
    throw Error(ErrorKind::Validation, "lm damping_down must lie in (0, 1)");
  }
}

void Bounds::validate() const {
  if (low.size() != high.size()) throw Error(ErrorKind::Validation, "bounds low/high length mismatch");
  for (std::size_t i = 0; i < low.size(); ++i) {
    if (!(low[i] < high[i])) throw Error(ErrorKind::Validation, "bounds need low < high");
  }
}

Eigen::VectorXd Bounds::project(const Eigen::VectorXd& p) const {
  Eigen::VectorXd q = p;
  for (Eigen::Index i = 0; i < q.size(); ++i) q[i] = std::clamp(q[i], low[i], high[i]);
  return q;
}

bool Bounds::contains(const Eigen::VectorXd& p) const {
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (!(p[i] >= low[i] && p[i] <= high[i])) return false;
  }
  return true;
}

namespace {

void require_finite(const Eigen::VectorXd& r, const char* where) {
  if (!r.allFinite()) throw Error(ErrorKind::Numerical, std::string("non-finite residuals ") + where);
}

}  // namespace

Eigen::MatrixXd finite_diff_jacobian(const ResidualFn& residual_fn, const Eigen::VectorXd& p,
                                     const Eigen::VectorXd& r0, double fd_step, const Bounds& bounds,
                                     int workers) {
  const auto n = p.size();
  Eigen::MatrixXd J(r0.size(), n);
  parallel_for(static_cast<std::size_t>(n), workers, [&](std::size_t col) {
    const auto i = static_cast<Eigen::Index>(col);
    double h = std::max(fd_step * std::abs(p[i]), fd_step * (bounds.high[i] - bounds.low[i]));
    if (p[i] + h > bounds.high[i]) h = -h;
    Eigen::VectorXd q = p;
    q[i] += h;
    const Eigen::VectorXd r = residual_fn(q);
    require_finite(r, "at a perturbed point");
    if (r.size() != r0.size()) throw Error(ErrorKind::Numerical, "residual length changed");
    J.col(i) = (r - r0) / h;
  });
  return J;
}

LmOutcome lm_minimize(const ResidualFn& residual_fn, const Eigen::VectorXd& init, const Bounds& bounds,
                      const LmConfig& config) {
  config.validate();
  bounds.validate();
  if (static_cast<std::size_t>(init.size()) != bounds.size()) {
    throw Error(ErrorKind::Validation, "initial point and bounds differ in length");
  }
  if (!bounds.contains(init)) throw Error(ErrorKind::Range, "initial point lies outside the bounds");

  LmOutcome out;
  Eigen::VectorXd p = init;
  Eigen::VectorXd r = residual_fn(p);
  require_finite(r, "at the initial point");
  double cost = r.squaredNorm();
  double mu = config.initial_damping;
  auto record = [&] { out.trace.push_back({cost, mu, std::vector<double>(p.data(), p.data() + p.size())}); };
  record();

  out.stop_reason = "max_iterations";
  int iter = 0;
  bool done = cost <= config.cost_tolerance;
  if (done) {
    out.converged = true;
    out.stop_reason = "cost_tolerance";
  }
  while (!done && iter < config.max_iterations) {
    ++iter;
    const Eigen::MatrixXd J = finite_diff_jacobian(residual_fn, p, r, config.fd_step, bounds, config.workers);
    const Eigen::MatrixXd JtJ = J.transpose() * J;
    const Eigen::VectorXd g = J.transpose() * r;
    Eigen::VectorXd diag = JtJ.diagonal();
    // Parameters with no sensitivity still get a damping floor.
    const double floor = std::max(1e-12 * diag.maxCoeff(), 1e-300);
    for (Eigen::Index i = 0; i < diag.size(); ++i) diag[i] = std::max(diag[i], floor);

    // Damping retries reuse the Jacobian.
    bool accepted = false;
    while (!accepted) {
      if (mu > config.max_damping) {
        out.stop_reason = "singular";
        done = true;
        break;
      }
      Eigen::MatrixXd A = JtJ;
      A.diagonal() += mu * diag;
      const Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
      Eigen::VectorXd delta;
      if (ldlt.info() == Eigen::Success) delta = ldlt.solve(-g);
      if (delta.size() == 0 || !delta.allFinite()) {
        mu *= config.damping_up;
        continue;
      }
      const Eigen::VectorXd q = bounds.project(p + delta);
      const Eigen::VectorXd step = q - p;
      const bool tiny_step = step.norm() <= config.step_tolerance * (p.norm() + config.step_tolerance);
      if (tiny_step) {
        // The projected step vanished: stationary on the feasible set, or
        // damping grew until no movement is possible.
        out.converged = true;
        out.stop_reason = "step_tolerance";
        done = true;
        break;
      }
      const Eigen::VectorXd rq = residual_fn(q);
      const double cost_q = rq.allFinite() ? rq.squaredNorm() : std::numeric_limits<double>::infinity();
      if (cost_q < cost) {
        const double decrease = cost - cost_q;
        p = q;
        r = rq;
        cost = cost_q;
        mu = std::max(mu * config.damping_down, 1e-300);
        record();
        accepted = true;
        if (cost <= config.cost_tolerance || decrease <= config.cost_tolerance * std::max(1.0, cost)) {
          out.converged = true;
          out.stop_reason = cost <= config.cost_tolerance ? "cost_tolerance" : "cost_decrease";
          done = true;
        }
      } else {
        mu *= config.damping_up;
      }
    }
  }
  out.params = p;
  out.cost = cost;
  out.iterations = iter;
  return out;
}

std::vector<double> residuals(const Signature& target, const ForwardModel& model, const ParamMap& params,
                              const IncidenceConfig& incidence) {
  const Signature sim = model.simulate(params, incidence, target.wavelengths);
  std::vector<double> r;
  r.reserve(sim.size() * kElementsPerWavelength);
  for (std::size_t w = 0; w < sim.size(); ++w)
    for (int e = 1; e < 16; ++e) r.push_back(sim.mueller[w][e] - target.mueller[w][e]);
  return r;
}

FitResult lm_fit(const Signature& target, const ForwardModel& model, const ParamMap& init,
                 const std::vector<ParamBound>& bounds, const IncidenceConfig& incidence,
                 const LmConfig& config) {
  const Stopwatch clock;
  target.validate();
  FitResult fit;
  Bounds box;
  Eigen::VectorXd p0(static_cast<Eigen::Index>(bounds.size()));
  for (std::size_t i = 0; i < bounds.size(); ++i) {
    const auto& b = bounds[i];
    const auto it = init.find(b.name);
    if (it == init.end()) throw Error(ErrorKind::Validation, "no initial value for '" + b.name + "'");
    if (it->second < b.low || it->second > b.high) {
      throw Error(ErrorKind::Range, "initial " + b.name + " = " + format_double(it->second) + " outside [" +
                                        format_double(b.low) + ", " + format_double(b.high) + "]");
    }
    fit.names.push_back(b.name);
    box.low.push_back(b.low);
    box.high.push_back(b.high);
    p0[static_cast<Eigen::Index>(i)] = it->second;
  }
  // Parameters not being fitted stay at their initial values.
  const ParamMap base = init;
  auto to_map = [&](const Eigen::VectorXd& p) {
    ParamMap m = base;
    for (std::size_t i = 0; i < fit.names.size(); ++i) m[fit.names[i]] = p[static_cast<Eigen::Index>(i)];
    return m;
  };
  const ResidualFn fn = [&](const Eigen::VectorXd& p) {
    const auto r = residuals(target, model, to_map(p), incidence);
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(r.size())));
  };
  const LmOutcome o = lm_minimize(fn, p0, box, config);
  fit.params = to_map(o.params);
  fit.residual_norm = std::sqrt(o.cost);
  fit.iterations = o.iterations;
  fit.converged = o.converged;
  fit.stop_reason = o.stop_reason;
  fit.trace = o.trace;
  fit.wall_time_s = clock.seconds();
  return fit;
}

std::string format_fit_report(const FitResult& fit) {
  std::string out = "# scatterlm fit report, format_version 1\n";
  out += "converged " + std::string(fit.converged ? "1" : "0") + "\n";
  out += "stop_reason " + fit.stop_reason + "\n";
  out += "iterations " + std::to_string(fit.iterations) + "\n";
  out += "residual_norm " + format_double(fit.residual_norm) + "\n";
  out += "wall_time_s " + format_double(fit.wall_time_s) + "\n";
  for (const auto& name : fit.names) out += "param " + name + " " + format_double(fit.params.at(name)) + "\n";
  out += "trace step cost damping";
  for (const auto& name : fit.names) out += " " + name;
  out += "\n";
  for (std::size_t k = 0; k < fit.trace.size(); ++k) {
    const auto& t = fit.trace[k];
    out += std::to_string(k) + " " + format_double(t.cost) + " " + format_double(t.damping);
    for (double v : t.params) out += " " + format_double(v);
    out += "\n";
  }
  return out;
}

}  // namespace scatterlm
