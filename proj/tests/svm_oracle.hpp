#pragma once

// Reference solver for the soft-margin dual, independent of SMO: accelerated
// projected gradient with an exact projection onto {0 <= a <= C, y'a = 0}.
// Only meant for a handful of points.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "scatterlm/svm.hpp"

namespace svm_oracle {

struct Solution {
  std::vector<double> alpha;
  double bias = 0.0;
  double objective = 0.0;
};

inline Eigen::MatrixXd q_matrix(std::span<const scatterlm::FeatureVector> x, std::span<const int> y,
                                const scatterlm::KernelSpec& k) {
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd Q(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) Q(i, j) = y[i] * y[j] * scatterlm::kernel_eval(k, x[i], x[j]);
  return Q;
}

// Projection: a(nu) = clip(v - nu y, 0, C); y'a(nu) is non-increasing in nu.
inline Eigen::VectorXd project(const Eigen::VectorXd& v, const Eigen::VectorXd& y, double C) {
  auto at = [&](double nu) { return (v - nu * y).cwiseMax(0.0).cwiseMin(C).eval(); };
  double lo = -1.0, hi = 1.0;
  while (y.dot(at(lo)) < 0) lo *= 2;
  while (y.dot(at(hi)) > 0) hi *= 2;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (y.dot(at(mid)) > 0 ? lo : hi) = mid;
  }
  return at(0.5 * (lo + hi));
}

inline double objective(const Eigen::MatrixXd& Q, const Eigen::VectorXd& a) { return 0.5 * a.dot(Q * a) - a.sum(); }

inline Solution solve_dual(std::span<const scatterlm::FeatureVector> x, std::span<const int> y,
                           const scatterlm::KernelSpec& k, double C) {
  const Eigen::MatrixXd Q = q_matrix(x, y, k);
  const auto n = Q.rows();
  Eigen::VectorXd yy(n);
  for (Eigen::Index i = 0; i < n; ++i) yy[i] = y[i];
  const double L = std::max(Q.operatorNorm(), 1e-12);
  Eigen::VectorXd a = Eigen::VectorXd::Zero(n), z = a;
  double t = 1.0;
  for (int it = 0; it < 200000; ++it) {
    const Eigen::VectorXd next = project(z - (Q * z - Eigen::VectorXd::Ones(n)) / L, yy, C);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    z = next + ((t - 1.0) / t_next) * (next - a);
    if ((next - a).norm() < 1e-15 && it > 100) {
      a = next;
      break;
    }
    a = next;
    t = t_next;
  }
  Solution s;
  s.alpha.assign(a.data(), a.data() + n);
  s.objective = objective(Q, a);
  // bias from free multipliers: y_i f(x_i) = 1
  const Eigen::VectorXd g = Q * a;
  double sum = 0;
  int free = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (a[i] > 1e-8 * C && a[i] < C * (1 - 1e-8)) {
      sum += yy[i] * (1.0 - g[i]);
      ++free;
    }
  }
  s.bias = free ? sum / free : 0.0;
  return s;
}

inline double decision(std::span<const scatterlm::FeatureVector> x, std::span<const int> y,
                       const scatterlm::KernelSpec& k, const std::vector<double>& alpha, double bias,
                       const scatterlm::FeatureVector& p) {
  double f = bias;
  for (std::size_t i = 0; i < x.size(); ++i) f += alpha[i] * y[i] * scatterlm::kernel_eval(k, x[i], p);
  return f;
}

/// Points violating the KKT conditions by more than tol:
/// a = 0 needs y f >= 1, 0 < a < C needs y f = 1, a = C needs y f <= 1.
inline int kkt_violations(std::span<const scatterlm::FeatureVector> x, std::span<const int> y,
                          const scatterlm::KernelSpec& k, const std::vector<double>& alpha, double bias, double C,
                          double tol) {
  int bad = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double yf = y[i] * decision(x, y, k, alpha, bias, x[i]);
    if (alpha[i] <= 0.0) bad += yf < 1.0 - tol;
    else if (alpha[i] >= C) bad += yf > 1.0 + tol;
    else bad += std::abs(yf - 1.0) > tol;
  }
  return bad;
}

}  // namespace svm_oracle
