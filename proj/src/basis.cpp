#include "rtdg/basis.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>

#include <Eigen/Dense>

#include "rtdg/error.hpp"

namespace rtdg {

namespace {

// Legendre P_n and P_n' on [-1,1] by the three-term recurrence.
void legendre_pm1(int degree, double x, double* p, double* dp) {
  p[0] = 1.0;
  if (dp) dp[0] = 0.0;
  if (degree == 0) return;
  p[1] = x;
  if (dp) dp[1] = 1.0;
  for (int n = 1; n < degree; ++n) {
    p[n + 1] = ((2.0 * n + 1.0) * x * p[n] - n * p[n - 1]) / (n + 1.0);
    if (dp) dp[n + 1] = dp[n - 1] + (2.0 * n + 1.0) * p[n];
  }
}

}  // namespace

LegendreBasis1D::LegendreBasis1D(int degree) : degree_(degree) {
  if (degree < 0) throw std::invalid_argument("LegendreBasis1D: negative degree");
}

void LegendreBasis1D::eval(double t, std::span<double> values, std::span<double> derivs) const {
  const double x = 2.0 * t - 1.0;
  legendre_pm1(degree_, x, values.data(), derivs.empty() ? nullptr : derivs.data());
  for (int n = 0; n <= degree_; ++n) {
    const double s = std::sqrt(2.0 * n + 1.0);
    values[n] *= s;
    if (!derivs.empty()) derivs[n] *= 2.0 * s;
  }
}

double LegendreBasis1D::value(int n, double t) const {
  std::vector<double> p(n + 1);
  legendre_pm1(n, 2.0 * t - 1.0, p.data(), nullptr);
  return std::sqrt(2.0 * n + 1.0) * p[n];
}

double LegendreBasis1D::derivative(int n, double t) const {
  std::vector<double> p(n + 1), dp(n + 1);
  legendre_pm1(n, 2.0 * t - 1.0, p.data(), dp.data());
  return 2.0 * std::sqrt(2.0 * n + 1.0) * dp[n];
}

QuadratureRule gauss_rule(int n) {
  if (n < 1) throw std::invalid_argument("gauss_rule: need at least one point");
  QuadratureRule rule;
  rule.points.resize(n);
  rule.weights.resize(n);
  rule.exactness = 2 * n - 1;
  std::vector<double> p(n + 1), dp(n + 1);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      legendre_pm1(n, x, p.data(), dp.data());
      const double dx = p[n] / dp[n];
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    legendre_pm1(n, x, p.data(), dp.data());
    const double w = 2.0 / ((1.0 - x * x) * dp[n] * dp[n]);
    // x is the i-th largest root; store both symmetric nodes in ascending order.
    rule.points[n - 1 - i] = 0.5 * (1.0 + x);
    rule.points[i] = 0.5 * (1.0 - x);
    rule.weights[n - 1 - i] = 0.5 * w;
    rule.weights[i] = 0.5 * w;
  }
  if (n % 2 == 1) rule.points[n / 2] = 0.5;
  return rule;
}

const QuadratureRule& cached_gauss_rule(int n) {
  static std::mutex mutex;
  static std::map<int, QuadratureRule> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, gauss_rule(n)).first;
  return it->second;
}

ShapeValue eval_shape(const TensorShape& shape, int index, double zhat, double muhat) {
  if (index < 0 || index >= shape.dim()) throw std::out_of_range("eval_shape: index out of range");
  const int a = shape.z_mode(index);
  const int b = shape.mu_mode(index);
  const LegendreBasis1D zb(a), mb(b);
  const double psi = mb.value(b, muhat);
  return {zb.value(a, zhat) * psi, zb.derivative(a, zhat) * psi};
}

double compute_C_ie(int k) {
  if (k < 0) throw std::invalid_argument("compute_C_ie: negative degree");
  static std::mutex mutex;
  static std::map<int, double> cache;
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(k); it != cache.end()) return it->second;
  }

  const int n = k + 1;
  const LegendreBasis1D basis(k);
  const QuadratureRule& q = cached_gauss_rule(k + 2);
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  std::vector<double> v(n), dv(n);
  for (std::size_t iq = 0; iq < q.size(); ++iq) {
    basis.eval(q.points[iq], v, dv);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        D(i, j) += q.weights[iq] * dv[i] * dv[j];
        M(i, j) += q.weights[iq] * v[i] * v[j];
      }
  }

  // Cholesky reduction of the generalized problem.
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(D, M, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw Error("compute_C_ie: eigenvalue solve failed");
  const double value = k == 0 ? 0.0 : solver.eigenvalues().maxCoeff();

  std::lock_guard lock(mutex);
  cache.emplace(k, value);
  return value;
}

double C_dt(int k) { return 1.0 + 2.0 * std::sqrt(compute_C_ie(k)); }

double penalty_alpha(int k_z, PenaltyConvention convention) {
  if (convention == PenaltyConvention::ReferencePm1) return 1.5 + std::sqrt(compute_C_ie(k_z));
  return penalty_alpha(k_z);
}

std::vector<PenaltyConstants> penalty_table(int kmax) {
  std::vector<PenaltyConstants> rows;
  for (int k = 0; k <= kmax; ++k) rows.push_back({k, compute_C_ie(k), C_dt(k), penalty_alpha(k)});
  return rows;
}

}  // namespace rtdg
