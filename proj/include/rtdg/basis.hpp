#pragma once

// Reference-interval polynomial bases, Gauss quadrature and the penalty
// constants derived from the 1D inverse inequality.

#include <cstddef>
#include <span>
#include <vector>

namespace rtdg {

/// Orthonormal Legendre polynomials on [0,1]: phi_n(t) = sqrt(2n+1) P_n(2t-1).
class LegendreBasis1D {
public:
  explicit LegendreBasis1D(int degree);

  int degree() const { return degree_; }
  int size() const { return degree_ + 1; }

  /// Fills values[n] = phi_n(t) and (optionally) derivs[n] = phi_n'(t).
  void eval(double t, std::span<double> values, std::span<double> derivs = {}) const;

  double value(int n, double t) const;
  double derivative(int n, double t) const;

private:
  int degree_;
};

struct QuadratureRule {
  std::vector<double> points;   // in [0,1]
  std::vector<double> weights;  // positive, sum to 1
  int exactness = 0;            // exact for polynomials of degree <= exactness

  std::size_t size() const { return points.size(); }
};

/// Gauss-Legendre rule with n points mapped to [0,1].
QuadratureRule gauss_rule(int n);

/// Cached variant; returned reference stays valid for the program lifetime.
const QuadratureRule& cached_gauss_rule(int n);

/// Local space P_{k_z+1} (x) P_{k_mu} on an element.
struct TensorShape {
  int k_z = 0;
  int k_mu = 0;

  int z_modes() const { return k_z + 2; }
  int mu_modes() const { return k_mu + 1; }
  int dim() const { return z_modes() * mu_modes(); }
  int index(int a, int b) const { return a * mu_modes() + b; }
  int z_mode(int i) const { return i / mu_modes(); }
  int mu_mode(int i) const { return i % mu_modes(); }

  friend bool operator==(const TensorShape&, const TensorShape&) = default;
};

struct ShapeValue {
  double value = 0.0;
  double dz_ref = 0.0;  // derivative w.r.t. the reference z coordinate
};

/// Evaluates tensor basis function `index` at a reference point in [0,1]^2.
/// Throws std::out_of_range for an invalid index.
ShapeValue eval_shape(const TensorShape& shape, int index, double zhat, double muhat);

/// Largest generalized eigenvalue of D v = lambda M v over P_k on [0,1].
double compute_C_ie(int k);

/// Discrete trace constant 1 + 2 sqrt(C_ie(k)).
double C_dt(int k);

/// Smallest penalty parameter for which the symmetric scheme is stable.
inline double penalty_alpha(int k_z) { return 0.5 + C_dt(k_z); }

enum class PenaltyConvention {
  Standard,       // 1/2 + C_dt(k_z)
  ReferencePm1,   // same formula with C_ie taken on [-1, 1], i.e. 3/2 + sqrt(C_ie(k_z))
};

double penalty_alpha(int k_z, PenaltyConvention convention);

struct PenaltyConstants {
  int k = 0;
  double c_ie = 0.0;
  double c_dt = 0.0;
  double alpha = 0.0;
};

std::vector<PenaltyConstants> penalty_table(int kmax);

}  // namespace rtdg
