#pragma once

// Coefficients, manufactured solutions and their data for the second-order
// (even-parity) slab problem
//
//   -d_z(mu^2/sigma_t d_z u) + sigma_t u = sigma_s P u + f   in (0,L) x (0,1),
//   u + (mu/sigma_t) d_n u = g                             on z = 0, z = L,
//
// with the angular average (P u)(z) = int_0^1 u(z, mu') dmu'.

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rtdg/mesh.hpp"
#include "rtdg/space.hpp"

namespace rtdg {

struct Material {
  double sigma_t = 1.0;
  double sigma_s = 0.0;
};

/// Piecewise-constant cross sections keyed by region id.
class Coefficients {
public:
  explicit Coefficients(Material fallback);
  Coefficients(Material fallback, std::map<int, Material> regions);

  static Coefficients uniform(double sigma_t, double sigma_s) { return Coefficients({sigma_t, sigma_s}); }

  const Material& at(int region) const;
  /// min over all regions of sigma_t - sigma_s.
  double margin() const;
  bool scattering_free() const;

private:
  void validate() const;

  Material fallback_;
  std::map<int, Material> regions_;
};

enum class CaseTag { Smooth, PointSingularity, LineDiscontinuity };

std::string_view case_name(CaseTag tag);
std::optional<CaseTag> parse_case(std::string_view name);

struct ProblemData {
  double length = 1.0;
  Coefficients coefficients = Coefficients::uniform(1.0, 0.0);
  std::function<double(double, double)> source;     // f(z, mu)
  std::function<double(Side, double)> boundary;     // g(side, mu)
  std::function<double(double, double)> exact;      // optional u(z, mu)
  std::function<double(double, double)> exact_dz;   // optional d_z u(z, mu)
  std::vector<double> mu_breaks;                    // mu-loci where data jump
  std::vector<std::pair<double, double>> singular_points;  // (z, mu) where data lose smoothness

  bool has_exact() const { return static_cast<bool>(exact); }
};

double exact_u(CaseTag tag, double z, double mu);
double exact_dz_u(CaseTag tag, double z, double mu);
double source_f(CaseTag tag, double z, double mu);
double boundary_g(CaseTag tag, Side side, double mu, double length = 1.0);
Coefficients case_coefficients(CaseTag tag);
std::vector<double> case_mu_breaks(CaseTag tag);

/// Manufactured data on (0, length) x (0, 1).
ProblemData make_problem(CaseTag tag, double length = 1.0);

/// Odd part of the intensity, (f_minus - mu d_z u_h) / sigma_t, from the even
/// part on the leaf containing (z, mu).  `f_minus` may be empty (zero).
double recover_odd(const DiscreteSolution& u_h, const Coefficients& coefficients,
                   const std::function<double(double, double)>& f_minus, double z, double mu);

}  // namespace rtdg
