#include "rtdg/problem.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "rtdg/error.hpp"

namespace rtdg {

Coefficients::Coefficients(Material fallback) : fallback_(fallback) { validate(); }

Coefficients::Coefficients(Material fallback, std::map<int, Material> regions)
    : fallback_(fallback), regions_(std::move(regions)) {
  validate();
}

void Coefficients::validate() const {
  const auto check = [](const Material& m) {
    if (!(m.sigma_t > 0.0) || !(m.sigma_s >= 0.0) || !std::isfinite(m.sigma_t) || !std::isfinite(m.sigma_s))
      throw Error(fmt::format("inadmissible cross sections sigma_t={} sigma_s={}", m.sigma_t, m.sigma_s));
    if (!(m.sigma_t - m.sigma_s > 0.0))
      throw Error(fmt::format("absorption margin sigma_t - sigma_s = {} must be positive", m.sigma_t - m.sigma_s));
  };
  check(fallback_);
  for (const auto& [region, m] : regions_) check(m);
}

const Material& Coefficients::at(int region) const {
  const auto it = regions_.find(region);
  return it == regions_.end() ? fallback_ : it->second;
}

double Coefficients::margin() const {
  double c = fallback_.sigma_t - fallback_.sigma_s;
  for (const auto& [region, m] : regions_) c = std::min(c, m.sigma_t - m.sigma_s);
  return c;
}

bool Coefficients::scattering_free() const {
  if (fallback_.sigma_s != 0.0) return false;
  for (const auto& [region, m] : regions_)
    if (m.sigma_s != 0.0) return false;
  return true;
}

std::string_view case_name(CaseTag tag) {
  switch (tag) {
    case CaseTag::Smooth: return "smooth";
    case CaseTag::PointSingularity: return "point_singularity";
    case CaseTag::LineDiscontinuity: return "line_discontinuity";
  }
  return "unknown";
}

std::optional<CaseTag> parse_case(std::string_view name) {
  for (CaseTag t : {CaseTag::Smooth, CaseTag::PointSingularity, CaseTag::LineDiscontinuity})
    if (case_name(t) == name) return t;
  return std::nullopt;
}

namespace {

const double kInvSqrt2 = 1.0 / std::sqrt(2.0);

// Angular average of the smooth solution without the e^{-z^2} factor.
double smooth_p_factor() { return 0.5 + std::exp(-0.5) - std::exp(-1.0); }

double smooth_angular(double mu) { return mu >= 0.5 ? 1.0 + std::exp(-mu) : 0.0; }
double line_angular(double mu) { return mu >= kInvSqrt2 ? 2.0 : 1.0; }

}  // namespace

double exact_u(CaseTag tag, double z, double mu) {
  switch (tag) {
    case CaseTag::Smooth: return smooth_angular(mu) * std::exp(-z * z);
    case CaseTag::PointSingularity: return std::pow(mu * mu + z * z, 0.25);
    case CaseTag::LineDiscontinuity: return line_angular(mu) * std::exp(-z * z);
  }
  return 0.0;
}

double exact_dz_u(CaseTag tag, double z, double mu) {
  switch (tag) {
    case CaseTag::Smooth:
    case CaseTag::LineDiscontinuity: return -2.0 * z * exact_u(tag, z, mu);
    case CaseTag::PointSingularity: {
      const double s = mu * mu + z * z;
      if (s == 0.0) return 0.0;
      return 0.5 * z * std::pow(s, -0.75);
    }
  }
  return 0.0;
}

double source_f(CaseTag tag, double z, double mu) {
  // sigma_t = 1 in every case, so f = -mu^2 u_zz + u - sigma_s P u.
  switch (tag) {
    case CaseTag::Smooth: {
      const double e = std::exp(-z * z);
      const double u = smooth_angular(mu) * e;
      return mu * mu * (2.0 - 4.0 * z * z) * u + u - 0.5 * smooth_p_factor() * e;
    }
    case CaseTag::LineDiscontinuity: {
      const double u = exact_u(tag, z, mu);
      return mu * mu * (2.0 - 4.0 * z * z) * u + u;
    }
    case CaseTag::PointSingularity: {
      const double s = mu * mu + z * z;
      if (s == 0.0) return 0.0;  // the flux term is bounded by s^{1/4}
      const double u_zz = 0.5 * std::pow(s, -0.75) - 0.75 * z * z * std::pow(s, -1.75);
      return -mu * mu * u_zz + std::pow(s, 0.25);
    }
  }
  return 0.0;
}

double boundary_g(CaseTag tag, Side side, double mu, double length) {
  const double z = side == Side::Left ? 0.0 : length;
  const double dn = side == Side::Left ? -exact_dz_u(tag, z, mu) : exact_dz_u(tag, z, mu);
  return exact_u(tag, z, mu) + mu * dn;
}

Coefficients case_coefficients(CaseTag tag) {
  return tag == CaseTag::Smooth ? Coefficients::uniform(1.0, 0.5) : Coefficients::uniform(1.0, 0.0);
}

std::vector<double> case_mu_breaks(CaseTag tag) {
  switch (tag) {
    case CaseTag::Smooth: return {0.5};
    case CaseTag::LineDiscontinuity: return {kInvSqrt2};
    case CaseTag::PointSingularity: return {};
  }
  return {};
}

ProblemData make_problem(CaseTag tag, double length) {
  if (!(length > 0.0) || !std::isfinite(length)) throw Error(fmt::format("slab length {} must be positive", length));
  ProblemData p;
  p.length = length;
  p.coefficients = case_coefficients(tag);
  p.source = [tag](double z, double mu) { return source_f(tag, z, mu); };
  p.boundary = [tag, length](Side s, double mu) { return boundary_g(tag, s, mu, length); };
  p.exact = [tag](double z, double mu) { return exact_u(tag, z, mu); };
  p.exact_dz = [tag](double z, double mu) { return exact_dz_u(tag, z, mu); };
  p.mu_breaks = case_mu_breaks(tag);
  if (tag == CaseTag::PointSingularity) p.singular_points = {{0.0, 0.0}};
  return p;
}

double recover_odd(const DiscreteSolution& u_h, const Coefficients& coefficients,
                   const std::function<double(double, double)>& f_minus, double z, double mu) {
  const PointValue v = u_h.eval(z, mu);
  const ElementId id = u_h.mesh().locate(z, mu);
  const double sigma_t = coefficients.at(u_h.mesh().element(id).region).sigma_t;
  const double fm = f_minus ? f_minus(z, mu) : 0.0;
  return (fm - mu * v.dz) / sigma_t;
}

}  // namespace rtdg
