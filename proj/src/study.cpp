#include "rtdg/study.hpp"

#include <cmath>
#include <istream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "rtdg/error.hpp"

namespace rtdg {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw Error(fmt::format("config: {} expects a number, got '{}'", key, v));
  }
  if (pos != v.size() || !std::isfinite(x)) throw Error(fmt::format("config: {} expects a number, got '{}'", key, v));
  return x;
}

long to_long(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  long x = 0;
  try {
    x = std::stol(v, &pos);
  } catch (const std::exception&) {
    throw Error(fmt::format("config: {} expects an integer, got '{}'", key, v));
  }
  if (pos != v.size()) throw Error(fmt::format("config: {} expects an integer, got '{}'", key, v));
  return x;
}

std::string_view penalty_name(PenaltyConvention p) { return p == PenaltyConvention::Standard ? "standard" : "pm1"; }
std::string_view vh_name(VhReport v) { return v == VhReport::Full ? "full" : "energy"; }

}  // namespace

void apply_setting(StudyConfig& c, const std::string& key, const std::string& value) {
  if (key == "case") {
    const auto t = parse_case(value);
    if (!t) throw Error(fmt::format("config: unknown case '{}'", value));
    c.problem = *t;
  } else if (key == "k_z") {
    c.k_z = static_cast<int>(to_long(key, value));
  } else if (key == "k_mu") {
    c.k_mu = static_cast<int>(to_long(key, value));
  } else if (key == "k") {
    c.k_z = c.k_mu = static_cast<int>(to_long(key, value));
  } else if (key == "lambda") {
    c.lambda = to_double(key, value);
  } else if (key == "length") {
    c.length = to_double(key, value);
  } else if (key == "initial_levels") {
    c.initial_levels = static_cast<int>(to_long(key, value));
  } else if (key == "refinements") {
    c.refinements = static_cast<int>(to_long(key, value));
  } else if (key == "max_dofs") {
    const long v = to_long(key, value);
    if (v < 0) throw Error("config: max_dofs must be nonnegative");
    c.max_dofs = static_cast<std::size_t>(v);
  } else if (key == "max_steps") {
    c.max_steps = static_cast<int>(to_long(key, value));
  } else if (key == "estimator") {
    const auto e = parse_estimator(value);
    if (!e) throw Error(fmt::format("config: unknown estimator '{}'", value));
    c.estimator = *e;
  } else if (key == "theta") {
    c.theta = to_double(key, value);
  } else if (key == "tol") {
    c.tol = to_double(key, value);
  } else if (key == "max_iter") {
    c.max_iter = static_cast<int>(to_long(key, value));
  } else if (key == "alpha") {
    if (value == "auto") c.alpha.reset();
    else c.alpha = to_double(key, value);
  } else if (key == "penalty") {
    if (value == "standard") c.penalty = PenaltyConvention::Standard;
    else if (value == "pm1") c.penalty = PenaltyConvention::ReferencePm1;
    else throw Error(fmt::format("config: penalty must be standard or pm1, got '{}'", value));
  } else if (key == "vh_norm") {
    if (value == "full") c.vh_report = VhReport::Full;
    else if (value == "energy") c.vh_report = VhReport::Energy;
    else throw Error(fmt::format("config: vh_norm must be full or energy, got '{}'", value));
  } else if (key == "output") {
    c.output = value;
  } else {
    throw Error(fmt::format("config: unknown key '{}'", key));
  }
}

StudyConfig parse_config(std::istream& in) {
  StudyConfig c;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(fmt::format("config line {}: expected key = value", lineno));
    apply_setting(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return c;
}

StudyConfig parse_config_string(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

std::string serialize_config(const StudyConfig& c) {
  std::string s;
  s += fmt::format("case = {}\n", case_name(c.problem));
  s += fmt::format("k_z = {}\n", c.k_z);
  s += fmt::format("k_mu = {}\n", c.k_mu);
  s += fmt::format("lambda = {}\n", c.lambda);
  s += fmt::format("length = {}\n", c.length);
  s += fmt::format("initial_levels = {}\n", c.initial_levels);
  s += fmt::format("refinements = {}\n", c.refinements);
  s += fmt::format("max_dofs = {}\n", c.max_dofs);
  s += fmt::format("max_steps = {}\n", c.max_steps);
  s += fmt::format("estimator = {}\n", estimator_name(c.estimator));
  s += fmt::format("theta = {}\n", c.theta);
  s += fmt::format("tol = {}\n", c.tol);
  s += fmt::format("max_iter = {}\n", c.max_iter);
  s += fmt::format("alpha = {}\n", c.alpha ? fmt::format("{}", *c.alpha) : std::string("auto"));
  s += fmt::format("penalty = {}\n", penalty_name(c.penalty));
  s += fmt::format("vh_norm = {}\n", vh_name(c.vh_report));
  if (!c.output.empty()) s += fmt::format("output = {}\n", c.output);
  return s;
}

void validate(const StudyConfig& c) {
  if (c.k_z < 0 || c.k_mu < 0) throw Error("config: degrees must be nonnegative");
  if (c.k_z > 12 || c.k_mu > 12) throw Error("config: degrees above 12 are not supported");
  if (!(c.lambda >= -1.0 && c.lambda <= 1.0)) throw Error("config: lambda must lie in [-1, 1]");
  if (!(c.length > 0.0)) throw Error("config: length must be positive");
  if (c.initial_levels < 0 || c.initial_levels > 12) throw Error("config: initial_levels must lie in [0, 12]");
  if (c.refinements < 0 || c.initial_levels + c.refinements > 12) throw Error("config: too many refinements");
  if (c.max_steps < 1) throw Error("config: max_steps must be positive");
  if (!(c.theta > 0.0 && c.theta <= 1.0)) throw Error("config: theta must lie in (0, 1]");
  if (!(c.tol > 0.0)) throw Error("config: tol must be positive");
  if (c.max_iter < 1) throw Error("config: max_iter must be positive");
  if (c.alpha && !(*c.alpha > 0.0)) throw Error("config: alpha must be positive");
}

double study_alpha(const StudyConfig& c) { return c.alpha ? *c.alpha : penalty_alpha(c.k_z, c.penalty); }

UniformStudy run_uniform_study(const StudyConfig& c) {
  validate(c);
  const ProblemData problem = make_problem(c.problem, c.length);
  const TensorShape shape{c.k_z, c.k_mu};
  const double alpha = study_alpha(c);
  UniformStudy study;
  for (int level = c.initial_levels; level <= c.initial_levels + c.refinements; ++level) {
    const std::size_t n = std::size_t{1} << (2 * level);
    if (c.max_dofs > 0 && n * shape.dim() > c.max_dofs && !study.rows.empty()) {
      study.partial = true;
      break;
    }
    auto mesh = std::make_shared<const QuadTreeMesh>(build_uniform(c.length, level));
    const SolveResult r = solve(mesh, shape, problem, c.lambda, alpha, {c.tol, c.max_iter});
    if (!r.report.converged) throw Error(fmt::format("source iteration did not converge on N = {}", n));
    const ErrorNorms e = error_norms(r.solution, problem);
    UniformRow row;
    row.N = mesh->num_leaves();
    row.dofs = r.solution.dofs().dim();
    row.error_vh = c.vh_report == VhReport::Full ? e.vh : e.energy;
    row.error_l2 = e.l2;
    row.iterations = r.report.iterations;
    row.report = r.report;
    if (!study.rows.empty()) {
      const UniformRow& prev = study.rows.back();
      row.rate_vh = std::log2(prev.error_vh / row.error_vh);
      row.rate_l2 = std::log2(prev.error_l2 / row.error_l2);
    }
    study.rows.push_back(row);
  }
  return study;
}

std::string uniform_header() { return "N,dofs,error_Vh,error_L2,rate_Vh,rate_L2,iterations"; }

std::string uniform_row(const UniformRow& r) {
  const auto rate = [](const std::optional<double>& v) { return v ? fmt::format("{:.4f}", *v) : std::string(); };
  return fmt::format("{},{},{:.6e},{:.6e},{},{},{}", r.N, r.dofs, r.error_vh, r.error_l2, rate(r.rate_vh),
                     rate(r.rate_l2), r.iterations);
}

void write_uniform_csv(std::ostream& out, const UniformStudy& s) {
  out << uniform_header() << '\n';
  for (const UniformRow& r : s.rows) out << uniform_row(r) << '\n';
  if (s.partial) out << "# partial: dof budget reached\n";
}

AdaptiveStudy run_adaptive_study(const StudyConfig& c) {
  validate(c);
  if (c.k_z != c.k_mu) throw Error("config: adaptive studies use k_z = k_mu");
  if (c.estimator == EstimatorKind::Averaging && c.k_z != 0)
    throw Error("config: the averaging estimator requires k_z = k_mu = 0");
  const ProblemData problem = make_problem(c.problem, c.length);
  AdaptOptions o;
  o.k = c.k_z;
  o.kind = c.estimator;
  o.theta = c.theta;
  o.initial_levels = c.initial_levels;
  o.max_dofs = c.max_dofs > 0 ? c.max_dofs : kDefaultAdaptiveDofs;
  o.max_steps = c.max_steps;
  o.estimator.lambda = c.lambda;
  o.estimator.solve = {c.tol, c.max_iter};
  AdaptiveStudy study;
  study.run = adapt_loop(problem, o, [&](const AdaptStep&, const QuadTreeMesh& mesh) {
    std::ostringstream os;
    write_mesh(os, mesh);
    study.mesh_dumps.push_back(os.str());
  });
  return study;
}

void write_adaptive_log(std::ostream& out, const AdaptiveStudy& s, const StudyConfig& c) {
  AdaptOptions o;
  o.kind = c.estimator;
  o.theta = c.theta;
  out << adapt_log_header() << '\n';
  for (const AdaptStep& step : s.run.steps) out << adapt_log_row(step, o) << '\n';
}

std::string curve_csv(const AdaptiveStudy& s, const std::string& which, const StudyConfig& c) {
  std::string out = "dofs,value\n";
  const auto& steps = s.run.steps;
  if (steps.empty()) return out;
  const bool l2 = c.estimator == EstimatorKind::Averaging;
  const double slope = l2 ? -0.5 : -(c.k_z + 1) / 2.0;
  for (const AdaptStep& st : steps) {
    double v = 0.0;
    if (which == "error") {
      const auto& e = l2 ? st.error_l2 : st.error_broken_h1;
      if (!e) continue;
      v = *e;
    } else if (which == "estimator") {
      v = st.estimator;
    } else if (which == "reference") {
      v = steps.front().estimator * std::pow(static_cast<double>(st.dofs) / steps.front().dofs, slope);
    } else {
      throw std::invalid_argument("curve_csv: unknown curve");
    }
    out += fmt::format("{},{:.6e}\n", st.dofs, v);
  }
  return out;
}

}  // namespace rtdg
