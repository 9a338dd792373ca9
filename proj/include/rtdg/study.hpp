#pragma once

// Convergence studies driven by a flat key = value configuration.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rtdg/estimators.hpp"
#include "rtdg/problem.hpp"

namespace rtdg {

enum class VhReport { Full, Energy };

inline constexpr std::size_t kDefaultAdaptiveDofs = 20000;

struct StudyConfig {
  CaseTag problem = CaseTag::Smooth;
  int k_z = 1;
  int k_mu = 1;
  double lambda = 1.0;
  double length = 1.0;
  int initial_levels = 2;
  int refinements = 4;               // uniform: meshes initial_levels .. initial_levels + refinements
  std::size_t max_dofs = 0;          // 0: unlimited for uniform studies, kDefaultAdaptiveDofs for adaptive ones
  int max_steps = 60;
  EstimatorKind estimator = EstimatorKind::PHier;
  double theta = 0.75;
  double tol = 1e-10;
  int max_iter = 200;
  std::optional<double> alpha;       // overrides the penalty convention
  PenaltyConvention penalty = PenaltyConvention::Standard;
  VhReport vh_report = VhReport::Full;
  std::string output;                // directory; empty = stdout only

  friend bool operator==(const StudyConfig&, const StudyConfig&) = default;
};

/// Throws Error with a diagnostic naming the offending key.
StudyConfig parse_config(std::istream& in);
StudyConfig parse_config_string(const std::string& text);
/// Applies one `key = value` assignment.
void apply_setting(StudyConfig& config, const std::string& key, const std::string& value);
std::string serialize_config(const StudyConfig& config);

/// Checks module preconditions; throws Error.
void validate(const StudyConfig& config);

double study_alpha(const StudyConfig& config);

struct UniformRow {
  std::size_t N = 0;
  std::size_t dofs = 0;
  double error_vh = 0.0;
  double error_l2 = 0.0;
  std::optional<double> rate_vh;
  std::optional<double> rate_l2;
  int iterations = 0;
  SolveReport report;
};

struct UniformStudy {
  std::vector<UniformRow> rows;
  bool partial = false;  // dof budget cut the sequence short
};

UniformStudy run_uniform_study(const StudyConfig& config);
std::string uniform_header();
std::string uniform_row(const UniformRow& row);
void write_uniform_csv(std::ostream& out, const UniformStudy& study);

struct AdaptiveStudy {
  AdaptRun run;
  std::vector<std::string> mesh_dumps;  // one per step
};

AdaptiveStudy run_adaptive_study(const StudyConfig& config);
void write_adaptive_log(std::ostream& out, const AdaptiveStudy& study, const StudyConfig& config);

/// `dofs,value` curves: error (broken H1, or L2 for averaging), estimator, reference slope.
std::string curve_csv(const AdaptiveStudy& study, const std::string& which, const StudyConfig& config);

}  // namespace rtdg
