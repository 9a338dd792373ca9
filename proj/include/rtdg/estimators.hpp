#pragma once

// A posteriori error estimators and the solve-estimate-mark-refine loop.

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rtdg/assembly.hpp"
#include "rtdg/solver.hpp"

namespace rtdg {

enum class EstimatorKind { PHier, HHier, LocalProblem, Averaging };

std::string_view estimator_name(EstimatorKind kind);
std::optional<EstimatorKind> parse_estimator(std::string_view name);

struct EstimateResult {
  double value = 0.0;            // global estimator in `norm`
  std::vector<ElementId> ids;    // leaves of the estimated mesh, ascending
  std::vector<double> eta;       // per-leaf contribution, aligned with ids
  NormKind norm = NormKind::BrokenH1;
  double vh_value = 0.0;         // same estimator in the Vh norm of the space it lives in
};

struct EstimatorOptions {
  double lambda = 1.0;
  SolveOptions solve;
};

/// Penalty of the primary solve an estimator is compatible with.
double estimator_alpha(EstimatorKind kind, int k);

/// Solves on (mesh, k) with the penalty the estimator expects.
SolveResult solve_for_estimator(EstimatorKind kind, MeshPtr mesh, int k, const ProblemData& problem,
                                const EstimatorOptions& options = {});

/// zeta_p = u_{T,k+1} - u_{T,k}, both with alpha = 1/2 + C_dt(k+1).
/// `u_k` may carry an already computed degree-k solution.
EstimateResult estimate_p(MeshPtr mesh, int k, const ProblemData& problem, const EstimatorOptions& options = {},
                          const DiscreteSolution* u_k = nullptr);

/// zeta_h = u_{T',k} - u_{T,k}; T' uniform refinement, alpha' = 1/2 + C_dt(k), alpha = 2 alpha'.
/// Contributions are accumulated per coarse leaf.
EstimateResult estimate_h(MeshPtr mesh, int k, const ProblemData& problem, const EstimatorOptions& options = {},
                          const DiscreteSolution* u_coarse = nullptr);

struct LocalEstimate {
  EstimateResult result;        // per coarse leaf ||eta_K||; value is the broken-H1 norm of eta
  DiscreteSolution eta;         // sum of the local solutions, on T'
};

/// Local problems on the four children of every leaf, with the zero-extended form a_{h'}.
LocalEstimate estimate_local(const DiscreteSolution& u_coarse, const ProblemData& problem,
                             const EstimatorOptions& options = {});

/// Continuous piecewise-bilinear average of a broken function.  Every leaf
/// corner, hanging or not, gets the area-weighted mean of the one-sided values
/// of all leaves whose closure contains it.
class NodalAverage {
public:
  explicit NodalAverage(const DiscreteSolution& u_h);

  double nodal(double z, double mu) const;
  /// Bilinear interpolant of the corner values of leaf `id`.
  double value(ElementId id, double z, double mu) const;

private:
  const QuadTreeMesh* mesh_;
  std::map<std::pair<double, double>, double> nodes_;
};

/// Requires shape (0, 0); eta_K = ||u_h - u~||_{L2(K)}.
EstimateResult estimate_averaging(const DiscreteSolution& u_h);

/// Per-leaf squared broken-H1 contributions of a discrete function; they sum to the squared global value.
std::vector<double> broken_h1_contributions(const DiscreteSolution& v);

// ---------------------------------------------------------------------------

struct AdaptOptions {
  int k = 0;
  EstimatorKind kind = EstimatorKind::PHier;
  double theta = 0.75;
  int initial_levels = 2;
  std::size_t max_dofs = 20000;  // no solve is started on a space larger than this
  int max_steps = 60;
  EstimatorOptions estimator;
};

struct AdaptStep {
  int step = 0;
  std::size_t N = 0;
  std::size_t dofs = 0;
  std::optional<double> error_broken_h1;
  std::optional<double> error_l2;
  double estimator = 0.0;
  double ratio = 0.0;  // estimator / error in the estimator's norm, 0 without exact solution
  std::size_t marked = 0;
  double seconds = 0.0;
};

struct AdaptRun {
  std::vector<AdaptStep> steps;
  bool converged = false;  // estimator vanished
};

using StepCallback = std::function<void(const AdaptStep&, const QuadTreeMesh&)>;

/// Throws std::invalid_argument for theta outside (0, 1], Averaging with k != 0, or k < 0.
AdaptRun adapt_loop(const ProblemData& problem, const AdaptOptions& options, const StepCallback& on_step = {});

std::string adapt_log_header();
/// `step,N,dofs,error_brokenH1,error_L2,estimator,theta,kind`; error columns empty when unknown.
std::string adapt_log_row(const AdaptStep& step, const AdaptOptions& options);

/// Least-squares slope of log(value) against log(dofs) over the last half of the points.
double fitted_slope(const std::vector<double>& dofs, const std::vector<double>& values);

}  // namespace rtdg
