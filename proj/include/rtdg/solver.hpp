#pragma once

// Source iteration: b_h(u^{n+1}, v) = (sigma_s P u^n, v) + (f, v) + <g, v>.

#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rtdg/assembly.hpp"
#include "rtdg/space.hpp"

namespace rtdg {

enum class InnerMethod { Cholesky, LU };

struct InnerStats {
  InnerMethod method = InnerMethod::Cholesky;
  std::size_t solves = 0;
  double max_relative_residual = 0.0;
};

/// Factorizes a sparse operator once; Cholesky when symmetric, LU otherwise.
class InnerSolver {
public:
  /// Throws NotPositiveDefinite if `symmetric` and the Cholesky factorization breaks down.
  InnerSolver(const SparseMatrix& op, bool symmetric);
  ~InnerSolver();
  InnerSolver(InnerSolver&&) noexcept;
  InnerSolver& operator=(InnerSolver&&) noexcept;

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs);
  const InnerStats& stats() const { return stats_; }

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  InnerStats stats_;
};

Eigen::VectorXd inner_solve(const SparseMatrix& op, const Eigen::VectorXd& rhs, bool symmetric);

struct SolveOptions {
  double tol = 1e-10;
  int max_iter = 200;
};

struct SolveReport {
  int iterations = 0;
  double final_increment = 0.0;
  double contraction = 0.0;  // ratio of the last two increments
  bool converged = false;
  std::vector<double> increments;
  InnerStats inner;
};

struct SolveResult {
  DiscreteSolution solution;
  SolveReport report;
};

SolveResult source_iteration(const AssembledSystem& system, const SolveOptions& options = {});

/// assemble + source_iteration.
SolveResult solve(MeshPtr mesh, TensorShape shape, const ProblemData& problem, double lambda, double alpha,
                  const SolveOptions& options = {});

std::string solve_report_header();
/// `case,k_z,k_mu,N,dofs,iterations,contraction,error_Vh,error_L2`
std::string solve_report_row(std::string_view case_name, const DiscreteSolution& u_h, const SolveReport& report,
                             double error_vh, double error_l2);

/// `row col value` per nonzero, column-major order.
void write_triplets(std::ostream& out, const SparseMatrix& m);

}  // namespace rtdg
