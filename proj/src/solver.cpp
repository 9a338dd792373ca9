#include "rtdg/solver.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <fmt/format.h>

#include "rtdg/error.hpp"

namespace rtdg {

struct InnerSolver::Impl {
  SparseMatrix op;
  Eigen::SimplicialLLT<SparseMatrix> llt;
  Eigen::SparseLU<SparseMatrix> lu;
  bool symmetric = true;
};

InnerSolver::InnerSolver(const SparseMatrix& op, bool symmetric) : impl_(std::make_unique<Impl>()) {
  if (op.rows() != op.cols()) throw std::invalid_argument("InnerSolver: operator is not square");
  impl_->op = op;
  impl_->symmetric = symmetric;
  stats_.method = symmetric ? InnerMethod::Cholesky : InnerMethod::LU;
  if (symmetric) {
    impl_->llt.compute(impl_->op);
    if (impl_->llt.info() != Eigen::Success)
      throw NotPositiveDefinite("inner solve: operator is not positive definite (penalty too small?)");
  } else {
    impl_->lu.analyzePattern(impl_->op);
    impl_->lu.factorize(impl_->op);
    if (impl_->lu.info() != Eigen::Success)
      throw Error(fmt::format("inner solve: LU factorization failed: {}", impl_->lu.lastErrorMessage()));
  }
}

InnerSolver::~InnerSolver() = default;
InnerSolver::InnerSolver(InnerSolver&&) noexcept = default;
InnerSolver& InnerSolver::operator=(InnerSolver&&) noexcept = default;

Eigen::VectorXd InnerSolver::solve(const Eigen::VectorXd& rhs) {
  if (rhs.size() != impl_->op.rows()) throw std::invalid_argument("InnerSolver: rhs size mismatch");
  Eigen::VectorXd x = impl_->symmetric ? Eigen::VectorXd(impl_->llt.solve(rhs)) : Eigen::VectorXd(impl_->lu.solve(rhs));
  const double rn = rhs.norm();
  const double res = (impl_->op * x - rhs).norm();
  const double rel = rn > 0.0 ? res / rn : res;
  if (!std::isfinite(rel)) throw Error("inner solve: breakdown (non-finite solution)");
  stats_.max_relative_residual = std::max(stats_.max_relative_residual, rel);
  ++stats_.solves;
  return x;
}

Eigen::VectorXd inner_solve(const SparseMatrix& op, const Eigen::VectorXd& rhs, bool symmetric) {
  InnerSolver s(op, symmetric);
  return s.solve(rhs);
}

namespace {

double l2_norm(const QuadTreeMesh& mesh, const DofMap& dofs, const Eigen::VectorXd& v) {
  double sum = 0.0;
  const int d = dofs.local_dim();
  for (ElementId id : mesh.leaves()) sum += mesh.element(id).area() * v.segment(dofs.offset(id), d).squaredNorm();
  return std::sqrt(sum);
}

}  // namespace

SolveResult source_iteration(const AssembledSystem& system, const SolveOptions& options) {
  if (!(options.tol > 0.0)) throw std::invalid_argument("source_iteration: tol must be positive");
  if (options.max_iter < 1) throw std::invalid_argument("source_iteration: max_iter must be at least 1");

  InnerSolver inner(system.op, system.lambda == 1.0);
  const ScatteringOperator scatter(*system.mesh, system.shape, system.coefficients);

  SolveReport report;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(system.dofs.dim());

  if (scatter.is_zero()) {
    u = inner.solve(system.rhs);
    report.iterations = 1;
    report.increments.push_back(0.0);
    report.converged = true;
  } else {
    for (int it = 1; it <= options.max_iter; ++it) {
      Eigen::VectorXd next = inner.solve(system.rhs + scatter.apply(u));
      const double inc = l2_norm(*system.mesh, system.dofs, next - u);
      u = std::move(next);
      report.iterations = it;
      report.increments.push_back(inc);
      if (inc < options.tol) {
        report.converged = true;
        break;
      }
    }
  }
  report.final_increment = report.increments.back();
  const std::size_t n = report.increments.size();
  if (n >= 2 && report.increments[n - 2] > 0.0) report.contraction = report.increments[n - 1] / report.increments[n - 2];
  report.inner = inner.stats();
  return {DiscreteSolution(system.mesh, system.shape, std::move(u)), std::move(report)};
}

SolveResult solve(MeshPtr mesh, TensorShape shape, const ProblemData& problem, double lambda, double alpha,
                  const SolveOptions& options) {
  return source_iteration(assemble(std::move(mesh), shape, problem, lambda, alpha), options);
}

std::string solve_report_header() { return "case,k_z,k_mu,N,dofs,iterations,contraction,error_Vh,error_L2"; }

std::string solve_report_row(std::string_view case_name, const DiscreteSolution& u_h, const SolveReport& report,
                             double error_vh, double error_l2) {
  return fmt::format("{},{},{},{},{},{},{:.6e},{:.6e},{:.6e}", case_name, u_h.shape().k_z, u_h.shape().k_mu,
                     u_h.mesh().num_leaves(), u_h.dofs().dim(), report.iterations, report.contraction, error_vh,
                     error_l2);
}

void write_triplets(std::ostream& out, const SparseMatrix& m) {
  for (int k = 0; k < m.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(m, k); it; ++it)
      out << fmt::format("{} {} {:.17g}\n", it.row(), it.col(), it.value());
}

}  // namespace rtdg
