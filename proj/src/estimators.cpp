#include "rtdg/estimators.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "rtdg/error.hpp"

namespace rtdg {

std::string_view estimator_name(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::PHier: return "p_hier";
    case EstimatorKind::HHier: return "h_hier";
    case EstimatorKind::LocalProblem: return "local";
    case EstimatorKind::Averaging: return "averaging";
  }
  return "unknown";
}

std::optional<EstimatorKind> parse_estimator(std::string_view name) {
  for (EstimatorKind k :
       {EstimatorKind::PHier, EstimatorKind::HHier, EstimatorKind::LocalProblem, EstimatorKind::Averaging})
    if (estimator_name(k) == name) return k;
  return std::nullopt;
}

double estimator_alpha(EstimatorKind kind, int k) {
  switch (kind) {
    case EstimatorKind::PHier: return penalty_alpha(k + 1);
    case EstimatorKind::HHier:
    case EstimatorKind::LocalProblem: return 2.0 * penalty_alpha(k);
    case EstimatorKind::Averaging: return penalty_alpha(k);
  }
  return penalty_alpha(k);
}

SolveResult solve_for_estimator(EstimatorKind kind, MeshPtr mesh, int k, const ProblemData& problem,
                                const EstimatorOptions& options) {
  if (k < 0) throw std::invalid_argument("negative degree");
  return solve(std::move(mesh), TensorShape{k, k}, problem, options.lambda, estimator_alpha(kind, k), options.solve);
}

std::vector<double> broken_h1_contributions(const DiscreteSolution& v) {
  const TensorShape& s = v.shape();
  const QuadratureRule& q = cached_gauss_rule(std::max(s.z_modes(), s.mu_modes()) + 1);
  const QuadTreeMesh& mesh = v.mesh();
  std::vector<double> out;
  out.reserve(mesh.num_leaves());
  for (ElementId id : mesh.leaves()) {
    const Element& e = mesh.element(id);
    double sum = e.area() * v.local(id).squaredNorm();
    for (std::size_t i = 0; i < q.size(); ++i) {
      const double z = e.z.lo + e.z.length() * q.points[i];
      for (std::size_t j = 0; j < q.size(); ++j) {
        const double mu = e.mu.lo + e.mu.length() * q.points[j];
        const double dz = v.eval(id, z, mu).dz;
        sum += e.area() * q.weights[i] * q.weights[j] * mu * mu * dz * dz;
      }
    }
    out.push_back(sum);
  }
  return out;
}

namespace {

EstimateResult from_squares(const QuadTreeMesh& mesh, const std::vector<double>& squares, NormKind norm) {
  EstimateResult r;
  r.norm = norm;
  r.ids.assign(mesh.leaves().begin(), mesh.leaves().end());
  r.eta.reserve(squares.size());
  double total = 0.0;
  for (double s : squares) {
    r.eta.push_back(std::sqrt(std::max(0.0, s)));
    total += s;
  }
  r.value = std::sqrt(std::max(0.0, total));
  return r;
}

double vh_norm(const DiscreteSolution& v, const Coefficients& coefficients) {
  return norm(v, coefficients, NormKind::Vh);
}

// Sums per-fine-leaf values onto the coarse leaves they descend from.
std::vector<double> accumulate_to_coarse(const QuadTreeMesh& coarse, const QuadTreeMesh& fine,
                                         const std::vector<double>& fine_values) {
  const DofMap cmap(coarse, TensorShape{0, 0});
  std::vector<double> out(coarse.num_leaves(), 0.0);
  const auto leaves = fine.leaves();
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    const auto anc = fine.ancestor_in(coarse, leaves[i]);
    if (!anc) throw Error("fine mesh is not a refinement of the coarse mesh");
    out[cmap.leaf_index(*anc)] += fine_values[i];
  }
  return out;
}

}  // namespace

EstimateResult estimate_p(MeshPtr mesh, int k, const ProblemData& problem, const EstimatorOptions& options,
                          const DiscreteSolution* u_k) {
  if (k < 0) throw std::invalid_argument("estimate_p: negative degree");
  const double alpha = penalty_alpha(k + 1);
  DiscreteSolution low;
  if (u_k) {
    if (u_k->shape().k_z != k || u_k->shape().k_mu != k) throw std::invalid_argument("estimate_p: degree mismatch");
    low = *u_k;
  } else {
    low = solve(mesh, TensorShape{k, k}, problem, options.lambda, alpha, options.solve).solution;
  }
  const TensorShape high_shape{k + 1, k + 1};
  const DiscreteSolution high = solve(mesh, high_shape, problem, options.lambda, alpha, options.solve).solution;
  DiscreteSolution zeta = embed_degree(low, high_shape);
  zeta.coefficients() = high.coefficients() - zeta.coefficients();

  EstimateResult r = from_squares(*mesh, broken_h1_contributions(zeta), NormKind::BrokenH1);
  r.vh_value = vh_norm(zeta, problem.coefficients);
  return r;
}

EstimateResult estimate_h(MeshPtr mesh, int k, const ProblemData& problem, const EstimatorOptions& options,
                          const DiscreteSolution* u_coarse) {
  if (k < 0) throw std::invalid_argument("estimate_h: negative degree");
  const double alpha_fine = penalty_alpha(k);
  const TensorShape shape{k, k};
  DiscreteSolution coarse;
  if (u_coarse) {
    if (!(u_coarse->shape() == shape)) throw std::invalid_argument("estimate_h: degree mismatch");
    coarse = *u_coarse;
  } else {
    coarse = solve(mesh, shape, problem, options.lambda, 2.0 * alpha_fine, options.solve).solution;
  }
  auto fine = std::make_shared<QuadTreeMesh>(*mesh);
  fine->refine_all();
  const DiscreteSolution u_fine = solve(fine, shape, problem, options.lambda, alpha_fine, options.solve).solution;
  DiscreteSolution zeta = prolongate(coarse, fine);
  zeta.coefficients() = u_fine.coefficients() - zeta.coefficients();

  EstimateResult r =
      from_squares(*mesh, accumulate_to_coarse(*mesh, *fine, broken_h1_contributions(zeta)), NormKind::BrokenH1);
  r.vh_value = vh_norm(zeta, problem.coefficients);
  return r;
}

LocalEstimate estimate_local(const DiscreteSolution& u_coarse, const ProblemData& problem,
                             const EstimatorOptions& options) {
  const QuadTreeMesh& coarse = u_coarse.mesh();
  const TensorShape shape = u_coarse.shape();
  const double alpha_fine = penalty_alpha(shape.k_z);
  auto fine = std::make_shared<QuadTreeMesh>(coarse);
  fine->refine_all();

  const AssembledSystem sys = assemble(fine, shape, problem, options.lambda, alpha_fine);
  const ScatteringOperator scatter(*fine, shape, problem.coefficients);
  const Eigen::VectorXd pu = prolongate(u_coarse, fine).coefficients();
  const Eigen::VectorXd residual = sys.rhs - sys.op * pu + scatter.apply(pu);

  const int d = shape.dim();
  const int n = 4 * d;
  DiscreteSolution eta(fine, shape);
  for (ElementId K : coarse.leaves()) {
    const auto& kids = *fine->element(K).children;
    std::vector<Eigen::Index> index(n);
    for (int c = 0; c < 4; ++c) {
      const std::size_t off = sys.dofs.offset(kids[c]);
      for (int i = 0; i < d; ++i) index[c * d + i] = static_cast<Eigen::Index>(off + i);
    }
    Eigen::MatrixXd A = -scattering_block(*fine, shape, problem.coefficients, kids);
    Eigen::VectorXd b(n);
    for (int jl = 0; jl < n; ++jl) {
      b[jl] = residual[index[jl]];
      for (SparseMatrix::InnerIterator it(sys.op, index[jl]); it; ++it) {
        const auto pos = std::lower_bound(index.begin(), index.end(), it.row());
        if (pos != index.end() && *pos == it.row()) A(pos - index.begin(), jl) += it.value();
      }
    }
    const Eigen::VectorXd x = A.partialPivLu().solve(b);
    if (!x.allFinite()) throw Error(fmt::format("estimate_local: singular local problem on element {}", K));
    for (int jl = 0; jl < n; ++jl) eta.coefficients()[index[jl]] = x[jl];
  }

  LocalEstimate out;
  out.result = from_squares(coarse, accumulate_to_coarse(coarse, *fine, broken_h1_contributions(eta)),
                            NormKind::BrokenH1);
  out.result.vh_value = vh_norm(eta, problem.coefficients);
  out.eta = std::move(eta);
  return out;
}

NodalAverage::NodalAverage(const DiscreteSolution& u_h) : mesh_(&u_h.mesh()) {
  for (const MeshVertex& v : mesh_->vertices()) {
    double area = 0.0, sum = 0.0;
    for (ElementId id : v.patch) {
      const double a = mesh_->element(id).area();
      area += a;
      sum += a * u_h.eval(id, v.z, v.mu).value;
    }
    nodes_[{v.z, v.mu}] = sum / area;
  }
}

double NodalAverage::nodal(double z, double mu) const {
  const auto it = nodes_.find({z, mu});
  if (it == nodes_.end()) throw std::out_of_range(fmt::format("NodalAverage: ({}, {}) is not a mesh vertex", z, mu));
  return it->second;
}

double NodalAverage::value(ElementId id, double z, double mu) const {
  const Element& e = mesh_->element(id);
  const double s = (z - e.z.lo) / e.z.length(), t = (mu - e.mu.lo) / e.mu.length();
  return (1 - s) * (1 - t) * nodal(e.z.lo, e.mu.lo) + s * (1 - t) * nodal(e.z.hi, e.mu.lo) +
         (1 - s) * t * nodal(e.z.lo, e.mu.hi) + s * t * nodal(e.z.hi, e.mu.hi);
}

EstimateResult estimate_averaging(const DiscreteSolution& u_h) {
  if (u_h.shape().k_z != 0 || u_h.shape().k_mu != 0)
    throw std::invalid_argument("estimate_averaging: requires k_z = k_mu = 0");
  const NodalAverage avg(u_h);
  const QuadratureRule& q = cached_gauss_rule(3);
  std::vector<double> squares;
  for (ElementId id : u_h.mesh().leaves()) {
    const Element& e = u_h.mesh().element(id);
    double sum = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i)
      for (std::size_t j = 0; j < q.size(); ++j) {
        const double z = e.z.lo + e.z.length() * q.points[i];
        const double mu = e.mu.lo + e.mu.length() * q.points[j];
        const double diff = u_h.eval(id, z, mu).value - avg.value(id, z, mu);
        sum += q.weights[i] * q.weights[j] * diff * diff;
      }
    squares.push_back(e.area() * sum);
  }
  EstimateResult r = from_squares(u_h.mesh(), squares, NormKind::L2);
  r.vh_value = 0.0;
  return r;
}

// ---------------------------------------------------------------------------

AdaptRun adapt_loop(const ProblemData& problem, const AdaptOptions& options, const StepCallback& on_step) {
  if (options.k < 0) throw std::invalid_argument("adapt_loop: negative degree");
  if (!(options.theta > 0.0 && options.theta <= 1.0)) throw std::invalid_argument("adapt_loop: theta must lie in (0,1]");
  if (options.kind == EstimatorKind::Averaging && options.k != 0)
    throw std::invalid_argument("adapt_loop: the averaging estimator requires k = 0");
  if (options.initial_levels < 0) throw std::invalid_argument("adapt_loop: negative initial level");

  const TensorShape shape{options.k, options.k};
  auto mesh = std::make_shared<const QuadTreeMesh>(build_uniform(problem.length, options.initial_levels));
  AdaptRun run;
  for (int step = 0; step < options.max_steps; ++step) {
    const std::size_t dofs = mesh->num_leaves() * static_cast<std::size_t>(shape.dim());
    if (step > 0 && dofs > options.max_dofs) break;
    const auto t0 = std::chrono::steady_clock::now();

    const SolveResult primary = solve_for_estimator(options.kind, mesh, options.k, problem, options.estimator);
    EstimateResult est;
    switch (options.kind) {
      case EstimatorKind::PHier: est = estimate_p(mesh, options.k, problem, options.estimator, &primary.solution); break;
      case EstimatorKind::HHier: est = estimate_h(mesh, options.k, problem, options.estimator, &primary.solution); break;
      case EstimatorKind::LocalProblem: est = estimate_local(primary.solution, problem, options.estimator).result; break;
      case EstimatorKind::Averaging: est = estimate_averaging(primary.solution); break;
    }

    AdaptStep rec;
    rec.step = step;
    rec.N = mesh->num_leaves();
    rec.dofs = dofs;
    rec.estimator = est.value;
    if (problem.has_exact()) {
      const ErrorNorms e = error_norms(primary.solution, problem, false);
      rec.error_broken_h1 = e.broken_h1;
      rec.error_l2 = e.l2;
      const double ref = est.norm == NormKind::L2 ? e.l2 : e.broken_h1;
      rec.ratio = ref > 0.0 ? est.value / ref : 0.0;
    }
    const std::vector<ElementId> marked = dorfler_mark(est.ids, est.eta, options.theta);
    rec.marked = marked.size();
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    run.steps.push_back(rec);
    if (on_step) on_step(rec, *mesh);

    if (marked.empty()) {
      run.converged = true;
      break;
    }
    mesh = std::make_shared<const QuadTreeMesh>(refine(*mesh, marked));
  }
  return run;
}

std::string adapt_log_header() { return "step,N,dofs,error_brokenH1,error_L2,estimator,theta,kind"; }

std::string adapt_log_row(const AdaptStep& s, const AdaptOptions& options) {
  const auto opt = [](const std::optional<double>& v) { return v ? fmt::format("{:.6e}", *v) : std::string(); };
  return fmt::format("{},{},{},{},{},{:.6e},{},{}", s.step, s.N, s.dofs, opt(s.error_broken_h1), opt(s.error_l2),
                     s.estimator, options.theta, estimator_name(options.kind));
}

double fitted_slope(const std::vector<double>& dofs, const std::vector<double>& values) {
  if (dofs.size() != values.size()) throw std::invalid_argument("fitted_slope: size mismatch");
  const std::size_t n = dofs.size();
  const std::size_t start = n / 2;
  if (n - start < 2) throw std::invalid_argument("fitted_slope: need at least 2 points in the fitted half");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double m = static_cast<double>(n - start);
  for (std::size_t i = start; i < n; ++i) {
    const double x = std::log(dofs[i]), y = std::log(values[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double den = m * sxx - sx * sx;
  if (den == 0.0) throw std::invalid_argument("fitted_slope: degenerate abscissae");
  return (m * sxy - sx * sy) / den;
}

}  // namespace rtdg
