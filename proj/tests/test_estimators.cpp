#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include <gtest/gtest.h>

#include "oracle.hpp"
#include "rtdg/estimators.hpp"

using namespace rtdg;

namespace {

MeshPtr share(QuadTreeMesh m) { return std::make_shared<const QuadTreeMesh>(std::move(m)); }

// u = 1 + z lies in every V_h (degree >= 1 in z).
ProblemData linear_problem(double sigma_s) {
  ProblemData p;
  p.coefficients = Coefficients::uniform(1.0, sigma_s);
  p.source = [sigma_s](double z, double) { return (1.0 - sigma_s) * (1.0 + z); };
  p.boundary = [](Side s, double mu) { return s == Side::Left ? 1.0 - mu : 2.0 + mu; };
  p.exact = [](double z, double) { return 1.0 + z; };
  p.exact_dz = [](double, double) { return 1.0; };
  return p;
}

double sum_squares(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

}  // namespace

TEST(Estimators, Names) {
  for (EstimatorKind k : {EstimatorKind::PHier, EstimatorKind::HHier, EstimatorKind::LocalProblem,
                          EstimatorKind::Averaging})
    EXPECT_EQ(parse_estimator(estimator_name(k)), k);
  EXPECT_FALSE(parse_estimator("residual"));
  EXPECT_NEAR(estimator_alpha(EstimatorKind::PHier, 0), penalty_alpha(1), 1e-15);
  EXPECT_NEAR(estimator_alpha(EstimatorKind::HHier, 1), 2.0 * penalty_alpha(1), 1e-15);
}

TEST(Estimators, VanishForDiscreteExactSolution) {
  for (double ss : {0.0, 0.5}) {
    const ProblemData p = linear_problem(ss);
    auto m = share(build_uniform(1.0, 2));
    for (int k : {0, 1}) {
      EXPECT_LT(estimate_p(m, k, p).value, 1e-9);
      EXPECT_LT(estimate_h(m, k, p).value, 1e-9);
      const SolveResult u = solve_for_estimator(EstimatorKind::LocalProblem, m, k, p);
      const LocalEstimate loc = estimate_local(u.solution, p);
      EXPECT_LT(loc.result.value, 1e-9);
      for (double e : loc.result.eta) EXPECT_LT(e, 1e-9);
    }
  }
}

TEST(Estimators, ContributionsAddUp) {
  std::mt19937 rng(51);
  auto m = share(oracle::random_mesh(rng, 1.0, 2, 2));
  for (CaseTag c : {CaseTag::PointSingularity, CaseTag::Smooth}) {
    const ProblemData p = make_problem(c);
    for (int k : {0, 1}) {
      for (const EstimateResult& r : {estimate_p(m, k, p), estimate_h(m, k, p)}) {
        ASSERT_EQ(r.ids.size(), m->num_leaves());
        EXPECT_NEAR(sum_squares(r.eta), r.value * r.value, 1e-10 * r.value * r.value);
        EXPECT_GT(r.vh_value, 0.0);
      }
      const SolveResult u = solve_for_estimator(EstimatorKind::LocalProblem, m, k, p);
      const LocalEstimate loc = estimate_local(u.solution, p);
      EXPECT_NEAR(sum_squares(loc.result.eta), loc.result.value * loc.result.value, 1e-10 * loc.result.value);
    }
  }
}

// zeta_p with both solves at alpha = 1/2 + C_dt(k + 1) equals the broken-H1 norm of the difference.
TEST(Estimators, PHierIsSolutionDifference) {
  auto m = share(build_uniform(1.0, 2));
  const ProblemData p = make_problem(CaseTag::PointSingularity);
  const double a = penalty_alpha(1);
  const SolveResult lo = solve(m, TensorShape{0, 0}, p, 1.0, a);
  const SolveResult hi = solve(m, TensorShape{1, 1}, p, 1.0, a);
  DiscreteSolution diff = embed_degree(lo.solution, TensorShape{1, 1});
  diff.coefficients() = hi.solution.coefficients() - diff.coefficients();
  EXPECT_NEAR(estimate_p(m, 0, p).value, norm(diff, p.coefficients, NormKind::BrokenH1), 1e-12);
}

TEST(Estimators, PHierTracksErrorOnPointSingularity) {
  auto m = share(build_uniform(1.0, 2));
  const ProblemData p = make_problem(CaseTag::PointSingularity);
  const SolveResult u = solve_for_estimator(EstimatorKind::PHier, m, 0, p);
  const double err = error_vs_exact(u.solution, p, NormKind::BrokenH1);
  const double est = estimate_p(m, 0, p, {}, &u.solution).value;
  EXPECT_GT(est, 0.5 * err);
  EXPECT_LT(est, 2.0 * err);
}

TEST(Estimators, PHierRatioBandOnSmoothCase) {
  const ProblemData p = make_problem(CaseTag::Smooth);
  for (int k = 0; k <= 2; ++k)
    for (int levels = 2; levels <= 4; ++levels) {
      auto m = share(build_uniform(1.0, levels));
      const SolveResult u = solve_for_estimator(EstimatorKind::PHier, m, k, p);
      const double ratio = estimate_p(m, k, p, {}, &u.solution).value /
                           error_vs_exact(u.solution, p, NormKind::BrokenH1);
      EXPECT_GE(ratio, 0.2) << "k=" << k << " levels=" << levels;
      EXPECT_LE(ratio, 1.5) << "k=" << k << " levels=" << levels;
    }
}

// Galerkin orthogonality: a_h'(u_T' - u_T, v) = 0 for coarse v when alpha = 2 alpha'.
TEST(Estimators, GalerkinOrthogonality) {
  std::mt19937 rng(52);
  for (CaseTag c : {CaseTag::Smooth, CaseTag::PointSingularity})
    for (int k : {0, 1}) {
      auto coarse = share(oracle::random_mesh(rng, 1.0, 1, 2));
      QuadTreeMesh f = *coarse;
      f.refine_all();
      auto fine = share(f);
      const ProblemData p = make_problem(c);
      const TensorShape s{k, k};
      const SolveOptions tight{1e-13, 400};
      const SolveResult uc = solve(coarse, s, p, 1.0, 2.0 * penalty_alpha(k), tight);
      const AssembledSystem sys = assemble(fine, s, p, 1.0, penalty_alpha(k));
      const SolveResult uf = source_iteration(sys, tight);
      const Eigen::VectorXd zeta = uf.solution.coefficients() - prolongate(uc.solution, fine).coefficients();
      const SparseMatrix P = prolongation_matrix(*coarse, *fine, s);
      const Eigen::VectorXd r = P.transpose() * (sys.op * zeta - scattering_matrix(*fine, s, p.coefficients) * zeta);
      const double scale = (P.transpose() * sys.rhs).cwiseAbs().maxCoeff();
      EXPECT_LT(r.cwiseAbs().maxCoeff(), 1e-9 * scale);
    }
}

TEST(Estimators, LocalOnSingleElementEqualsZetaH) {
  for (CaseTag c : {CaseTag::PointSingularity, CaseTag::Smooth})
    for (int k : {0, 1}) {
      const ProblemData p = make_problem(c);
      auto coarse = share(QuadTreeMesh(1.0));
      QuadTreeMesh f = *coarse;
      f.refine_all();
      auto fine = share(f);
      const TensorShape s{k, k};
      const SolveOptions tight{1e-14, 400};
      const SolveResult uc = solve(coarse, s, p, 1.0, 2.0 * penalty_alpha(k), tight);
      const SolveResult uf = solve(fine, s, p, 1.0, penalty_alpha(k), tight);
      const Eigen::VectorXd zeta = uf.solution.coefficients() - prolongate(uc.solution, fine).coefficients();
      const LocalEstimate loc = estimate_local(uc.solution, p);
      EXPECT_LT((loc.eta.coefficients() - zeta).cwiseAbs().maxCoeff(), 1e-10 * zeta.cwiseAbs().maxCoeff());
    }
}

TEST(Estimators, LocalLowerBound) {
  std::mt19937 rng(53);
  for (int trial = 0; trial < 4; ++trial) {
    const int k = trial % 2;
    auto m = share(oracle::random_mesh(rng, 1.0, 1, 2));
    const ProblemData p = make_problem(trial < 2 ? CaseTag::PointSingularity : CaseTag::LineDiscontinuity);
    const SolveResult u = solve_for_estimator(EstimatorKind::LocalProblem, m, k, p);
    const LocalEstimate loc = estimate_local(u.solution, p);
    const EstimateResult h = estimate_h(m, k, p, {}, &u.solution);
    EXPECT_LT(loc.result.vh_value, 2.0 * (C_dt(k) + penalty_alpha(k)) * h.vh_value);
  }
}

TEST(Averaging, ConstantReproduced) {
  std::mt19937 rng(54);
  auto m = share(oracle::random_mesh(rng, 1.0, 1, 3));
  const DiscreteSolution u = project(m, TensorShape{0, 0}, [](double, double) { return 2.5; });
  const EstimateResult r = estimate_averaging(u);
  EXPECT_LT(r.value, 1e-13);
  EXPECT_EQ(r.norm, NormKind::L2);
}

TEST(Averaging, PlainMeanAtInteriorNode) {
  std::mt19937 rng(55);
  auto m = share(build_uniform(1.0, 2));
  const DiscreteSolution u(m, TensorShape{0, 0}, oracle::random_vector(rng, 32));
  const NodalAverage avg(u);
  for (double z : {0.25, 0.5, 0.75})
    for (double mu : {0.25, 0.5, 0.75}) {
      double mean = 0.0;
      for (double dz : {-0.1, 0.1})
        for (double dm : {-0.1, 0.1}) mean += 0.25 * u.eval(m->locate(z + dz, mu + dm), z, mu).value;
      EXPECT_NEAR(avg.nodal(z, mu), mean, 1e-14);
    }
}

TEST(Averaging, HangingCornerUsesPatchWeights) {
  QuadTreeMesh mm = build_uniform(1.0, 1);
  mm.refine(std::vector<ElementId>{1});
  auto m = share(mm);
  std::mt19937 rng(56);
  const DiscreteSolution u(m, TensorShape{0, 0}, oracle::random_vector(rng, DofMap(*m, TensorShape{0, 0}).dim()));
  const NodalAverage avg(u);
  // (0.5, 0.25) lies on the left side of the coarse lower-right leaf.
  const ElementId a = m->locate(0.4, 0.2), b = m->locate(0.4, 0.3), c = m->locate(0.6, 0.25);
  const double wa = m->element(a).area(), wb = m->element(b).area(), wc = m->element(c).area();
  const double expect = (wa * u.eval(a, 0.5, 0.25).value + wb * u.eval(b, 0.5, 0.25).value +
                         wc * u.eval(c, 0.5, 0.25).value) / (wa + wb + wc);
  EXPECT_NEAR(avg.nodal(0.5, 0.25), expect, 1e-14);
}

// Globally continuous, linear in z, constant in mu: reproduced on conforming meshes.
TEST(Averaging, ContinuousFunctionReproduced) {
  auto m = share(build_uniform(2.0, 3));
  const DiscreteSolution u = project(m, TensorShape{0, 0}, [](double z, double) { return 0.3 - 1.7 * z; });
  EXPECT_LT(estimate_averaging(u).value, 1e-12);
}

TEST(Averaging, RequiresLowestOrder) {
  auto m = share(build_uniform(1.0, 1));
  EXPECT_THROW(estimate_averaging(DiscreteSolution(m, TensorShape{1, 1})), std::invalid_argument);
}

TEST(Averaging, ContributionsAddUp) {
  auto m = share(build_uniform(1.0, 3));
  const ProblemData p = make_problem(CaseTag::LineDiscontinuity);
  const SolveResult u = solve_for_estimator(EstimatorKind::Averaging, m, 0, p);
  const EstimateResult r = estimate_averaging(u.solution);
  EXPECT_NEAR(sum_squares(r.eta), r.value * r.value, 1e-12 * r.value * r.value);
  const double ratio = r.value / error_vs_exact(u.solution, p, NormKind::L2);
  EXPECT_GT(ratio, 0.3);
  EXPECT_LT(ratio, 3.0);
}

TEST(BrokenH1, ContributionsMatchNorm) {
  std::mt19937 rng(57);
  auto m = share(oracle::random_mesh(rng, 1.0, 1, 2));
  const ProblemData p = make_problem(CaseTag::Smooth);
  const DiscreteSolution v(m, TensorShape{1, 1}, oracle::random_vector(rng, DofMap(*m, TensorShape{1, 1}).dim()));
  const double n = norm(v, p.coefficients, NormKind::BrokenH1);
  const auto c = broken_h1_contributions(v);
  EXPECT_NEAR(std::accumulate(c.begin(), c.end(), 0.0), n * n, 1e-12 * n * n);
}

TEST(AdaptLoop, ThetaOneRefinesUniformly) {
  const ProblemData p = make_problem(CaseTag::PointSingularity);
  AdaptOptions o;
  o.k = 0;
  o.kind = EstimatorKind::PHier;
  o.theta = 1.0;
  o.max_steps = 3;
  const AdaptRun run = adapt_loop(p, o);
  ASSERT_EQ(run.steps.size(), 3u);
  for (int i = 0; i < 3; ++i) {
    const std::size_t n = std::size_t{16} << (2 * i);
    EXPECT_EQ(run.steps[i].N, n);
    EXPECT_EQ(run.steps[i].marked, n);
    auto m = share(build_uniform(1.0, 2 + i));
    const SolveResult u = solve_for_estimator(EstimatorKind::PHier, m, 0, p);
    EXPECT_NEAR(*run.steps[i].error_broken_h1, error_vs_exact(u.solution, p, NormKind::BrokenH1), 1e-13);
  }
}

TEST(AdaptLoop, RespectsBudgetAndReportsSteps) {
  const ProblemData p = make_problem(CaseTag::LineDiscontinuity);
  AdaptOptions o;
  o.kind = EstimatorKind::HHier;
  o.max_dofs = 600;
  std::vector<std::size_t> seen;
  const AdaptRun run = adapt_loop(p, o, [&](const AdaptStep& s, const QuadTreeMesh& m) {
    EXPECT_EQ(s.N, m.num_leaves());
    seen.push_back(s.dofs);
  });
  ASSERT_GE(run.steps.size(), 2u);
  EXPECT_EQ(seen.size(), run.steps.size());
  for (const AdaptStep& s : run.steps) {
    EXPECT_LE(s.dofs, 600u);
    EXPECT_GT(s.estimator, 0.0);
    EXPECT_TRUE(s.error_l2.has_value());
  }
  for (std::size_t i = 1; i < run.steps.size(); ++i) EXPECT_GT(run.steps[i].N, run.steps[i - 1].N);
}

TEST(AdaptLoop, ZeroDataConverges) {
  ProblemData p;
  p.source = [](double, double) { return 0.0; };
  p.boundary = [](Side, double) { return 0.0; };
  for (EstimatorKind kind : {EstimatorKind::PHier, EstimatorKind::HHier, EstimatorKind::LocalProblem,
                             EstimatorKind::Averaging}) {
    AdaptOptions o;
    o.kind = kind;
    const AdaptRun run = adapt_loop(p, o);
    EXPECT_TRUE(run.converged);
    ASSERT_EQ(run.steps.size(), 1u);
    EXPECT_FALSE(run.steps[0].error_l2.has_value());
    EXPECT_EQ(run.steps[0].marked, 0u);
  }
}

TEST(AdaptLoop, InvalidOptions) {
  const ProblemData p = make_problem(CaseTag::Smooth);
  AdaptOptions o;
  o.theta = 0.0;
  EXPECT_THROW(adapt_loop(p, o), std::invalid_argument);
  o.theta = 1.2;
  EXPECT_THROW(adapt_loop(p, o), std::invalid_argument);
  o.theta = 0.5;
  o.kind = EstimatorKind::Averaging;
  o.k = 1;
  EXPECT_THROW(adapt_loop(p, o), std::invalid_argument);
  o.kind = EstimatorKind::PHier;
  o.k = -1;
  EXPECT_THROW(adapt_loop(p, o), std::invalid_argument);
}

TEST(AdaptLoop, LogFormat) {
  EXPECT_EQ(adapt_log_header(), "step,N,dofs,error_brokenH1,error_L2,estimator,theta,kind");
  AdaptStep s;
  s.step = 2;
  s.N = 40;
  s.dofs = 80;
  s.estimator = 0.5;
  AdaptOptions o;
  o.kind = EstimatorKind::HHier;
  const std::string row = adapt_log_row(s, o);
  EXPECT_EQ(row.rfind("2,40,80,,,", 0), 0u) << row;
  EXPECT_NE(row.find(",h_hier"), std::string::npos) << row;
}

TEST(FittedSlope, UsesLastHalf) {
  std::vector<double> d, e;
  for (int i = 0; i < 10; ++i) {
    d.push_back(std::pow(2.0, i + 4));
    // Preasymptotic first half, exact power law -0.75 in the second.
    e.push_back(i < 5 ? 1.0 : 3.0 * std::pow(d.back(), -0.75));
  }
  EXPECT_NEAR(fitted_slope(d, e), -0.75, 1e-12);
}
