#include <cmath>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "oracle.hpp"
#include "rtdg/basis.hpp"
#include "rtdg/space.hpp"

using namespace rtdg;

TEST(GaussRule, MidpointForOnePoint) {
  const QuadratureRule q = gauss_rule(1);
  ASSERT_EQ(q.size(), 1u);
  EXPECT_DOUBLE_EQ(q.points[0], 0.5);
  EXPECT_DOUBLE_EQ(q.weights[0], 1.0);
}

TEST(GaussRule, ClosedFormExamples) {
  const auto integrate = [](const QuadratureRule& q, int m) {
    double s = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) s += q.weights[i] * std::pow(q.points[i], m);
    return s;
  };
  EXPECT_NEAR(integrate(gauss_rule(2), 3), 0.25, 1e-14);
  EXPECT_NEAR(integrate(gauss_rule(5), 9), 0.1, 1e-14);
}

TEST(GaussRule, MonomialExactnessAndPositivity) {
  for (int n = 1; n <= 14; ++n) {
    const QuadratureRule q = gauss_rule(n);
    EXPECT_EQ(q.exactness, 2 * n - 1);
    double wsum = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      EXPECT_GT(q.weights[i], 0.0);
      EXPECT_GT(q.points[i], 0.0);
      EXPECT_LT(q.points[i], 1.0);
      wsum += q.weights[i];
    }
    EXPECT_NEAR(wsum, 1.0, 1e-14);
    for (int m = 0; m <= 2 * n - 1; ++m) {
      double s = 0.0;
      for (std::size_t i = 0; i < q.size(); ++i) s += q.weights[i] * std::pow(q.points[i], m);
      EXPECT_NEAR(s, 1.0 / (m + 1), 1e-14) << "n=" << n << " m=" << m;
    }
  }
}

TEST(GaussRule, AgreesWithNewtonRule) {
  for (int n = 1; n <= 10; ++n) {
    const QuadratureRule q = gauss_rule(n);
    oracle::Rule r = oracle::gauss(n);
    std::vector<std::pair<double, double>> a, b;
    for (std::size_t i = 0; i < q.size(); ++i) a.emplace_back(q.points[i], q.weights[i]);
    for (std::size_t i = 0; i < r.x.size(); ++i) b.emplace_back(r.x[i], r.w[i]);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_NEAR(a[i].first, b[i].first, 1e-14);
      EXPECT_NEAR(a[i].second, b[i].second, 1e-14);
    }
  }
}

TEST(Legendre, MatchesPowerSeries) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const LegendreBasis1D basis(8);
  for (int trial = 0; trial < 50; ++trial) {
    const double t = u(rng);
    for (int n = 0; n <= 8; ++n) {
      EXPECT_NEAR(basis.value(n, t), oracle::legendre(n, t), 1e-10);
      EXPECT_NEAR(basis.derivative(n, t), oracle::legendre_d(n, t), 1e-8);
    }
  }
}

TEST(Legendre, Orthonormal) {
  const oracle::Rule q = oracle::gauss(12);
  const LegendreBasis1D basis(9);
  for (int i = 0; i <= 9; ++i)
    for (int j = 0; j <= 9; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < q.x.size(); ++p) s += q.w[p] * basis.value(i, q.x[p]) * basis.value(j, q.x[p]);
      EXPECT_NEAR(s, i == j ? 1.0 : 0.0, 1e-13);
    }
}

TEST(EvalShape, LowestOrderHasConstantAndLinear) {
  const TensorShape s{0, 0};
  EXPECT_EQ(s.dim(), 2);
  const ShapeValue c = eval_shape(s, 0, 0.3, 0.8);
  EXPECT_DOUBLE_EQ(c.value, 1.0);
  EXPECT_DOUBLE_EQ(c.dz_ref, 0.0);
  const ShapeValue l = eval_shape(s, 1, 0.3, 0.8);
  EXPECT_NEAR(l.dz_ref, 2.0 * std::sqrt(3.0), 1e-14);
  EXPECT_THROW(eval_shape(s, 2, 0.5, 0.5), std::out_of_range);
  EXPECT_THROW(eval_shape(s, -1, 0.5, 0.5), std::out_of_range);
}

TEST(EvalShape, TensorStructure) {
  const TensorShape s{2, 3};
  EXPECT_EQ(s.dim(), 16);
  for (int i = 0; i < s.dim(); ++i) {
    const ShapeValue v = eval_shape(s, i, 0.37, 0.61);
    EXPECT_NEAR(v.value, oracle::legendre(s.z_mode(i), 0.37) * oracle::legendre(s.mu_mode(i), 0.61), 1e-12);
    EXPECT_NEAR(v.dz_ref, oracle::legendre_d(s.z_mode(i), 0.37) * oracle::legendre(s.mu_mode(i), 0.61), 1e-11);
  }
}

TEST(EvalShape, ConstantHasExactCoefficients) {
  auto mesh = std::make_shared<const QuadTreeMesh>(build_uniform(1.0, 1));
  const DiscreteSolution u = project(mesh, TensorShape{2, 1}, [](double, double) { return 1.0; });
  for (ElementId id : mesh->leaves()) {
    const auto c = u.local(id);
    EXPECT_NEAR(c[0], 1.0, 1e-14);
    for (int i = 1; i < c.size(); ++i) EXPECT_NEAR(c[i], 0.0, 1e-14);
  }
}

TEST(EvalShape, ProjectionReproducesPolynomials) {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0), pt(0.0, 1.0);
  for (int kz = 0; kz <= 3; ++kz)
    for (int km = 0; km <= 3; ++km) {
      Eigen::MatrixXd c(kz + 2, km + 1);
      for (int a = 0; a <= kz + 1; ++a)
        for (int b = 0; b <= km; ++b) c(a, b) = u(rng);
      const auto poly = [&](double z, double mu) {
        double s = 0.0;
        for (int a = 0; a <= kz + 1; ++a)
          for (int b = 0; b <= km; ++b) s += c(a, b) * std::pow(z, a) * std::pow(mu, b);
        return s;
      };
      auto mesh = std::make_shared<const QuadTreeMesh>(build_uniform(1.0, 1));
      const DiscreteSolution v = project(mesh, TensorShape{kz, km}, poly);
      for (int i = 0; i < 20; ++i) {
        const double z = pt(rng), mu = pt(rng);
        EXPECT_NEAR(v.eval(z, mu).value, poly(z, mu), 1e-12);
      }
    }
}

TEST(PenaltyConstants, AnalyticValues) {
  EXPECT_EQ(compute_C_ie(0), 0.0);
  EXPECT_NEAR(compute_C_ie(1), 12.0, 1e-10);
  // phi_1' = 2 sqrt 3, phi_2' = sqrt 5 (12 t - 6): D = diag(0, 12, 60) in the orthonormal basis.
  EXPECT_NEAR(compute_C_ie(2), 60.0, 1e-9);
  EXPECT_EQ(C_dt(0), 1.0);
  EXPECT_NEAR(C_dt(1), 1.0 + 2.0 * std::sqrt(12.0), 1e-12);
  EXPECT_NEAR(penalty_alpha(0), 1.5, 1e-15);
  EXPECT_NEAR(penalty_alpha(1), 8.4282032302755, 1e-12);
  EXPECT_NEAR(penalty_alpha(1, PenaltyConvention::ReferencePm1), 1.5 + std::sqrt(12.0), 1e-12);
  EXPECT_THROW(compute_C_ie(-1), std::invalid_argument);
}

TEST(PenaltyConstants, MonotoneInDegree) {
  for (int k = 0; k < 8; ++k) {
    EXPECT_LT(compute_C_ie(k), compute_C_ie(k + 1));
    EXPECT_LT(C_dt(k), C_dt(k + 1));
  }
  const auto table = penalty_table(6);
  ASSERT_EQ(table.size(), 7u);
  for (const auto& row : table) EXPECT_NEAR(row.alpha, 0.5 + row.c_dt, 1e-14);
}

// Same eigenproblem in the monomial basis {1, t, ..., t^k}.
TEST(PenaltyConstants, IndependentOfBasis) {
  for (int k = 1; k <= 7; ++k) {
    const int n = k + 1;
    Eigen::MatrixXd M(n, n), D(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        M(i, j) = 1.0 / (i + j + 1);
        D(i, j) = (i > 0 && j > 0) ? double(i) * j / (i + j - 1) : 0.0;
      }
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(D, M);
    EXPECT_NEAR(es.eigenvalues().maxCoeff() / compute_C_ie(k), 1.0, 1e-7) << "k=" << k;
  }
}

// Rayleigh quotients of random polynomials never exceed C_ie, and the
// maximizing eigenvector attains it.  Scaled to random subintervals.
TEST(PenaltyConstants, InverseInequality) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0), pos(0.0, 1.0);
  const oracle::Rule q = oracle::gauss(12);
  for (int k = 1; k <= 5; ++k) {
    const double cie = compute_C_ie(k);
    double best = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
      const double a = pos(rng), b = a + 0.01 + pos(rng);
      std::vector<double> c(k + 1);
      for (double& x : c) x = u(rng);
      double num = 0.0, den = 0.0;
      for (std::size_t p = 0; p < q.x.size(); ++p) {
        const double z = a + (b - a) * q.x[p];
        double v = 0.0, dv = 0.0;
        for (int m = 0; m <= k; ++m) {
          v += c[m] * std::pow(z, m);
          if (m > 0) dv += c[m] * m * std::pow(z, m - 1);
        }
        num += q.w[p] * (b - a) * dv * dv;
        den += q.w[p] * (b - a) * v * v;
      }
      EXPECT_LE(std::sqrt(num), std::sqrt(cie) / (b - a) * std::sqrt(den) * (1.0 + 1e-10));
      best = std::max(best, num * (b - a) * (b - a) / den);
    }
    EXPECT_LE(best, cie * (1.0 + 1e-10));

    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(k + 1, k + 1), D = M;
    for (std::size_t p = 0; p < q.x.size(); ++p)
      for (int i = 0; i <= k; ++i)
        for (int j = 0; j <= k; ++j) {
          M(i, j) += q.w[p] * oracle::legendre(i, q.x[p]) * oracle::legendre(j, q.x[p]);
          D(i, j) += q.w[p] * oracle::legendre_d(i, q.x[p]) * oracle::legendre_d(j, q.x[p]);
        }
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(D, M);
    const Eigen::VectorXd v = es.eigenvectors().col(k);
    EXPECT_NEAR((v.dot(D * v) / v.dot(M * v)) / cie, 1.0, 1e-8);
  }
}

// int_F v^2 mu dmu <= C_dt(k)/h ||v||^2 over the strip of K adjacent to F.
TEST(PenaltyConstants, DiscreteTraceInequality) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0), pos(0.0, 1.0);
  const oracle::Rule q = oracle::gauss(10);
  for (int k = 0; k <= 4; ++k)
    for (int trial = 0; trial < 100; ++trial) {
      const double h = 0.01 + pos(rng), z0 = pos(rng);
      const double mb = 0.9 * pos(rng), mt = mb + (1.0 - mb) * (0.05 + 0.95 * pos(rng));
      Eigen::MatrixXd c(k + 1, 3);
      for (int a = 0; a <= k; ++a)
        for (int b = 0; b < 3; ++b) c(a, b) = u(rng);
      const auto v = [&](double z, double mu) {
        double s = 0.0;
        for (int a = 0; a <= k; ++a)
          for (int b = 0; b < 3; ++b) s += c(a, b) * oracle::legendre(a, (z - z0) / h) * std::pow(mu, b);
        return s;
      };
      double vol = 0.0, left = 0.0, right = 0.0;
      for (std::size_t p = 0; p < q.x.size(); ++p) {
        const double mu = mb + (mt - mb) * q.x[p], wm = q.w[p] * (mt - mb);
        left += wm * mu * v(z0, mu) * v(z0, mu);
        right += wm * mu * v(z0 + h, mu) * v(z0 + h, mu);
        for (std::size_t r = 0; r < q.x.size(); ++r) {
          const double z = z0 + h * q.x[r];
          vol += wm * q.w[r] * h * v(z, mu) * v(z, mu);
        }
      }
      const double bound = C_dt(k) / h * vol * (1.0 + 1e-10);
      EXPECT_LE(left, bound);
      EXPECT_LE(right, bound);
    }
}
