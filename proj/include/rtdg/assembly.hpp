#pragma once

// Interior-penalty DG discretization of the even-parity slab problem.
//
// The assembled operator realizes
//
//   b_h(u,v) = (mu^2/sigma_t d_z u, d_z v) + (sigma_t u, v) + <u, v>_Gamma
//            - sum_F int_F ({(mu/sigma_t) d_z u}[v] + lambda {(mu/sigma_t) d_z v}[u]) mu dmu
//            + sum_F alpha_F / D_F int_F [u][v] mu dmu
//
// with [v] = v_left - v_right and D_F = (1/(sigma_t1 h_1) + 1/(sigma_t2 h_2))^{-1}.
// The scattering form (sigma_s P u, v) is never part of the matrix; it is
// applied separately so that a_h = b_h - (sigma_s P ., .).

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "rtdg/basis.hpp"
#include "rtdg/mesh.hpp"
#include "rtdg/problem.hpp"
#include "rtdg/space.hpp"

namespace rtdg {

/// D_F = (1/(sigma_t|K1 h_K1) + 1/(sigma_t|K2 h_K2))^{-1}.
double face_D(const QuadTreeMesh& mesh, const Coefficients& coefficients, const VerticalFace& face);

/// The four local blocks a face contributes; rows are test functions.
struct FaceCoupling {
  VerticalFace face;
  double D = 0.0;
  Eigen::MatrixXd LL, LR, RL, RR;
};

FaceCoupling face_coupling(const QuadTreeMesh& mesh, const TensorShape& shape, const Coefficients& coefficients,
                           const VerticalFace& face, double lambda, double alpha);

/// Volume and boundary-face contributions of one leaf.
Eigen::MatrixXd element_matrix(const QuadTreeMesh& mesh, const TensorShape& shape,
                               const Coefficients& coefficients, ElementId id);

SparseMatrix assemble_operator(const QuadTreeMesh& mesh, const TensorShape& shape, const Coefficients& coefficients,
                               double lambda, double alpha);

/// (f, v) + <g, v>_Gamma; quadrature intervals are split at the data's mu-loci.
/// `points` selects the per-direction Gauss point count (0 = default).
Eigen::VectorXd assemble_rhs(const QuadTreeMesh& mesh, const TensorShape& shape, const ProblemData& problem,
                             int points = 0);

struct AssembledSystem {
  MeshPtr mesh;
  TensorShape shape;
  DofMap dofs;
  Coefficients coefficients = Coefficients::uniform(1.0, 0.0);
  SparseMatrix op;       // b_h
  Eigen::VectorXd rhs;   // (f, v) + <g, v>
  double lambda = 1.0;
  double alpha = 0.0;
  bool below_stability_bound = false;  // alpha < 1/2 + C_dt(k_z) for lambda = 1
};

/// Throws for lambda outside [-1, 1], nonpositive alpha or inadmissible coefficients.
AssembledSystem assemble(MeshPtr mesh, TensorShape shape, const ProblemData& problem, double lambda, double alpha);

/// Applies (sigma_s P u, v) for all basis functions v of the same space.
///
/// P u is constant in mu, so only the lowest mu-mode of each test function
/// receives a contribution.  The z-axis is split into the common refinement
/// of all leaf z-intervals, on which every column contribution is polynomial.
class ScatteringOperator {
public:
  ScatteringOperator(const QuadTreeMesh& mesh, const TensorShape& shape, const Coefficients& coefficients);

  Eigen::VectorXd apply(const Eigen::VectorXd& u) const;
  bool is_zero() const { return zero_; }

private:
  struct Sample {
    std::size_t offset;  // dof offset of the leaf
    double h_mu;
    double sigma_s;
    std::vector<double> phi;  // z-modes at the point
  };
  struct Point {
    double weight;
    std::vector<Sample> samples;
  };
  TensorShape shape_;
  std::size_t dim_ = 0;
  bool zero_ = true;
  std::vector<Point> points_;
};

Eigen::VectorXd apply_scattering(const DiscreteSolution& u, const Coefficients& coefficients);

/// Scattering form as a matrix, built pairwise over leaves overlapping in z.
/// Intended for small meshes and local problems.
Eigen::MatrixXd scattering_block(const QuadTreeMesh& mesh, const TensorShape& shape,
                                 const Coefficients& coefficients, std::span<const ElementId> elements);
SparseMatrix scattering_matrix(const QuadTreeMesh& mesh, const TensorShape& shape, const Coefficients& coefficients);

/// a_h(u, v) including the scattering term.
double bilinear_a(const AssembledSystem& system, const Eigen::VectorXd& u, const Eigen::VectorXd& v);

// ---------------------------------------------------------------------------
// Norms

// Energy is the element part of ||.||_Vh: flux + mass - scattering, without
// boundary and jump terms.
enum class NormKind { Vh, Star, BrokenH1, L2, L2GammaMu, Energy };

struct FieldSample {
  double value = 0.0;
  double dz = 0.0;
};

/// A broken field: restriction to a given leaf evaluated at a physical point
/// of the leaf's closure.
using BrokenField = std::function<FieldSample(const Element&, double z, double mu)>;

struct NormOptions {
  int points = 8;                 // Gauss points per direction and sub-interval
  std::vector<double> mu_breaks;  // split quadrature in mu at these loci
  int k_z = 0;                    // selects C_dt(k_z) in the star norm
};

/// Squared contributions.  Per-leaf vectors follow mesh.leaves().
struct NormParts {
  std::vector<double> l2;       // ||v||^2_K
  std::vector<double> mu_dz;    // ||mu d_z v||^2_K
  std::vector<double> flux;     // ||mu / sqrt(sigma_t) d_z v||^2_K
  std::vector<double> mass;     // ||sqrt(sigma_t) v||^2_K
  std::vector<double> scatter;  // (sigma_s P v, v)_K
  double boundary = 0.0;        // ||v||^2_{L2(Gamma;mu)}
  double jump = 0.0;            // sum_F D_F^{-1} ||[v]||^2_{L2(F;mu)}
  double average = 0.0;         // sum_F D_F / C_dt(k_z) ||{(mu/sigma_t) d_z v}||^2_{L2(F;mu)}

  double combine(NormKind kind) const;  // squared norm
};

NormParts norm_parts(const QuadTreeMesh& mesh, const Coefficients& coefficients, const BrokenField& field,
                     const NormOptions& options);

double norm(const QuadTreeMesh& mesh, const Coefficients& coefficients, const BrokenField& field, NormKind kind,
            const NormOptions& options);
double norm(const DiscreteSolution& v, const Coefficients& coefficients, NormKind kind);

BrokenField as_field(const DiscreteSolution& v);
/// u - u_h for a problem with a known exact solution.
BrokenField error_field(const DiscreteSolution& u_h, const ProblemData& problem);

double error_vs_exact(const DiscreteSolution& u_h, const ProblemData& problem, NormKind kind);

struct ErrorNorms {
  double vh = 0.0;
  double energy = 0.0;
  double l2 = 0.0;
  double broken_h1 = 0.0;
};

/// All error measures from a single quadrature pass.
ErrorNorms error_norms(const DiscreteSolution& u_h, const ProblemData& problem, bool with_vh = true);

/// Default quadrature points per direction for error measurement.
int error_quadrature_points(const TensorShape& shape);

}  // namespace rtdg
