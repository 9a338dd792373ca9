#pragma once

// Broken polynomial space on a quad-tree mesh: degree-of-freedom layout and
// discrete functions expressed in the tensor Legendre basis.

#include <memory>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "rtdg/basis.hpp"
#include "rtdg/mesh.hpp"

namespace rtdg {

using MeshPtr = std::shared_ptr<const QuadTreeMesh>;
using SparseMatrix = Eigen::SparseMatrix<double>;

/// Contiguous per-leaf blocks, ordered by ascending element id.
class DofMap {
public:
  DofMap() = default;
  DofMap(const QuadTreeMesh& mesh, const TensorShape& shape);

  std::size_t dim() const { return dim_; }
  int local_dim() const { return local_dim_; }
  std::size_t offset(ElementId id) const;
  /// Position of the leaf within mesh.leaves().
  std::size_t leaf_index(ElementId id) const;
  bool contains(ElementId id) const;

private:
  std::vector<long> slot_;  // per element id: leaf index or -1
  std::size_t dim_ = 0;
  int local_dim_ = 0;
};

struct PointValue {
  double value = 0.0;
  double dz = 0.0;  // physical z-derivative
};

class DiscreteSolution {
public:
  DiscreteSolution() = default;
  DiscreteSolution(MeshPtr mesh, TensorShape shape);
  DiscreteSolution(MeshPtr mesh, TensorShape shape, Eigen::VectorXd coefficients);

  const QuadTreeMesh& mesh() const { return *mesh_; }
  const MeshPtr& mesh_ptr() const { return mesh_; }
  const TensorShape& shape() const { return shape_; }
  const DofMap& dofs() const { return dofs_; }
  const Eigen::VectorXd& coefficients() const { return coeffs_; }
  Eigen::VectorXd& coefficients() { return coeffs_; }

  /// Local coefficient block of a leaf.
  Eigen::Map<const Eigen::VectorXd> local(ElementId id) const;

  /// Evaluates the restriction to leaf `id` at a physical point (also valid on
  /// the closure of the element).
  PointValue eval(ElementId id, double z, double mu) const;

  /// Evaluates at a point of the slab.  Throws when the point lies on an
  /// interior element edge, where the restriction is ambiguous.
  PointValue eval(double z, double mu) const;

  /// Squared L2 norm; exact thanks to the orthonormal basis.
  double l2_norm_squared() const;

private:
  MeshPtr mesh_;
  TensorShape shape_;
  DofMap dofs_;
  Eigen::VectorXd coeffs_;
};

/// Interpolates (L2-projects per element) a callable onto the broken space.
template <class F>
DiscreteSolution project(MeshPtr mesh, TensorShape shape, F&& f, int points = 0);

/// 1D transfer: c_i = int_0^1 phi_i(t) phi_j(offset + width t) dt, giving the
/// child coefficients of a parent polynomial restricted to a sub-interval.
Eigen::MatrixXd transfer_matrix_1d(int degree, double offset, double width);

/// Embeds `coarse` into a mesh obtained from it by refinement (ids shared).
DiscreteSolution prolongate(const DiscreteSolution& coarse, MeshPtr fine);

/// Matrix form of prolongate (fine dofs x coarse dofs).
SparseMatrix prolongation_matrix(const QuadTreeMesh& coarse, const QuadTreeMesh& fine, const TensorShape& shape);

/// Embeds a solution into a space with higher degrees on the same mesh.
DiscreteSolution embed_degree(const DiscreteSolution& u, TensorShape target);

}  // namespace rtdg

#include "rtdg/space.ipp"
