#include "rtdg/space.hpp"

#include <stdexcept>

#include <fmt/format.h>

#include "rtdg/error.hpp"

namespace rtdg {

DofMap::DofMap(const QuadTreeMesh& mesh, const TensorShape& shape)
    : slot_(mesh.num_elements(), -1), local_dim_(shape.dim()) {
  long index = 0;
  for (ElementId id : mesh.leaves()) slot_[id] = index++;
  dim_ = static_cast<std::size_t>(index) * local_dim_;
}

bool DofMap::contains(ElementId id) const { return id < slot_.size() && slot_[id] >= 0; }

std::size_t DofMap::leaf_index(ElementId id) const {
  if (!contains(id)) throw std::out_of_range(fmt::format("DofMap: element {} is not a leaf", id));
  return static_cast<std::size_t>(slot_[id]);
}

std::size_t DofMap::offset(ElementId id) const { return leaf_index(id) * local_dim_; }

DiscreteSolution::DiscreteSolution(MeshPtr mesh, TensorShape shape)
    : mesh_(std::move(mesh)), shape_(shape), dofs_(*mesh_, shape_), coeffs_(Eigen::VectorXd::Zero(dofs_.dim())) {}

DiscreteSolution::DiscreteSolution(MeshPtr mesh, TensorShape shape, Eigen::VectorXd coefficients)
    : mesh_(std::move(mesh)), shape_(shape), dofs_(*mesh_, shape_), coeffs_(std::move(coefficients)) {
  if (static_cast<std::size_t>(coeffs_.size()) != dofs_.dim())
    throw std::invalid_argument("DiscreteSolution: coefficient vector does not match the dof map");
}

Eigen::Map<const Eigen::VectorXd> DiscreteSolution::local(ElementId id) const {
  return {coeffs_.data() + dofs_.offset(id), shape_.dim()};
}

PointValue DiscreteSolution::eval(ElementId id, double z, double mu) const {
  const Element& e = mesh_->element(id);
  const double zh = (z - e.z.lo) / e.z.length();
  const double mh = (mu - e.mu.lo) / e.mu.length();
  const int nz = shape_.z_modes(), nm = shape_.mu_modes();
  double pz[32], dpz[32], pm[32];
  LegendreBasis1D(nz - 1).eval(zh, {pz, static_cast<std::size_t>(nz)}, {dpz, static_cast<std::size_t>(nz)});
  LegendreBasis1D(nm - 1).eval(mh, {pm, static_cast<std::size_t>(nm)});
  const auto c = local(id);
  PointValue out;
  for (int a = 0; a < nz; ++a) {
    double s = 0.0;
    for (int b = 0; b < nm; ++b) s += c[shape_.index(a, b)] * pm[b];
    out.value += s * pz[a];
    out.dz += s * dpz[a];
  }
  out.dz /= e.z.length();
  return out;
}

PointValue DiscreteSolution::eval(double z, double mu) const {
  const ElementId id = mesh_->locate(z, mu);
  const Element& e = mesh_->element(id);
  const double L = mesh_->length();
  if ((z == e.z.lo && z > 0.0) || (z == e.z.hi && z < L) || (mu == e.mu.lo && mu > 0.0) || (mu == e.mu.hi && mu < 1.0))
    throw Error(fmt::format("DiscreteSolution::eval: ({}, {}) lies on an element boundary", z, mu));
  return eval(id, z, mu);
}

double DiscreteSolution::l2_norm_squared() const {
  double sum = 0.0;
  for (ElementId id : mesh_->leaves()) sum += mesh_->element(id).area() * local(id).squaredNorm();
  return sum;
}

Eigen::MatrixXd transfer_matrix_1d(int degree, double offset, double width) {
  const LegendreBasis1D basis(degree);
  const QuadratureRule& q = cached_gauss_rule(degree + 1);
  const int n = degree + 1;
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(n, n);
  std::vector<double> child(n), parent(n);
  for (std::size_t i = 0; i < q.size(); ++i) {
    basis.eval(q.points[i], child);
    basis.eval(offset + width * q.points[i], parent);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) T(r, c) += q.weights[i] * child[r] * parent[c];
  }
  return T;
}

namespace {

// Local transfer block from an ancestor element to one of its descendants.
Eigen::MatrixXd local_transfer(const Element& anc, const Element& desc, const TensorShape& shape) {
  const double oz = (desc.z.lo - anc.z.lo) / anc.z.length();
  const double wz = desc.z.length() / anc.z.length();
  const double om = (desc.mu.lo - anc.mu.lo) / anc.mu.length();
  const double wm = desc.mu.length() / anc.mu.length();
  const Eigen::MatrixXd Tz = transfer_matrix_1d(shape.z_modes() - 1, oz, wz);
  const Eigen::MatrixXd Tm = transfer_matrix_1d(shape.mu_modes() - 1, om, wm);
  const int d = shape.dim();
  Eigen::MatrixXd T(d, d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c)
      T(r, c) = Tz(shape.z_mode(r), shape.z_mode(c)) * Tm(shape.mu_mode(r), shape.mu_mode(c));
  return T;
}

}  // namespace

DiscreteSolution prolongate(const DiscreteSolution& coarse, MeshPtr fine) {
  DiscreteSolution out(fine, coarse.shape());
  const SparseMatrix P = prolongation_matrix(coarse.mesh(), *fine, coarse.shape());
  out.coefficients() = P * coarse.coefficients();
  return out;
}

SparseMatrix prolongation_matrix(const QuadTreeMesh& coarse, const QuadTreeMesh& fine, const TensorShape& shape) {
  const DofMap cd(coarse, shape), fd(fine, shape);
  const int d = shape.dim();
  std::vector<Eigen::Triplet<double>> trips;
  for (ElementId id : fine.leaves()) {
    const auto anc = fine.ancestor_in(coarse, id);
    if (!anc) throw Error("prolongation_matrix: fine mesh is not a refinement of the coarse mesh");
    const std::size_t fo = fd.offset(id), co = cd.offset(*anc);
    if (*anc == id) {
      for (int i = 0; i < d; ++i) trips.emplace_back(fo + i, co + i, 1.0);
      continue;
    }
    const Eigen::MatrixXd T = local_transfer(fine.element(*anc), fine.element(id), shape);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c)
        if (T(r, c) != 0.0) trips.emplace_back(fo + r, co + c, T(r, c));
  }
  SparseMatrix P(fd.dim(), cd.dim());
  P.setFromTriplets(trips.begin(), trips.end());
  return P;
}

DiscreteSolution embed_degree(const DiscreteSolution& u, TensorShape target) {
  const TensorShape& s = u.shape();
  if (target.k_z < s.k_z || target.k_mu < s.k_mu) throw std::invalid_argument("embed_degree: target space is smaller");
  DiscreteSolution out(u.mesh_ptr(), target);
  for (ElementId id : u.mesh().leaves()) {
    const auto src = u.local(id);
    const std::size_t off = out.dofs().offset(id);
    for (int a = 0; a < s.z_modes(); ++a)
      for (int b = 0; b < s.mu_modes(); ++b) out.coefficients()[off + target.index(a, b)] = src[s.index(a, b)];
  }
  return out;
}

}  // namespace rtdg
