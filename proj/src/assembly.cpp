#include "rtdg/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include <fmt/format.h>

#include "quadrature_util.hpp"
#include "rtdg/error.hpp"

namespace rtdg {

namespace {

using Triplet = Eigen::Triplet<double>;

bool touches_left(const Element& e) { return e.iz == 0; }
bool touches_right(const Element& e) { return e.iz + 1 == (std::int64_t{1} << e.level); }

// Values of the 1D bases at a reference point, sized by the shape.
struct Modes {
  std::vector<double> z, dz, mu;
  explicit Modes(const TensorShape& s) : z(s.z_modes()), dz(s.z_modes()), mu(s.mu_modes()) {}
};

}  // namespace

double face_D(const QuadTreeMesh& mesh, const Coefficients& coefficients, const VerticalFace& face) {
  const Element& l = mesh.element(face.left);
  const Element& r = mesh.element(face.right);
  const double st_l = coefficients.at(l.region).sigma_t;
  const double st_r = coefficients.at(r.region).sigma_t;
  return 1.0 / (1.0 / (st_l * l.h()) + 1.0 / (st_r * r.h()));
}

Eigen::MatrixXd element_matrix(const QuadTreeMesh& mesh, const TensorShape& shape, const Coefficients& coefficients,
                               ElementId id) {
  const Element& e = mesh.element(id);
  const double hz = e.z.length(), hm = e.mu.length();
  if (!(hz > 0.0) || !(hm > 0.0)) throw Error(fmt::format("element {} is degenerate", id));
  const double st = coefficients.at(e.region).sigma_t;
  const int nz = shape.z_modes(), nm = shape.mu_modes(), d = shape.dim();

  const QuadratureRule& q = cached_gauss_rule(std::max(nz, nm) + 2);
  const LegendreBasis1D zb(nz - 1), mb(nm - 1);
  Modes m(shape);

  Eigen::MatrixXd Dz = Eigen::MatrixXd::Zero(nz, nz);
  Eigen::MatrixXd W1 = Eigen::MatrixXd::Zero(nm, nm);  // int mu psi psi, reference measure
  Eigen::MatrixXd W2 = Eigen::MatrixXd::Zero(nm, nm);  // int mu^2 psi psi
  for (std::size_t i = 0; i < q.size(); ++i) {
    zb.eval(q.points[i], m.z, m.dz);
    mb.eval(q.points[i], m.mu);
    const double mu = e.mu.lo + hm * q.points[i];
    for (int a = 0; a < nz; ++a)
      for (int c = 0; c < nz; ++c) Dz(a, c) += q.weights[i] * m.dz[a] * m.dz[c];
    for (int b = 0; b < nm; ++b)
      for (int dd = 0; dd < nm; ++dd) {
        W1(b, dd) += q.weights[i] * mu * m.mu[b] * m.mu[dd];
        W2(b, dd) += q.weights[i] * mu * mu * m.mu[b] * m.mu[dd];
      }
  }

  std::vector<double> left(nz), right(nz), scratch(nz);
  zb.eval(0.0, left, scratch);
  zb.eval(1.0, right, scratch);
  const bool on_left = touches_left(e), on_right = touches_right(e);

  Eigen::MatrixXd A(d, d);
  for (int i = 0; i < d; ++i) {
    const int a = shape.z_mode(i), b = shape.mu_mode(i);
    for (int j = 0; j < d; ++j) {
      const int c = shape.z_mode(j), dd = shape.mu_mode(j);
      double v = hm / (st * hz) * Dz(a, c) * W2(b, dd);
      if (a == c && b == dd) v += st * hz * hm;
      double trace = 0.0;
      if (on_left) trace += left[a] * left[c];
      if (on_right) trace += right[a] * right[c];
      v += trace * hm * W1(b, dd);
      A(i, j) = v;
    }
  }
  return A;
}

FaceCoupling face_coupling(const QuadTreeMesh& mesh, const TensorShape& shape, const Coefficients& coefficients,
                           const VerticalFace& face, double lambda, double alpha) {
  const Element* el[2] = {&mesh.element(face.left), &mesh.element(face.right)};
  const double zhat[2] = {1.0, 0.0};
  const double sign[2] = {1.0, -1.0};
  double st[2], h[2];
  for (int s = 0; s < 2; ++s) {
    st[s] = coefficients.at(el[s]->region).sigma_t;
    h[s] = el[s]->h();
  }
  const double D = 1.0 / (1.0 / (st[0] * h[0]) + 1.0 / (st[1] * h[1]));
  const double penalty = alpha / D;

  const int nz = shape.z_modes(), nm = shape.mu_modes(), d = shape.dim();
  const LegendreBasis1D zb(nz - 1), mb(nm - 1);
  std::vector<double> zval[2], zder[2];
  for (int s = 0; s < 2; ++s) {
    zval[s].resize(nz);
    zder[s].resize(nz);
    zb.eval(zhat[s], zval[s], zder[s]);
  }

  Eigen::MatrixXd blocks[2][2];
  for (auto& row : blocks)
    for (auto& b : row) b = Eigen::MatrixXd::Zero(d, d);

  const QuadratureRule& q = cached_gauss_rule(shape.k_mu + 3);
  std::vector<double> val[2], flux[2], pm(nm);
  for (int s = 0; s < 2; ++s) {
    val[s].resize(d);
    flux[s].resize(d);
  }
  for (std::size_t iq = 0; iq < q.size(); ++iq) {
    const double mu = face.mu.lo + face.mu.length() * q.points[iq];
    const double w = face.mu.length() * q.weights[iq] * mu;
    for (int s = 0; s < 2; ++s) {
      mb.eval((mu - el[s]->mu.lo) / el[s]->mu.length(), pm);
      for (int i = 0; i < d; ++i) {
        const int a = shape.z_mode(i), b = shape.mu_mode(i);
        val[s][i] = zval[s][a] * pm[b];
        flux[s][i] = mu / st[s] * zder[s][a] / h[s] * pm[b];
      }
    }
    for (int s = 0; s < 2; ++s)      // test side
      for (int t = 0; t < 2; ++t) {  // trial side
        Eigen::MatrixXd& B = blocks[s][t];
        for (int i = 0; i < d; ++i)
          for (int j = 0; j < d; ++j) {
            const double consistency = -0.5 * flux[t][j] * sign[s] * val[s][i];
            const double symmetry = -lambda * 0.5 * flux[s][i] * sign[t] * val[t][j];
            const double jump = penalty * sign[s] * sign[t] * val[s][i] * val[t][j];
            B(i, j) += w * (consistency + symmetry + jump);
          }
      }
  }

  FaceCoupling fc;
  fc.face = face;
  fc.D = D;
  fc.LL = std::move(blocks[0][0]);
  fc.LR = std::move(blocks[0][1]);
  fc.RL = std::move(blocks[1][0]);
  fc.RR = std::move(blocks[1][1]);
  return fc;
}

SparseMatrix assemble_operator(const QuadTreeMesh& mesh, const TensorShape& shape, const Coefficients& coefficients,
                               double lambda, double alpha) {
  const DofMap dofs(mesh, shape);
  const int d = shape.dim();
  std::vector<Triplet> trips;
  const auto faces = mesh.interior_vertical_faces();
  trips.reserve(static_cast<std::size_t>(d) * d * (mesh.num_leaves() + 4 * faces.size()));

  const auto add_block = [&](std::size_t ro, std::size_t co, const Eigen::MatrixXd& B) {
    for (int j = 0; j < d; ++j)
      for (int i = 0; i < d; ++i)
        if (B(i, j) != 0.0) trips.emplace_back(ro + i, co + j, B(i, j));
  };

  for (ElementId id : mesh.leaves()) {
    const std::size_t off = dofs.offset(id);
    add_block(off, off, element_matrix(mesh, shape, coefficients, id));
  }
  for (const VerticalFace& f : faces) {
    const FaceCoupling fc = face_coupling(mesh, shape, coefficients, f, lambda, alpha);
    const std::size_t l = dofs.offset(f.left), r = dofs.offset(f.right);
    add_block(l, l, fc.LL);
    add_block(l, r, fc.LR);
    add_block(r, l, fc.RL);
    add_block(r, r, fc.RR);
  }

  SparseMatrix A(dofs.dim(), dofs.dim());
  A.setFromTriplets(trips.begin(), trips.end());
  A.makeCompressed();
  return A;
}

Eigen::VectorXd assemble_rhs(const QuadTreeMesh& mesh, const TensorShape& shape, const ProblemData& problem,
                             int points) {
  const DofMap dofs(mesh, shape);
  Eigen::VectorXd F = Eigen::VectorXd::Zero(dofs.dim());
  const int nz = shape.z_modes(), nm = shape.mu_modes();
  const int n = points > 0 ? points : std::max(nz, nm) + 4;
  const QuadratureRule& q = cached_gauss_rule(n);
  const LegendreBasis1D zb(nz - 1), mb(nm - 1);
  Modes m(shape);
  const std::span<const double> breaks = problem.mu_breaks;

  // Cells closer to a singular point than their own size are split, 40 levels deep.
  const auto& sing = problem.singular_points;
  const QuadratureRule& qs = sing.empty() ? q : cached_gauss_rule(std::max(n, 12));
  const auto near = [&](const Interval& a, const Interval& b) {
    const double size = std::max(a.length(), b.length());
    for (const auto& [zs, ms] : sing) {
      const double dz = std::max({a.lo - zs, zs - a.hi, 0.0}), dm = std::max({b.lo - ms, ms - b.hi, 0.0});
      if (std::hypot(dz, dm) < size) return true;
    }
    return false;
  };
  std::vector<std::pair<Interval, Interval>> cells;
  const std::function<void(Interval, Interval, int)> grade = [&](Interval a, Interval b, int depth) {
    if (depth == 0 || !near(a, b)) {
      cells.emplace_back(a, b);
      return;
    }
    const double zm = 0.5 * (a.lo + a.hi), mm = 0.5 * (b.lo + b.hi);
    for (const Interval& za : {Interval{a.lo, zm}, Interval{zm, a.hi}})
      for (const Interval& mb_ : {Interval{b.lo, mm}, Interval{mm, b.hi}}) grade(za, mb_, depth - 1);
  };

  if (problem.source) {
    for (ElementId id : mesh.leaves()) {
      const Element& e = mesh.element(id);
      const std::size_t off = dofs.offset(id);
      cells.clear();
      grade(e.z, e.mu, sing.empty() ? 0 : 40);
      for (const auto& [cz, cm] : cells)
        detail::for_each_point(cz, {}, qs, [&](double z, double wz) {
          zb.eval((z - e.z.lo) / e.z.length(), m.z);
          detail::for_each_point(cm, breaks, qs, [&](double mu, double wm) {
            mb.eval((mu - e.mu.lo) / e.mu.length(), m.mu);
            const double fw = wz * wm * problem.source(z, mu);
            for (int a = 0; a < nz; ++a)
              for (int b = 0; b < nm; ++b) F[off + shape.index(a, b)] += fw * m.z[a] * m.mu[b];
          });
        });
    }
  }

  if (problem.boundary) {
    std::vector<double> scratch(nz);
    for (const BoundaryFace& bf : mesh.boundary_faces()) {
      const Element& e = mesh.element(bf.element);
      const std::size_t off = dofs.offset(bf.element);
      const double zf = bf.side == Side::Left ? e.z.lo : e.z.hi;
      zb.eval(bf.side == Side::Left ? 0.0 : 1.0, m.z, scratch);
      std::vector<Interval> pieces{bf.mu};
      for (int depth = sing.empty() ? 0 : 40; depth > 0; --depth) {
        std::vector<Interval> next;
        for (const Interval& iv : pieces) {
          if (near(Interval{zf, zf}, iv)) {
            const double mm = 0.5 * (iv.lo + iv.hi);
            next.push_back({iv.lo, mm});
            next.push_back({mm, iv.hi});
          } else {
            next.push_back(iv);
          }
        }
        pieces.swap(next);
      }
      for (const Interval& iv : pieces)
        detail::for_each_point(iv, breaks, qs, [&](double mu, double wm) {
          mb.eval((mu - e.mu.lo) / e.mu.length(), m.mu);
          const double gw = wm * mu * problem.boundary(bf.side, mu);
          for (int a = 0; a < nz; ++a)
            for (int b = 0; b < nm; ++b) F[off + shape.index(a, b)] += gw * m.z[a] * m.mu[b];
        });
    }
  }
  return F;
}

AssembledSystem assemble(MeshPtr mesh, TensorShape shape, const ProblemData& problem, double lambda, double alpha) {
  if (!(lambda >= -1.0 && lambda <= 1.0)) throw std::invalid_argument("assemble: lambda must lie in [-1, 1]");
  if (!(alpha > 0.0)) throw std::invalid_argument("assemble: penalty parameter must be positive");
  if (shape.k_z < 0 || shape.k_mu < 0) throw std::invalid_argument("assemble: negative degree");
  if (mesh->length() != problem.length) throw std::invalid_argument("assemble: mesh and problem slab lengths differ");
  AssembledSystem sys;
  sys.mesh = mesh;
  sys.shape = shape;
  sys.dofs = DofMap(*mesh, shape);
  sys.coefficients = problem.coefficients;
  sys.lambda = lambda;
  sys.alpha = alpha;
  sys.below_stability_bound = lambda == 1.0 && alpha < penalty_alpha(shape.k_z) * (1.0 - 1e-14);
  sys.op = assemble_operator(*mesh, shape, problem.coefficients, lambda, alpha);
  sys.rhs = assemble_rhs(*mesh, shape, problem);
  return sys;
}

// ---------------------------------------------------------------------------
// Scattering

ScatteringOperator::ScatteringOperator(const QuadTreeMesh& mesh, const TensorShape& shape,
                                       const Coefficients& coefficients)
    : shape_(shape), dim_(DofMap(mesh, shape).dim()) {
  const DofMap dofs(mesh, shape);
  for (ElementId id : mesh.leaves())
    if (coefficients.at(mesh.element(id).region).sigma_s != 0.0) zero_ = false;
  if (zero_) return;

  const ZSegments seg = mesh.z_segments();
  const int nz = shape.z_modes();
  const QuadratureRule& q = cached_gauss_rule(nz);
  const LegendreBasis1D zb(nz - 1);
  for (std::size_t s = 0; s + 1 < seg.breaks.size(); ++s) {
    const double a = seg.breaks[s], len = seg.breaks[s + 1] - a;
    for (std::size_t i = 0; i < q.size(); ++i) {
      Point p;
      p.weight = len * q.weights[i];
      const double z = a + len * q.points[i];
      for (ElementId id : seg.covering[s]) {
        const Element& e = mesh.element(id);
        Sample smp;
        smp.offset = dofs.offset(id);
        smp.h_mu = e.mu.length();
        smp.sigma_s = coefficients.at(e.region).sigma_s;
        smp.phi.resize(nz);
        zb.eval((z - e.z.lo) / e.z.length(), smp.phi);
        p.samples.push_back(std::move(smp));
      }
      points_.push_back(std::move(p));
    }
  }
}

Eigen::VectorXd ScatteringOperator::apply(const Eigen::VectorXd& u) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(dim_);
  if (zero_) return out;
  const int nz = shape_.z_modes();
  for (const Point& p : points_) {
    double U = 0.0;
    for (const Sample& s : p.samples) {
      double v = 0.0;
      for (int a = 0; a < nz; ++a) v += u[s.offset + shape_.index(a, 0)] * s.phi[a];
      U += s.h_mu * v;
    }
    for (const Sample& s : p.samples) {
      const double c = p.weight * s.sigma_s * s.h_mu * U;
      for (int a = 0; a < nz; ++a) out[s.offset + shape_.index(a, 0)] += c * s.phi[a];
    }
  }
  return out;
}

Eigen::VectorXd apply_scattering(const DiscreteSolution& u, const Coefficients& coefficients) {
  return ScatteringOperator(u.mesh(), u.shape(), coefficients).apply(u.coefficients());
}

Eigen::MatrixXd scattering_block(const QuadTreeMesh& mesh, const TensorShape& shape,
                                 const Coefficients& coefficients, std::span<const ElementId> elements) {
  const int nz = shape.z_modes(), d = shape.dim();
  const std::size_t n = elements.size();
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n * d, n * d);
  const QuadratureRule& q = cached_gauss_rule(nz);
  const LegendreBasis1D zb(nz - 1);
  std::vector<double> pi(nz), pj(nz);
  for (std::size_t I = 0; I < n; ++I) {
    const Element& ei = mesh.element(elements[I]);
    const double ss = coefficients.at(ei.region).sigma_s;
    if (ss == 0.0) continue;
    for (std::size_t J = 0; J < n; ++J) {
      const Element& ej = mesh.element(elements[J]);
      const double lo = std::max(ei.z.lo, ej.z.lo), hi = std::min(ei.z.hi, ej.z.hi);
      if (!(hi > lo)) continue;
      const double scale = ss * ei.mu.length() * ej.mu.length();
      for (std::size_t iq = 0; iq < q.size(); ++iq) {
        const double z = lo + (hi - lo) * q.points[iq];
        const double w = (hi - lo) * q.weights[iq] * scale;
        zb.eval((z - ei.z.lo) / ei.z.length(), pi);
        zb.eval((z - ej.z.lo) / ej.z.length(), pj);
        for (int a = 0; a < nz; ++a)
          for (int c = 0; c < nz; ++c) S(I * d + shape.index(a, 0), J * d + shape.index(c, 0)) += w * pi[a] * pj[c];
      }
    }
  }
  return S;
}

SparseMatrix scattering_matrix(const QuadTreeMesh& mesh, const TensorShape& shape, const Coefficients& coefficients) {
  const std::vector<ElementId> leaves(mesh.leaves().begin(), mesh.leaves().end());
  const Eigen::MatrixXd S = scattering_block(mesh, shape, coefficients, leaves);
  return S.sparseView();
}

double bilinear_a(const AssembledSystem& system, const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  const ScatteringOperator S(*system.mesh, system.shape, system.coefficients);
  return v.dot(system.op * u) - v.dot(S.apply(u));
}

// ---------------------------------------------------------------------------
// Norms

double NormParts::combine(NormKind kind) const {
  double s = 0.0;
  switch (kind) {
    case NormKind::L2:
      for (double x : l2) s += x;
      return s;
    case NormKind::BrokenH1:
      for (std::size_t i = 0; i < l2.size(); ++i) s += l2[i] + mu_dz[i];
      return s;
    case NormKind::L2GammaMu: return boundary;
    case NormKind::Energy:
      for (std::size_t i = 0; i < l2.size(); ++i) s += flux[i] + mass[i] - scatter[i];
      return s;
    case NormKind::Vh:
    case NormKind::Star:
      for (std::size_t i = 0; i < l2.size(); ++i) s += flux[i] + mass[i] - scatter[i];
      s += boundary + jump;
      if (kind == NormKind::Star) s += average;
      return s;
  }
  return s;
}

NormParts norm_parts(const QuadTreeMesh& mesh, const Coefficients& coefficients, const BrokenField& field,
                     const NormOptions& options) {
  const std::size_t n = mesh.num_leaves();
  NormParts p;
  p.l2.assign(n, 0.0);
  p.mu_dz.assign(n, 0.0);
  p.flux.assign(n, 0.0);
  p.mass.assign(n, 0.0);
  p.scatter.assign(n, 0.0);
  const QuadratureRule& q = cached_gauss_rule(options.points);
  const std::span<const double> breaks = options.mu_breaks;

  std::vector<long> leaf_index(mesh.num_elements(), -1);
  for (std::size_t i = 0; i < n; ++i) leaf_index[mesh.leaves()[i]] = static_cast<long>(i);

  for (std::size_t li = 0; li < n; ++li) {
    const Element& e = mesh.element(mesh.leaves()[li]);
    const double st = coefficients.at(e.region).sigma_t;
    detail::for_each_point(e.z, {}, q, [&](double z, double wz) {
      detail::for_each_point(e.mu, breaks, q, [&](double mu, double wm) {
        const FieldSample f = field(e, z, mu);
        const double w = wz * wm;
        p.l2[li] += w * f.value * f.value;
        p.mu_dz[li] += w * mu * mu * f.dz * f.dz;
        p.flux[li] += w * mu * mu / st * f.dz * f.dz;
        p.mass[li] += w * st * f.value * f.value;
      });
    });
  }

  for (const BoundaryFace& bf : mesh.boundary_faces()) {
    const Element& e = mesh.element(bf.element);
    const double z = bf.side == Side::Left ? e.z.lo : e.z.hi;
    detail::for_each_point(bf.mu, breaks, q, [&](double mu, double wm) {
      const double v = field(e, z, mu).value;
      p.boundary += wm * mu * v * v;
    });
  }

  const double cdt = C_dt(options.k_z);
  for (const VerticalFace& f : mesh.interior_vertical_faces()) {
    const Element& l = mesh.element(f.left);
    const Element& r = mesh.element(f.right);
    const double stl = coefficients.at(l.region).sigma_t, str = coefficients.at(r.region).sigma_t;
    const double D = face_D(mesh, coefficients, f);
    double jump = 0.0, avg = 0.0;
    detail::for_each_point(f.mu, breaks, q, [&](double mu, double wm) {
      const FieldSample a = field(l, f.z_F, mu), b = field(r, f.z_F, mu);
      const double jv = a.value - b.value;
      const double fl = 0.5 * (mu / stl * a.dz + mu / str * b.dz);
      jump += wm * mu * jv * jv;
      avg += wm * mu * fl * fl;
    });
    p.jump += jump / D;
    p.average += D / cdt * avg;
  }

  bool scattering = false;
  for (ElementId id : mesh.leaves())
    if (coefficients.at(mesh.element(id).region).sigma_s != 0.0) scattering = true;
  if (scattering) {
    const ZSegments seg = mesh.z_segments();
    std::vector<double> mu_int;
    for (std::size_t s = 0; s + 1 < seg.breaks.size(); ++s) {
      const Interval iv{seg.breaks[s], seg.breaks[s + 1]};
      const auto& cover = seg.covering[s];
      mu_int.resize(cover.size());
      detail::for_each_point(iv, {}, q, [&](double z, double wz) {
        double P = 0.0;
        for (std::size_t c = 0; c < cover.size(); ++c) {
          const Element& e = mesh.element(cover[c]);
          double I = 0.0;
          detail::for_each_point(e.mu, breaks, q, [&](double mu, double wm) { I += wm * field(e, z, mu).value; });
          mu_int[c] = I;
          P += I;
        }
        for (std::size_t c = 0; c < cover.size(); ++c) {
          const Element& e = mesh.element(cover[c]);
          p.scatter[leaf_index[cover[c]]] += wz * coefficients.at(e.region).sigma_s * P * mu_int[c];
        }
      });
    }
  }
  return p;
}

double norm(const QuadTreeMesh& mesh, const Coefficients& coefficients, const BrokenField& field, NormKind kind,
            const NormOptions& options) {
  return std::sqrt(std::max(0.0, norm_parts(mesh, coefficients, field, options).combine(kind)));
}

BrokenField as_field(const DiscreteSolution& v) {
  return [&v](const Element& e, double z, double mu) {
    const PointValue pv = v.eval(e.id, z, mu);
    return FieldSample{pv.value, pv.dz};
  };
}

BrokenField error_field(const DiscreteSolution& u_h, const ProblemData& problem) {
  if (!problem.has_exact() || !problem.exact_dz) throw Error("error_field: problem has no exact solution");
  return [&u_h, &problem](const Element& e, double z, double mu) {
    const PointValue pv = u_h.eval(e.id, z, mu);
    return FieldSample{problem.exact(z, mu) - pv.value, problem.exact_dz(z, mu) - pv.dz};
  };
}

double norm(const DiscreteSolution& v, const Coefficients& coefficients, NormKind kind) {
  NormOptions opt;
  opt.points = std::max(v.shape().z_modes(), v.shape().mu_modes()) + 2;
  opt.k_z = v.shape().k_z;
  return norm(v.mesh(), coefficients, as_field(v), kind, opt);
}

int error_quadrature_points(const TensorShape& shape) { return std::max(shape.z_modes(), shape.mu_modes()) + 4; }

double error_vs_exact(const DiscreteSolution& u_h, const ProblemData& problem, NormKind kind) {
  NormOptions opt;
  opt.points = error_quadrature_points(u_h.shape());
  opt.mu_breaks = problem.mu_breaks;
  opt.k_z = u_h.shape().k_z;
  return norm(u_h.mesh(), problem.coefficients, error_field(u_h, problem), kind, opt);
}

ErrorNorms error_norms(const DiscreteSolution& u_h, const ProblemData& problem, bool with_vh) {
  NormOptions opt;
  opt.points = error_quadrature_points(u_h.shape());
  opt.mu_breaks = problem.mu_breaks;
  opt.k_z = u_h.shape().k_z;
  ErrorNorms out;
  if (with_vh) {
    const NormParts p = norm_parts(u_h.mesh(), problem.coefficients, error_field(u_h, problem), opt);
    out.vh = std::sqrt(std::max(0.0, p.combine(NormKind::Vh)));
    out.energy = std::sqrt(std::max(0.0, p.combine(NormKind::Energy)));
    out.l2 = std::sqrt(p.combine(NormKind::L2));
    out.broken_h1 = std::sqrt(p.combine(NormKind::BrokenH1));
    return out;
  }
  // Element terms only.
  const QuadratureRule& q = cached_gauss_rule(opt.points);
  const BrokenField field = error_field(u_h, problem);
  double l2 = 0.0, h1 = 0.0;
  for (ElementId id : u_h.mesh().leaves()) {
    const Element& e = u_h.mesh().element(id);
    detail::for_each_point(e.z, {}, q, [&](double z, double wz) {
      detail::for_each_point(e.mu, opt.mu_breaks, q, [&](double mu, double wm) {
        const FieldSample f = field(e, z, mu);
        l2 += wz * wm * f.value * f.value;
        h1 += wz * wm * mu * mu * f.dz * f.dz;
      });
    });
  }
  out.l2 = std::sqrt(l2);
  out.broken_h1 = std::sqrt(l2 + h1);
  return out;
}

}  // namespace rtdg
