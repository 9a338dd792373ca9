#pragma once

#include <utility>

namespace rtdg {

template <class F>
DiscreteSolution project(MeshPtr mesh, TensorShape shape, F&& f, int points) {
  DiscreteSolution u(mesh, shape);
  const int n = points > 0 ? points : std::max(shape.z_modes(), shape.mu_modes()) + 4;
  const QuadratureRule& q = cached_gauss_rule(n);
  const LegendreBasis1D zb(shape.z_modes() - 1), mb(shape.mu_modes() - 1);
  std::vector<double> pz(shape.z_modes()), pm(shape.mu_modes());
  for (ElementId id : mesh->leaves()) {
    const Element& e = mesh->element(id);
    const std::size_t off = u.dofs().offset(id);
    for (std::size_t i = 0; i < q.size(); ++i) {
      const double z = e.z.lo + e.z.length() * q.points[i];
      zb.eval(q.points[i], pz);
      for (std::size_t j = 0; j < q.size(); ++j) {
        const double mu = e.mu.lo + e.mu.length() * q.points[j];
        mb.eval(q.points[j], pm);
        const double w = q.weights[i] * q.weights[j] * f(z, mu);
        for (int a = 0; a < shape.z_modes(); ++a)
          for (int b = 0; b < shape.mu_modes(); ++b) u.coefficients()[off + shape.index(a, b)] += w * pz[a] * pm[b];
      }
    }
  }
  return u;
}

}  // namespace rtdg
