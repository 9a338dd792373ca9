#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "rtdg/basis.hpp"
#include "rtdg/mesh.hpp"

namespace rtdg::detail {

/// Applies `fn(x, w)` at the points of `rule` mapped onto every piece of
/// `iv` obtained by cutting at the breaks lying strictly inside it.
template <class Fn>
void for_each_point(const Interval& iv, std::span<const double> breaks, const QuadratureRule& rule, Fn&& fn) {
  double cuts[8];
  int n = 0;
  cuts[n++] = iv.lo;
  for (double b : breaks)
    if (b > iv.lo && b < iv.hi && n < 7) cuts[n++] = b;
  cuts[n++] = iv.hi;
  std::sort(cuts, cuts + n);
  for (int s = 0; s + 1 < n; ++s) {
    const double a = cuts[s], len = cuts[s + 1] - cuts[s];
    for (std::size_t i = 0; i < rule.size(); ++i) fn(a + len * rule.points[i], len * rule.weights[i]);
  }
}

}  // namespace rtdg::detail
