#include "rtdg/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <stdexcept>

#include <fmt/format.h>

namespace rtdg {

QuadTreeMesh::QuadTreeMesh(double length) : length_(length) {
  if (!(length > 0.0) || !std::isfinite(length))
    throw std::invalid_argument("QuadTreeMesh: slab length must be positive and finite");
  elements_.push_back(make_element(0, 0, 0, 0));
  leaves_.push_back(0);
}

Element QuadTreeMesh::make_element(ElementId id, int level, std::int64_t iz, std::int64_t imu) const {
  Element e;
  e.id = id;
  e.level = level;
  e.iz = iz;
  e.imu = imu;
  e.z = {length_ * std::ldexp(static_cast<double>(iz), -level),
         length_ * std::ldexp(static_cast<double>(iz + 1), -level)};
  e.mu = {std::ldexp(static_cast<double>(imu), -level), std::ldexp(static_cast<double>(imu + 1), -level)};
  return e;
}

int QuadTreeMesh::max_level() const {
  int level = 0;
  for (ElementId id : leaves_) level = std::max(level, elements_[id].level);
  return level;
}

void QuadTreeMesh::refine(std::span<const ElementId> marked) {
  std::vector<ElementId> todo(marked.begin(), marked.end());
  std::sort(todo.begin(), todo.end());
  todo.erase(std::unique(todo.begin(), todo.end()), todo.end());
  for (ElementId id : todo) {
    if (!is_leaf(id)) throw std::invalid_argument(fmt::format("refine: element {} is not a leaf", id));
    if (elements_[id].level >= kMaxLevel) throw std::invalid_argument("refine: maximal level reached");
  }
  if (todo.empty()) return;

  for (ElementId id : todo) {
    const Element parent = elements_[id];
    std::array<ElementId, 4> kids{};
    for (int c = 0; c < 4; ++c) {
      const auto child_id = static_cast<ElementId>(elements_.size());
      Element child = make_element(child_id, parent.level + 1, 2 * parent.iz + (c & 1), 2 * parent.imu + (c >> 1));
      child.parent = id;
      child.region = parent.region;
      elements_.push_back(child);
      kids[c] = child_id;
    }
    elements_[id].children = kids;
  }

  leaves_.clear();
  for (const Element& e : elements_)
    if (e.is_leaf()) leaves_.push_back(e.id);
}

void QuadTreeMesh::refine_all() {
  const std::vector<ElementId> all(leaves_.begin(), leaves_.end());
  refine(all);
}

void QuadTreeMesh::assign_regions_row_major() {
  const int level = max_level();
  const std::int64_t n = std::int64_t{1} << level;
  for (ElementId id : leaves_) {
    Element& e = elements_[id];
    const int shift = level - e.level;
    e.region = static_cast<int>((e.imu << shift) * n + (e.iz << shift));
  }
}

ElementId QuadTreeMesh::locate(double z, double mu) const {
  if (!(z >= 0.0 && z <= length_ && mu >= 0.0 && mu <= 1.0))
    throw std::out_of_range(fmt::format("locate: point ({}, {}) outside the slab", z, mu));
  ElementId id = 0;
  while (!elements_[id].is_leaf()) {
    const Element& e = elements_[id];
    const double zm = 0.5 * (e.z.lo + e.z.hi);
    const double mm = 0.5 * (e.mu.lo + e.mu.hi);
    const int c = (z >= zm ? 1 : 0) + (mu >= mm ? 2 : 0);
    id = (*e.children)[c];
  }
  return id;
}

ElementId QuadTreeMesh::locate_cell(std::int64_t cz, std::int64_t cmu, int level) const {
  ElementId id = 0;
  while (!elements_[id].is_leaf()) {
    const Element& e = elements_[id];
    const int shift = level - e.level - 1;
    const int c = static_cast<int>(((cz >> shift) & 1) + 2 * ((cmu >> shift) & 1));
    id = (*e.children)[c];
  }
  return id;
}

QuadTreeMesh::FineCoords QuadTreeMesh::fine_coords(const Element& e, int level) const {
  const int shift = level - e.level;
  return {e.iz << shift, (e.iz + 1) << shift, e.imu << shift, (e.imu + 1) << shift};
}

std::vector<VerticalFace> QuadTreeMesh::interior_vertical_faces() const {
  const int level = max_level();
  const std::int64_t n = std::int64_t{1} << level;

  struct Side {
    std::vector<std::pair<FineCoords, ElementId>> left;   // elements ending at the line
    std::vector<std::pair<FineCoords, ElementId>> right;  // elements starting at the line
  };
  std::map<std::int64_t, Side> lines;
  for (ElementId id : leaves_) {
    const FineCoords c = fine_coords(elements_[id], level);
    if (c.z_hi < n) lines[c.z_hi].left.push_back({c, id});
    if (c.z_lo > 0) lines[c.z_lo].right.push_back({c, id});
  }

  std::vector<VerticalFace> faces;
  const auto by_mu = [](const auto& a, const auto& b) { return a.first.mu_lo < b.first.mu_lo; };
  for (auto& [zline, side] : lines) {
    std::sort(side.left.begin(), side.left.end(), by_mu);
    std::sort(side.right.begin(), side.right.end(), by_mu);
    std::size_t i = 0, j = 0;
    while (i < side.left.size() && j < side.right.size()) {
      const FineCoords& a = side.left[i].first;
      const FineCoords& b = side.right[j].first;
      const std::int64_t lo = std::max(a.mu_lo, b.mu_lo);
      const std::int64_t hi = std::min(a.mu_hi, b.mu_hi);
      if (hi > lo) {
        VerticalFace f;
        f.z_F = elements_[side.left[i].second].z.hi;
        f.mu = {std::ldexp(static_cast<double>(lo), -level), std::ldexp(static_cast<double>(hi), -level)};
        f.left = side.left[i].second;
        f.right = side.right[j].second;
        faces.push_back(f);
      }
      if (a.mu_hi <= b.mu_hi) ++i;
      else ++j;
    }
  }
  return faces;
}

std::vector<BoundaryFace> QuadTreeMesh::boundary_faces() const {
  const int level = max_level();
  const std::int64_t n = std::int64_t{1} << level;
  std::vector<BoundaryFace> faces;
  for (ElementId id : leaves_) {
    const Element& e = elements_[id];
    const FineCoords c = fine_coords(e, level);
    if (c.z_lo == 0) faces.push_back({Side::Left, e.mu, id});
    if (c.z_hi == n) faces.push_back({Side::Right, e.mu, id});
  }
  std::sort(faces.begin(), faces.end(), [](const BoundaryFace& a, const BoundaryFace& b) {
    if (a.side != b.side) return a.side == Side::Left;
    return a.mu.lo < b.mu.lo;
  });
  return faces;
}

std::vector<MeshVertex> QuadTreeMesh::vertices() const {
  const int level = max_level();
  const std::int64_t n = std::int64_t{1} << level;

  std::set<std::pair<std::int64_t, std::int64_t>> corners;
  for (ElementId id : leaves_) {
    const FineCoords c = fine_coords(elements_[id], level);
    corners.insert({c.z_lo, c.mu_lo});
    corners.insert({c.z_hi, c.mu_lo});
    corners.insert({c.z_lo, c.mu_hi});
    corners.insert({c.z_hi, c.mu_hi});
  }

  std::vector<MeshVertex> out;
  out.reserve(corners.size());
  for (const auto& [vz, vmu] : corners) {
    MeshVertex v;
    v.z = length_ * std::ldexp(static_cast<double>(vz), -level);
    v.mu = std::ldexp(static_cast<double>(vmu), -level);
    for (int dz = -1; dz <= 0; ++dz)
      for (int dm = -1; dm <= 0; ++dm) {
        const std::int64_t cz = vz + dz, cm = vmu + dm;
        if (cz < 0 || cz >= n || cm < 0 || cm >= n) continue;
        v.patch.push_back(locate_cell(cz, cm, level));
      }
    std::sort(v.patch.begin(), v.patch.end());
    v.patch.erase(std::unique(v.patch.begin(), v.patch.end()), v.patch.end());
    for (ElementId id : v.patch) {
      const FineCoords c = fine_coords(elements_[id], level);
      const bool corner = (vz == c.z_lo || vz == c.z_hi) && (vmu == c.mu_lo || vmu == c.mu_hi);
      if (!corner) v.regular = false;
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<RegularNode> QuadTreeMesh::regular_nodes() const {
  std::vector<RegularNode> nodes;
  for (MeshVertex& v : vertices())
    if (v.regular) nodes.push_back({v.z, v.mu, std::move(v.patch)});
  return nodes;
}

ZSegments QuadTreeMesh::z_segments() const {
  const int level = max_level();
  std::vector<std::int64_t> points;
  for (ElementId id : leaves_) {
    const FineCoords c = fine_coords(elements_[id], level);
    points.push_back(c.z_lo);
    points.push_back(c.z_hi);
  }
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());

  ZSegments seg;
  for (std::int64_t p : points) seg.breaks.push_back(length_ * std::ldexp(static_cast<double>(p), -level));
  seg.covering.resize(points.size() - 1);
  for (ElementId id : leaves_) {
    const FineCoords c = fine_coords(elements_[id], level);
    const auto first = std::lower_bound(points.begin(), points.end(), c.z_lo) - points.begin();
    const auto last = std::lower_bound(points.begin(), points.end(), c.z_hi) - points.begin();
    for (auto s = first; s < last; ++s) seg.covering[s].push_back(id);
  }
  return seg;
}

std::optional<ElementId> QuadTreeMesh::ancestor_in(const QuadTreeMesh& coarse, ElementId id) const {
  std::optional<ElementId> cur = id;
  while (cur) {
    if (coarse.is_leaf(*cur)) return cur;
    cur = elements_.at(*cur).parent;
  }
  return std::nullopt;
}

double QuadTreeMesh::leaf_area_sum() const {
  double sum = 0.0;
  for (ElementId id : leaves_) sum += elements_[id].area();
  return sum;
}

QuadTreeMesh build_uniform(double length, int levels) {
  if (levels < 0 || levels > QuadTreeMesh::kMaxLevel) throw std::invalid_argument("build_uniform: invalid level count");
  QuadTreeMesh mesh(length);
  for (int l = 0; l < levels; ++l) mesh.refine_all();
  mesh.assign_regions_row_major();
  return mesh;
}

QuadTreeMesh refine(const QuadTreeMesh& mesh, std::span<const ElementId> marked) {
  QuadTreeMesh out = mesh;
  out.refine(marked);
  return out;
}

std::pair<Rect, Rect> sub_elements(const QuadTreeMesh& mesh, const VerticalFace& face) {
  return {Rect{mesh.element(face.left).z, face.mu}, Rect{mesh.element(face.right).z, face.mu}};
}

std::vector<ElementId> dorfler_mark(std::span<const ElementId> ids, std::span<const double> eta, double theta) {
  if (ids.size() != eta.size()) throw std::invalid_argument("dorfler_mark: one indicator per leaf required");
  if (!(theta > 0.0 && theta <= 1.0)) throw std::invalid_argument("dorfler_mark: theta must lie in (0,1]");
  for (double e : eta)
    if (!(e >= 0.0) || !std::isfinite(e)) throw std::invalid_argument("dorfler_mark: indicators must be finite and nonnegative");

  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ea = eta[a] * eta[a], eb = eta[b] * eta[b];
    if (ea != eb) return ea > eb;
    return ids[a] < ids[b];
  });

  double total = 0.0;
  for (std::size_t i : order) total += eta[i] * eta[i];
  if (total == 0.0) return {};

  std::vector<ElementId> marked;
  double bulk = 0.0;
  for (std::size_t i : order) {
    marked.push_back(ids[i]);
    bulk += eta[i] * eta[i];
    if (bulk > theta * total) break;
  }
  std::sort(marked.begin(), marked.end());
  return marked;
}

void write_mesh(std::ostream& out, const QuadTreeMesh& mesh) {
  for (ElementId id : mesh.leaves()) {
    const Element& e = mesh.element(id);
    out << fmt::format("{} {} {:.17g} {:.17g} {:.17g} {:.17g} {}\n", e.id, e.level, e.z.lo, e.z.hi, e.mu.lo, e.mu.hi,
                       e.region);
  }
}

}  // namespace rtdg
