#pragma once

// Quad-tree partitions of the phase-space slab (0,L) x (0,1).
//
// Elements live on a dyadic lattice: an element of level l with integer
// coordinates (iz, imu) covers [iz, iz+1] * L / 2^l in z and
// [imu, imu+1] / 2^l in mu.  All adjacency queries work on these integer
// coordinates, so hanging nodes of any level jump are handled exactly.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace rtdg {

using ElementId = std::uint32_t;

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double length() const { return hi - lo; }
  bool contains(double x) const { return lo <= x && x <= hi; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

struct Rect {
  Interval z;
  Interval mu;

  double area() const { return z.length() * mu.length(); }
  friend bool operator==(const Rect&, const Rect&) = default;
};

struct Element {
  ElementId id = 0;
  int level = 0;
  std::int64_t iz = 0;
  std::int64_t imu = 0;
  Interval z;
  Interval mu;
  std::optional<ElementId> parent;
  // Children ordered (z-lo, mu-lo), (z-hi, mu-lo), (z-lo, mu-hi), (z-hi, mu-hi).
  std::optional<std::array<ElementId, 4>> children;
  int region = 0;

  bool is_leaf() const { return !children.has_value(); }
  double h() const { return z.length(); }
  double area() const { return z.length() * mu.length(); }
  Rect rect() const { return {z, mu}; }
};

/// Interior interface {z_F} x mu between `left` (z.hi == z_F) and `right` (z.lo == z_F).
struct VerticalFace {
  double z_F = 0.0;
  Interval mu;
  ElementId left = 0;
  ElementId right = 0;
};

enum class Side { Left, Right };  // z = 0 and z = L

struct BoundaryFace {
  Side side = Side::Left;
  Interval mu;
  ElementId element = 0;
};

struct RegularNode {
  double z = 0.0;
  double mu = 0.0;
  std::vector<ElementId> patch;  // leaves having the node as a corner, ascending id
};

/// Any corner of a leaf, regular or hanging.  `patch` holds every leaf whose
/// closure contains the point.
struct MeshVertex {
  double z = 0.0;
  double mu = 0.0;
  std::vector<ElementId> patch;
  bool regular = true;
};

/// Partition of the z-axis into the common refinement of all leaf z-intervals.
struct ZSegments {
  std::vector<double> breaks;                   // size = segments + 1
  std::vector<std::vector<ElementId>> covering;  // leaves whose z-interval contains the segment
};

class QuadTreeMesh {
public:
  static constexpr int kMaxLevel = 30;

  /// Single-element mesh covering the whole slab; region 0.
  explicit QuadTreeMesh(double length);

  double length() const { return length_; }
  const Element& element(ElementId id) const { return elements_.at(id); }
  std::size_t num_elements() const { return elements_.size(); }
  std::span<const ElementId> leaves() const { return leaves_; }
  std::size_t num_leaves() const { return leaves_.size(); }
  bool is_leaf(ElementId id) const { return id < elements_.size() && elements_[id].is_leaf(); }
  int max_level() const;

  /// Replaces each marked leaf by its four children.  Throws if an id is not a leaf.
  void refine(std::span<const ElementId> marked);
  void refine_all();

  /// Assigns region ids to current leaves in row-major order (mu-major rows).
  void assign_regions_row_major();

  /// Leaf containing (z, mu); points on interfaces resolve to the upper/right leaf.
  ElementId locate(double z, double mu) const;

  std::vector<VerticalFace> interior_vertical_faces() const;
  std::vector<BoundaryFace> boundary_faces() const;
  std::vector<MeshVertex> vertices() const;
  std::vector<RegularNode> regular_nodes() const;
  ZSegments z_segments() const;

  /// Nearest ancestor (or the element itself) that is a leaf of `coarse`.
  std::optional<ElementId> ancestor_in(const QuadTreeMesh& coarse, ElementId id) const;

  double leaf_area_sum() const;

private:
  struct FineCoords {
    std::int64_t z_lo, z_hi, mu_lo, mu_hi;
  };
  FineCoords fine_coords(const Element& e, int level) const;
  ElementId locate_cell(std::int64_t cz, std::int64_t cmu, int level) const;
  Element make_element(ElementId id, int level, std::int64_t iz, std::int64_t imu) const;

  double length_;
  std::vector<Element> elements_;
  std::vector<ElementId> leaves_;  // ascending
};

/// Uniform 2^levels x 2^levels mesh; regions are the cells of this grid.
QuadTreeMesh build_uniform(double length, int levels);

/// Copy of `mesh` with the marked leaves refined.
QuadTreeMesh refine(const QuadTreeMesh& mesh, std::span<const ElementId> marked);

/// Portions of the two neighbors adjacent to the face, restricted to its mu-range.
std::pair<Rect, Rect> sub_elements(const QuadTreeMesh& mesh, const VerticalFace& face);

/// Smallest set with sum of eta^2 strictly above theta * total, ties by ascending id.
/// Returns every id when no proper subset (or the full set) satisfies the strict
/// inequality, and nothing when all eta vanish.
std::vector<ElementId> dorfler_mark(std::span<const ElementId> ids, std::span<const double> eta,
                                    double theta);

/// Plain-text dump: `id level z_lo z_hi mu_lo mu_hi region` per leaf, sorted by id.
void write_mesh(std::ostream& out, const QuadTreeMesh& mesh);

}  // namespace rtdg
