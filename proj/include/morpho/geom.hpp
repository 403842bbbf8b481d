#pragma once

// Planar geometry in projected metres: area, hull, containment, disk
// clipping and a packed bounding-box tree for buffer queries.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

namespace morpho::geom {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point p) { return {s * p.x, s * p.y}; }

inline double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }
inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Closed ring: first vertex repeated as last.
using Ring = std::vector<Point>;

struct Polygon {
  Ring exterior;
  std::vector<Ring> holes;
};

struct Polyline {
  std::vector<Point> points;
};

struct Box {
  double min_x = std::numeric_limits<double>::infinity();
  double min_y = std::numeric_limits<double>::infinity();
  double max_x = -std::numeric_limits<double>::infinity();
  double max_y = -std::numeric_limits<double>::infinity();

  bool empty() const { return min_x > max_x || min_y > max_y; }
  void expand(Point p) {
    min_x = std::min(min_x, p.x);
    min_y = std::min(min_y, p.y);
    max_x = std::max(max_x, p.x);
    max_y = std::max(max_y, p.y);
  }
  void expand(const Box& b) {
    min_x = std::min(min_x, b.min_x);
    min_y = std::min(min_y, b.min_y);
    max_x = std::max(max_x, b.max_x);
    max_y = std::max(max_y, b.max_y);
  }
  bool intersects(const Box& b) const {
    return min_x <= b.max_x && b.min_x <= max_x && min_y <= b.max_y && b.min_y <= max_y;
  }
  Point center() const { return {0.5 * (min_x + max_x), 0.5 * (min_y + max_y)}; }
  /// Squared distance from p to the box (0 inside).
  double distance2(Point p) const {
    const double dx = std::max({min_x - p.x, 0.0, p.x - max_x});
    const double dy = std::max({min_y - p.y, 0.0, p.y - max_y});
    return dx * dx + dy * dy;
  }
};

/// Removes consecutive duplicate vertices and closes the ring.
Ring normalize_ring(Ring ring);

/// Number of distinct vertices (ignores the closing repeat).
std::size_t distinct_vertex_count(std::span<const Point> ring);

/// Throws GeometryError unless every ring has >= 3 distinct finite vertices.
void validate(const Polygon& p);

Polygon normalized(Polygon p);

/// Signed shoelace area; positive for CCW rings. Ring may be open or closed.
double ring_signed_area(std::span<const Point> ring);

double polygon_area(const Polygon& p);

/// CCW closed hull with collinear vertices removed.
Polygon convex_hull(std::span<const Point> points);

/// Even-odd test; points on any ring boundary count as inside.
bool point_in_polygon(Point pt, const Polygon& p);

/// Area of p intersected with a disk approximated by the inscribed regular
/// polygon of `segments` sides.
double disk_intersection_area(const Polygon& p, Point center, double radius, int segments = 64);

/// CCW inscribed regular polygon approximating the disk (closed ring).
Ring disk_ring(Point center, double radius, int segments = 64);

/// Clips any simple ring against a convex CCW clip ring (Sutherland-Hodgman).
Ring clip_to_convex(std::span<const Point> subject, std::span<const Point> convex_ccw);

double polyline_length(const Polyline& line);

/// Length of the polyline lying inside the exact circle.
double clipped_length(const Polyline& line, Point center, double radius);

double distance_to_segment(Point p, Point a, Point b);

bool intersects_disk(const Polygon& p, Point center, double radius);
bool intersects_disk(const Polyline& line, Point center, double radius);

Box bounding_box(std::span<const Point> pts);
Box bounding_box(const Polygon& p);
Box bounding_box(const Polyline& line);

/// Sort-tile-recursive packed bounding-box tree. Build once, query many.
/// Immutable after construction and safe for concurrent queries.
template <class Geometry>
class SpatialIndex {
 public:
  explicit SpatialIndex(std::vector<Geometry> items, std::size_t fanout = 16)
      : items_(std::move(items)), fanout_(std::max<std::size_t>(fanout, 2)) {
    boxes_.reserve(items_.size());
    for (const auto& g : items_) boxes_.push_back(bounding_box(g));
    build();
  }

  std::size_t size() const { return items_.size(); }
  std::size_t fanout() const { return fanout_; }
  const std::vector<Geometry>& items() const { return items_; }
  const Geometry& operator[](std::size_t id) const { return items_[id]; }

  /// Ids (ascending) of geometries whose true geometry meets the disk.
  std::vector<std::size_t> query_disk(Point center, double radius) const {
    std::vector<std::size_t> out;
    if (levels_.empty()) return out;
    const double r2 = radius * radius;
    visit(levels_.size() - 1, 0, center, r2, [&](std::size_t id) {
      if (intersects_disk(items_[id], center, radius)) out.push_back(id);
    });
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Ids (ascending) whose bounding box meets `query`.
  std::vector<std::size_t> query_box(const Box& query) const {
    std::vector<std::size_t> out;
    if (levels_.empty()) return out;
    visit_box(levels_.size() - 1, 0, query, out);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  struct Node {
    Box box;
    std::uint32_t first = 0;  // into the level below, or into order_ for leaves
    std::uint32_t count = 0;
  };

  struct Entry {
    Box box;
    std::uint32_t ref;
  };

  // Groups entries into runs of at most fanout_ using STR tiling.
  std::vector<Node> pack(std::vector<Entry>& entries) const {
    const std::size_t n = entries.size();
    const std::size_t pages = (n + fanout_ - 1) / fanout_;
    const auto slices = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(pages))));
    const std::size_t per_slice = slices * fanout_;
    auto by_x = [](const Entry& a, const Entry& b) {
      const double ax = a.box.min_x + a.box.max_x, bx = b.box.min_x + b.box.max_x;
      return ax != bx ? ax < bx : a.ref < b.ref;
    };
    auto by_y = [](const Entry& a, const Entry& b) {
      const double ay = a.box.min_y + a.box.max_y, by = b.box.min_y + b.box.max_y;
      return ay != by ? ay < by : a.ref < b.ref;
    };
    std::sort(entries.begin(), entries.end(), by_x);
    std::vector<Node> nodes;
    for (std::size_t s = 0; s < n; s += per_slice) {
      const std::size_t e = std::min(n, s + per_slice);
      std::sort(entries.begin() + static_cast<std::ptrdiff_t>(s),
                entries.begin() + static_cast<std::ptrdiff_t>(e), by_y);
      for (std::size_t g = s; g < e; g += fanout_) {
        Node node;
        node.first = static_cast<std::uint32_t>(g);
        node.count = static_cast<std::uint32_t>(std::min(fanout_, e - g));
        for (std::size_t k = g; k < g + node.count; ++k) node.box.expand(entries[k].box);
        nodes.push_back(node);
      }
    }
    return nodes;
  }

  void build() {
    if (items_.empty()) return;
    std::vector<Entry> entries;
    entries.reserve(items_.size());
    for (std::size_t i = 0; i < items_.size(); ++i)
      entries.push_back({boxes_[i], static_cast<std::uint32_t>(i)});
    std::vector<Node> level = pack(entries);
    order_.reserve(entries.size());
    for (const auto& e : entries) order_.push_back(e.ref);
    levels_.push_back(std::move(level));

    while (levels_.back().size() > 1) {
      const auto& below = levels_.back();
      std::vector<Entry> parents;
      parents.reserve(below.size());
      for (std::size_t i = 0; i < below.size(); ++i)
        parents.push_back({below[i].box, static_cast<std::uint32_t>(i)});
      std::vector<Node> upper = pack(parents);
      // Reorder the level below so each parent's children are contiguous.
      std::vector<Node> reordered;
      reordered.reserve(below.size());
      for (const auto& e : parents) reordered.push_back(below[e.ref]);
      levels_.back() = std::move(reordered);
      levels_.push_back(std::move(upper));
    }
  }

  template <class F>
  void visit(std::size_t level, std::size_t node_index, Point c, double r2, F&& emit) const {
    const Node& node = levels_[level][node_index];
    if (node.box.distance2(c) > r2) return;
    for (std::uint32_t k = node.first; k < node.first + node.count; ++k) {
      if (level == 0) {
        const std::size_t id = order_[k];
        if (boxes_[id].distance2(c) <= r2) emit(id);
      } else {
        visit(level - 1, k, c, r2, emit);
      }
    }
  }

  void visit_box(std::size_t level, std::size_t node_index, const Box& q,
                 std::vector<std::size_t>& out) const {
    const Node& node = levels_[level][node_index];
    if (!node.box.intersects(q)) return;
    for (std::uint32_t k = node.first; k < node.first + node.count; ++k) {
      if (level == 0) {
        if (boxes_[order_[k]].intersects(q)) out.push_back(order_[k]);
      } else {
        visit_box(level - 1, k, q, out);
      }
    }
  }

  std::vector<Geometry> items_;
  std::vector<Box> boxes_;
  std::size_t fanout_;
  std::vector<std::uint32_t> order_;
  std::vector<std::vector<Node>> levels_;  // levels_[0] = leaves, back() = root
};

}  // namespace morpho::geom
