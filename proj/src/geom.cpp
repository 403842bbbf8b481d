#include "morpho/geom.hpp"

#include <numbers>
#include <string>

#include "morpho/error.hpp"

namespace morpho::geom {

namespace {

bool finite(Point p) { return std::isfinite(p.x) && std::isfinite(p.y); }

bool on_segment(Point p, Point a, Point b) {
  const Point ab = b - a;
  const double len = std::hypot(ab.x, ab.y);
  if (len == 0.0) return p == a;
  if (std::abs(cross(ab, p - a)) > 1e-9 * len) return false;
  const double t = dot(p - a, ab);
  return t >= -1e-9 * len && t <= len * len + 1e-9 * len;
}

bool on_ring_boundary(Point p, std::span<const Point> ring) {
  for (std::size_t i = 0; i + 1 < ring.size(); ++i)
    if (on_segment(p, ring[i], ring[i + 1])) return true;
  return false;
}

// Crossing parity of a rightward ray from p.
bool ray_parity(Point p, std::span<const Point> ring) {
  bool inside = false;
  for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
    const Point a = ring[i], b = ring[i + 1];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x) inside = !inside;
    }
  }
  return inside;
}

double ring_area_abs(std::span<const Point> ring) { return std::abs(ring_signed_area(ring)); }

}  // namespace

Ring normalize_ring(Ring ring) {
  Ring out;
  out.reserve(ring.size() + 1);
  for (const Point& p : ring)
    if (out.empty() || !(out.back() == p)) out.push_back(p);
  while (out.size() > 1 && out.front() == out.back()) out.pop_back();
  if (!out.empty()) out.push_back(out.front());
  return out;
}

std::size_t distinct_vertex_count(std::span<const Point> ring) {
  std::vector<Point> pts(ring.begin(), ring.end());
  std::sort(pts.begin(), pts.end(), [](Point a, Point b) { return a.x != b.x ? a.x < b.x : a.y < b.y; });
  return static_cast<std::size_t>(std::unique(pts.begin(), pts.end()) - pts.begin());
}

void validate(const Polygon& p) {
  auto check = [](std::span<const Point> ring, const char* what) {
    for (const Point& v : ring)
      if (!finite(v)) throw GeometryError(std::string(what) + " ring has a non-finite vertex");
    if (distinct_vertex_count(ring) < 3)
      throw GeometryError(std::string(what) + " ring has fewer than 3 distinct vertices");
  };
  check(p.exterior, "exterior");
  for (const auto& h : p.holes) check(h, "hole");
}

Polygon normalized(Polygon p) {
  p.exterior = normalize_ring(std::move(p.exterior));
  for (auto& h : p.holes) h = normalize_ring(std::move(h));
  return p;
}

double ring_signed_area(std::span<const Point> ring) {
  const std::size_t n = ring.size();
  if (n < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point a = ring[i], b = ring[(i + 1) % n];
    twice += a.x * b.y - b.x * a.y;
  }
  return 0.5 * twice;
}

double polygon_area(const Polygon& p) {
  validate(p);
  double area = ring_area_abs(p.exterior);
  for (const auto& h : p.holes) area -= ring_area_abs(h);
  return std::max(area, 0.0);
}

Polygon convex_hull(std::span<const Point> points) {
  std::vector<Point> pts(points.begin(), points.end());
  for (const Point& v : pts)
    if (!finite(v)) throw GeometryError("convex_hull: non-finite input point");
  std::sort(pts.begin(), pts.end(), [](Point a, Point b) { return a.x != b.x ? a.x < b.x : a.y < b.y; });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) throw GeometryError("convex_hull: fewer than 3 distinct points");

  // Andrew's monotone chain; strict turns drop collinear vertices.
  std::vector<Point> hull(2 * pts.size());
  std::size_t k = 0;
  for (const Point& p : pts) {
    while (k >= 2 && cross(hull[k - 1] - hull[k - 2], p - hull[k - 2]) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    const Point p = pts[i];
    while (k >= lower && cross(hull[k - 1] - hull[k - 2], p - hull[k - 2]) <= 0.0) --k;
    hull[k++] = p;
  }
  hull.resize(k);  // closed: last == first
  if (hull.size() < 4) throw GeometryError("convex_hull: input points are collinear");
  return Polygon{std::move(hull), {}};
}

bool point_in_polygon(Point pt, const Polygon& p) {
  if (on_ring_boundary(pt, p.exterior)) return true;
  for (const auto& h : p.holes)
    if (on_ring_boundary(pt, h)) return true;
  bool inside = ray_parity(pt, p.exterior);
  for (const auto& h : p.holes)
    if (ray_parity(pt, h)) inside = !inside;
  return inside;
}

Ring disk_ring(Point center, double radius, int segments) {
  Ring ring;
  ring.reserve(static_cast<std::size_t>(segments) + 1);
  for (int i = 0; i < segments; ++i) {
    const double a = 2.0 * std::numbers::pi * i / segments;
    ring.push_back({center.x + radius * std::cos(a), center.y + radius * std::sin(a)});
  }
  ring.push_back(ring.front());
  return ring;
}

Ring clip_to_convex(std::span<const Point> subject, std::span<const Point> convex_ccw) {
  // Work on open rings internally.
  std::vector<Point> output(subject.begin(), subject.end());
  if (output.size() > 1 && output.front() == output.back()) output.pop_back();
  std::size_t clip_n = convex_ccw.size();
  if (clip_n > 1 && convex_ccw.front() == convex_ccw.back()) --clip_n;

  std::vector<Point> input;
  for (std::size_t e = 0; e < clip_n && !output.empty(); ++e) {
    const Point a = convex_ccw[e], b = convex_ccw[(e + 1) % clip_n];
    const Point edge = b - a;
    auto side = [&](Point p) { return cross(edge, p - a); };  // >= 0 inside
    input.swap(output);
    output.clear();
    for (std::size_t i = 0; i < input.size(); ++i) {
      const Point cur = input[i];
      const Point prev = input[(i + input.size() - 1) % input.size()];
      const double sc = side(cur), sp = side(prev);
      if (sc >= 0.0) {
        if (sp < 0.0) output.push_back(prev + (sp / (sp - sc)) * (cur - prev));
        output.push_back(cur);
      } else if (sp >= 0.0) {
        output.push_back(prev + (sp / (sp - sc)) * (cur - prev));
      }
    }
  }
  if (!output.empty()) output.push_back(output.front());
  return output;
}

double disk_intersection_area(const Polygon& p, Point center, double radius, int segments) {
  if (!(radius > 0.0)) throw GeometryError("disk_intersection_area: radius must be positive");
  const Ring disk = disk_ring(center, radius, segments);
  double area = ring_area_abs(clip_to_convex(p.exterior, disk));
  for (const auto& h : p.holes) area -= ring_area_abs(clip_to_convex(h, disk));
  return std::max(area, 0.0);
}

double polyline_length(const Polyline& line) {
  double len = 0.0;
  for (std::size_t i = 0; i + 1 < line.points.size(); ++i)
    len += distance(line.points[i], line.points[i + 1]);
  return len;
}

double clipped_length(const Polyline& line, Point center, double radius) {
  double len = 0.0;
  for (std::size_t i = 0; i + 1 < line.points.size(); ++i) {
    const Point a = line.points[i] - center;
    const Point d = line.points[i + 1] - line.points[i];
    const double qa = dot(d, d);
    if (qa == 0.0) continue;
    // |a + t d|^2 = r^2
    const double qb = 2.0 * dot(a, d);
    const double qc = dot(a, a) - radius * radius;
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc <= 0.0) continue;
    const double sq = std::sqrt(disc);
    const double t0 = std::max(0.0, (-qb - sq) / (2.0 * qa));
    const double t1 = std::min(1.0, (-qb + sq) / (2.0 * qa));
    if (t1 > t0) len += (t1 - t0) * std::sqrt(qa);
  }
  return len;
}

double distance_to_segment(Point p, Point a, Point b) {
  const Point ab = b - a;
  const double l2 = dot(ab, ab);
  if (l2 == 0.0) return distance(p, a);
  const double t = std::clamp(dot(p - a, ab) / l2, 0.0, 1.0);
  return distance(p, a + t * ab);
}

bool intersects_disk(const Polygon& p, Point center, double radius) {
  if (point_in_polygon(center, p)) return true;
  auto ring_near = [&](std::span<const Point> ring) {
    for (std::size_t i = 0; i + 1 < ring.size(); ++i)
      if (distance_to_segment(center, ring[i], ring[i + 1]) <= radius) return true;
    return false;
  };
  // Center outside the polygon: the disk meets it only through a boundary edge.
  if (ring_near(p.exterior)) return true;
  for (const auto& h : p.holes)
    if (ring_near(h)) return true;
  return false;
}

bool intersects_disk(const Polyline& line, Point center, double radius) {
  if (line.points.size() == 1) return distance(line.points[0], center) <= radius;
  for (std::size_t i = 0; i + 1 < line.points.size(); ++i)
    if (distance_to_segment(center, line.points[i], line.points[i + 1]) <= radius) return true;
  return false;
}

Box bounding_box(std::span<const Point> pts) {
  Box b;
  for (const Point& p : pts) b.expand(p);
  return b;
}

Box bounding_box(const Polygon& p) { return bounding_box(p.exterior); }

Box bounding_box(const Polyline& line) { return bounding_box(line.points); }

}  // namespace morpho::geom
