#include "morpho/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include <fmt/format.h>

#include "morpho/error.hpp"
#include "morpho/parallel.hpp"

namespace morpho::features {

using geom::Point;
using ingest::RoadClass;

namespace {

std::vector<geom::Polygon> footprints(const ingest::CityDataset& city) {
  std::vector<geom::Polygon> out;
  out.reserve(city.buildings.size());
  for (const auto& b : city.buildings) out.push_back(b.footprint);
  return out;
}

std::vector<geom::Polyline> paths(const ingest::CityDataset& city) {
  std::vector<geom::Polyline> out;
  out.reserve(city.roads.size());
  for (const auto& r : city.roads) out.push_back(r.path);
  return out;
}

// Hits are visited in id order so sums do not depend on input order.
template <class Items>
void sort_by_id(std::vector<std::size_t>& hits, const Items& items) {
  std::sort(hits.begin(), hits.end(), [&](std::size_t a, std::size_t b) {
    const auto& ia = items[a].id;
    const auto& ib = items[b].id;
    return ia != ib ? ia < ib : a < b;
  });
}

double median_of_sorted(const std::vector<double>& v) {
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::optional<Feature> parse_feature(std::string_view name) {
  for (std::size_t i = 0; i < kFeatureCount; ++i)
    if (kFeatureNames[i] == name) return static_cast<Feature>(i);
  return std::nullopt;
}

std::vector<Point> generate_grid(const geom::Polygon& region, const GridConfig& cfg) {
  std::vector<Point> out;
  if (!(cfg.spacing > 0.0)) throw PipelineError("grid spacing must be positive");
  if (region.exterior.size() < 4 || geom::distinct_vertex_count(region.exterior) < 3 ||
      geom::ring_signed_area(region.exterior) == 0.0)
    return out;
  const geom::Box box = geom::bounding_box(region);
  const auto nx = static_cast<std::size_t>(std::floor((box.max_x - box.min_x) / cfg.spacing)) + 1;
  const auto ny = static_cast<std::size_t>(std::floor((box.max_y - box.min_y) / cfg.spacing)) + 1;
  for (std::size_t j = 0; j < ny; ++j) {
    const double y = box.min_y + static_cast<double>(j) * cfg.spacing;
    for (std::size_t i = 0; i < nx; ++i) {
      const Point p{box.min_x + static_cast<double>(i) * cfg.spacing, y};
      if (geom::point_in_polygon(p, region)) out.push_back(p);
    }
  }
  return out;
}

int default_lanes(RoadClass c) {
  switch (c) {
    case RoadClass::motorway: return 3;
    case RoadClass::trunk:
    case RoadClass::primary:
    case RoadClass::secondary:
    case RoadClass::tertiary: return 2;
    case RoadClass::unclassified:
    case RoadClass::residential: return 1;
  }
  return 1;
}

double default_speed(RoadClass c) {
  switch (c) {
    case RoadClass::motorway: return 100.0;
    case RoadClass::trunk: return 80.0;
    case RoadClass::primary: return 60.0;
    case RoadClass::secondary:
    case RoadClass::tertiary:
    case RoadClass::unclassified: return 50.0;
    case RoadClass::residential: return 40.0;
  }
  return 50.0;
}

FeatureVector compute_features(Point pt, const ingest::CityDataset& city,
                               const geom::SpatialIndex<geom::Polygon>& buildings,
                               const geom::SpatialIndex<geom::Polyline>& roads, const GridConfig& cfg) {
  const double r = cfg.buffer_radius;
  FeatureVector fv;

  std::vector<std::size_t> hits = buildings.query_disk(pt, r);
  sort_by_id(hits, city.buildings);
  if (!hits.empty()) {
    std::vector<double> heights;
    double area_sum = 0.0, area_max = 0.0, area_min = std::numeric_limits<double>::infinity();
    double covered = 0.0;
    for (std::size_t id : hits) {
      const auto& b = city.buildings[id];
      const double a = geom::polygon_area(b.footprint);
      area_sum += a;
      area_max = std::max(area_max, a);
      area_min = std::min(area_min, a);
      covered += geom::disk_intersection_area(b.footprint, pt, r);
      if (b.height) heights.push_back(*b.height);
    }
    const auto n = static_cast<double>(hits.size());
    fv[Feature::avg_area] = area_sum / n;
    fv[Feature::max_area] = area_max;
    fv[Feature::min_area] = area_min;
    fv[Feature::building_count] = n;
    fv[Feature::footprint_density] = covered / (std::numbers::pi * r * r);

    if (!heights.empty()) {
      const auto m = static_cast<double>(heights.size());
      double sum = 0.0;
      for (double h : heights) sum += h;
      const double mean = sum / m;
      double ss = 0.0;
      for (double h : heights) ss += (h - mean) * (h - mean);
      std::vector<double> sorted = heights;
      std::sort(sorted.begin(), sorted.end());
      fv[Feature::avg_height] = mean;
      fv[Feature::median_height] = median_of_sorted(sorted);
      fv[Feature::std_height] = std::sqrt(ss / m);
      fv[Feature::max_height] = sorted.back();
      fv[Feature::min_height] = sorted.front();
    }
  }

  std::vector<std::size_t> road_hits = roads.query_disk(pt, r);
  sort_by_id(road_hits, city.roads);
  double length = 0.0, lanes = 0.0, speed = 0.0;
  for (std::size_t id : road_hits) {
    const auto& road = city.roads[id];
    const double len = geom::clipped_length(road.path, pt, r);
    if (len <= 0.0) continue;
    length += len;
    lanes += len * static_cast<double>(road.lanes.value_or(default_lanes(road.road_class)));
    speed += len * road.maxspeed.value_or(default_speed(road.road_class));
  }
  if (length > 0.0) {
    fv[Feature::avg_lanes] = lanes / length;
    fv[Feature::avg_speed] = speed / length;
  }
  return fv;
}

FeatureExtractor::FeatureExtractor(const ingest::CityDataset& city, GridConfig cfg)
    : city_(city), cfg_(cfg), buildings_(footprints(city)), roads_(paths(city)) {
  if (!(cfg_.buffer_radius > 0.0)) throw PipelineError("buffer radius must be positive");
}

FeatureVector FeatureExtractor::compute(Point pt) const {
  return compute_features(pt, city_, buildings_, roads_, cfg_);
}

std::vector<FeatureVector> FeatureExtractor::compute_all(std::span<const Point> pts) const {
  std::vector<FeatureVector> out(pts.size());
  parallel_for(pts.size(), [&](std::size_t i) { out[i] = compute(pts[i]); });
  return out;
}

LabelResult label_points(std::vector<SamplePoint> points, std::span<const ingest::LabeledPolygon> labels) {
  LabelResult result;
  result.points.reserve(points.size());
  for (auto& sp : points) {
    std::optional<EnvironmentClass> found;
    bool conflict = false;
    for (const auto& lp : labels) {
      if (!geom::point_in_polygon(sp.location, lp.polygon)) continue;
      if (found && *found != lp.label) conflict = true;
      found = lp.label;
    }
    if (conflict) {
      ++result.conflicts_dropped;
      continue;
    }
    sp.label = found;
    result.points.push_back(std::move(sp));
  }
  return result;
}

TrainingSet extract_training_set(const ingest::CityDataset& city, std::span<const ingest::LabeledPolygon> labels,
                                 const GridConfig& cfg) {
  // Overlapping polygons can emit the same lattice point twice; keep the first.
  std::vector<SamplePoint> points;
  std::set<std::pair<double, double>> seen;
  for (const auto& lp : labels)
    for (const Point& p : generate_grid(lp.polygon, cfg))
      if (seen.insert({p.x, p.y}).second) points.push_back({p, {}, std::nullopt});

  LabelResult labelled = label_points(std::move(points), labels);
  TrainingSet out;
  out.conflicts_dropped = labelled.conflicts_dropped;

  std::vector<Point> locations;
  locations.reserve(labelled.points.size());
  for (const auto& sp : labelled.points) locations.push_back(sp.location);
  const FeatureExtractor extractor(city, cfg);
  const std::vector<FeatureVector> fvs = extractor.compute_all(locations);

  for (std::size_t i = 0; i < labelled.points.size(); ++i) {
    if (fvs[i][Feature::building_count] < static_cast<double>(cfg.min_buildings)) {
      ++out.below_min_buildings;
      continue;
    }
    SamplePoint sp = labelled.points[i];
    sp.features = fvs[i];
    out.samples.push_back(std::move(sp));
  }
  if (out.samples.empty()) throw PipelineError("training set is empty: no labelled grid point has buildings in its buffer");
  return out;
}

void write_samples_csv(const std::filesystem::path& path, std::span<const SamplePoint> samples) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PipelineError(fmt::format("{}: cannot write file", path.string()));
  out << "x,y";
  for (auto name : kFeatureNames) out << ',' << name;
  out << ",label\n";
  for (const auto& sp : samples) {
    out << fmt::format("{},{}", sp.location.x, sp.location.y);
    for (double v : sp.features.values) out << fmt::format(",{}", v);
    out << ',' << (sp.label ? to_string(*sp.label) : std::string_view{}) << '\n';
  }
}

}  // namespace morpho::features
