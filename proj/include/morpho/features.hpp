#pragma once

// Grid sampling and the twelve per-point neighbourhood statistics computed
// over a circular buffer around each grid point.

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "morpho/environment.hpp"
#include "morpho/geom.hpp"
#include "morpho/ingest.hpp"

namespace morpho::features {

enum class Feature : std::size_t {
  avg_height,
  median_height,
  std_height,
  max_height,
  min_height,
  avg_area,
  max_area,
  min_area,
  building_count,
  footprint_density,
  avg_lanes,
  avg_speed,
};

inline constexpr std::size_t kFeatureCount = 12;

inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames{
    "avg_height", "median_height",  "std_height",        "max_height", "min_height", "avg_area",
    "max_area",   "min_area",       "building_count",    "footprint_density", "avg_lanes", "avg_speed",
};

std::optional<Feature> parse_feature(std::string_view name);

struct FeatureVector {
  std::array<double, kFeatureCount> values{};

  double& operator[](Feature f) { return values[static_cast<std::size_t>(f)]; }
  double operator[](Feature f) const { return values[static_cast<std::size_t>(f)]; }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

struct GridConfig {
  double spacing = 30.0;
  double buffer_radius = 300.0;
  std::size_t min_buildings = 1;
};

struct SamplePoint {
  geom::Point location;
  FeatureVector features;
  std::optional<EnvironmentClass> label;
};

/// Row-major lattice anchored at the region's bounding-box minimum corner,
/// filtered to points inside the region.
std::vector<geom::Point> generate_grid(const geom::Polygon& region, const GridConfig& cfg);

/// Defaults used when a road carries no lanes/maxspeed tag.
int default_lanes(ingest::RoadClass c);
double default_speed(ingest::RoadClass c);

/// Buffer statistics at `pt`. The indexes must be built over the city's
/// building footprints and road paths in dataset order.
FeatureVector compute_features(geom::Point pt, const ingest::CityDataset& city,
                               const geom::SpatialIndex<geom::Polygon>& buildings,
                               const geom::SpatialIndex<geom::Polyline>& roads, const GridConfig& cfg);

/// Owns the indexes for one city and evaluates points in parallel.
class FeatureExtractor {
 public:
  FeatureExtractor(const ingest::CityDataset& city, GridConfig cfg);

  FeatureVector compute(geom::Point pt) const;
  std::vector<FeatureVector> compute_all(std::span<const geom::Point> pts) const;

  const GridConfig& config() const { return cfg_; }
  const geom::SpatialIndex<geom::Polygon>& building_index() const { return buildings_; }
  const geom::SpatialIndex<geom::Polyline>& road_index() const { return roads_; }

 private:
  const ingest::CityDataset& city_;
  GridConfig cfg_;
  geom::SpatialIndex<geom::Polygon> buildings_;
  geom::SpatialIndex<geom::Polyline> roads_;
};

struct LabelResult {
  std::vector<SamplePoint> points;
  std::size_t conflicts_dropped = 0;
};

/// Assigns each point the label of the polygon(s) containing it; points in
/// polygons with conflicting labels are dropped.
LabelResult label_points(std::vector<SamplePoint> points, std::span<const ingest::LabeledPolygon> labels);

struct TrainingSet {
  std::vector<SamplePoint> samples;  // all labelled
  std::size_t conflicts_dropped = 0;
  std::size_t below_min_buildings = 0;
};

TrainingSet extract_training_set(const ingest::CityDataset& city, std::span<const ingest::LabeledPolygon> labels,
                                 const GridConfig& cfg);

/// CSV dump: x, y, the twelve features, label (empty when unlabelled).
void write_samples_csv(const std::filesystem::path& path, std::span<const SamplePoint> samples);

}  // namespace morpho::features
