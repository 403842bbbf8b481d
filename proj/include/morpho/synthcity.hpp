#pragma once

// Deterministic synthetic districts whose per-point buffer statistics track
// the per-class targets of a surveyed training city. Used as the test and
// demonstration fixture in place of real building data.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "morpho/environment.hpp"
#include "morpho/features.hpp"
#include "morpho/ingest.hpp"

namespace morpho::synthcity {

/// Per-class targets for one district.
struct ClassProfile {
  double mean_height = 0.0;  // m
  double std_height = 0.0;   // m
  double mean_area = 0.0;    // m^2, informative; footprint size follows count and density
  double count = 0.0;        // buildings meeting one buffer
  double density = 0.0;      // covered fraction of a buffer
  double lanes = 0.0;
  double speed = 0.0;        // km/h
};

/// Targets measured on the Montreal training polygons.
ClassProfile default_profile(EnvironmentClass c);

struct District {
  std::vector<ingest::BuildingFootprint> buildings;
  std::vector<ingest::RoadSegment> roads;
  ingest::LabeledPolygon label;
};

/// Square district [corner, corner + extent]^2. Buildings sit on a jittered
/// lattice of square footprints sized so a buffer of cfg.buffer_radius meets
/// `count` buildings covering `density` of it; heights follow a log-normal
/// with the profile's mean and standard deviation. Heights and footprint
/// sizes cluster by street block. The label covers the interior points only,
/// inset by buffer_radius from each edge.
District generate_district(const ClassProfile& profile, EnvironmentClass cls, double extent, std::uint64_t seed,
                           geom::Point corner = {}, const features::GridConfig& cfg = {});

struct TriCity {
  ingest::CityDataset city;
  std::vector<ingest::LabeledPolygon> labels;  // one per class
};

inline constexpr ingest::LonLat kDefaultOrigin{-73.5673, 45.5017};

/// RES, ULR and UHR districts in a row separated by building-free gaps of
/// 2 * buffer_radius + 300 m.
TriCity generate_tricity(std::uint64_t seed, const features::GridConfig& cfg = {},
                         ingest::LonLat origin = kDefaultOrigin);

/// Side length used for each tricity district.
double tricity_extent(EnvironmentClass c);

/// Writes buildings.geojson, roads.geojson and labels.geojson into `dir`.
void write_fixture(const std::filesystem::path& dir, const TriCity& tri);

}  // namespace morpho::synthcity
