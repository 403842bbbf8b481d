#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "morpho/environment.hpp"
#include "morpho/features.hpp"
#include "morpho/forest.hpp"
#include "morpho/geom.hpp"
#include "morpho/ingest.hpp"

namespace morpho::mapgen {

struct MapCell {
  geom::Point location;
  EnvironmentClass env = EnvironmentClass::OPEN;
};

/// Classified lattice over a city boundary. Cells are a subset of the
/// lattice anchored at `origin` with step `spacing`, in row-major order.
struct MorphologyMap {
  geom::Point origin;
  double spacing = 30.0;
  std::vector<MapCell> cells;
  std::string model_id;  // SHA-256 of the model file
  std::string crs_note;
  ingest::LonLat projection_origin;
};

/// Cells whose buffer holds fewer than cfg.min_buildings buildings are OPEN.
MorphologyMap classify_city(const ingest::CityDataset& city, const forest::ForestModel& model,
                            const features::GridConfig& cfg, std::string model_id = {});

/// Cell counts indexed by EnvironmentClass (RES, ULR, UHR, OPEN).
std::array<std::size_t, 4> class_counts(const MorphologyMap& map);

std::string sha256_hex(std::string_view bytes);
std::string file_sha256(const std::filesystem::path& path);

/// Square cells of side `spacing` centred on each point, in lon/lat.
void emit_geojson(const MorphologyMap& map, const std::filesystem::path& path);
MorphologyMap read_geojson(const std::filesystem::path& path);

void emit_svg(const MorphologyMap& map, const std::filesystem::path& path, const Palette& palette = {});

}  // namespace morpho::mapgen
