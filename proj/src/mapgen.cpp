#include "morpho/mapgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>

#include <json.hpp>

#include "morpho/error.hpp"

namespace morpho::mapgen {

using geom::Point;
using json = nlohmann::json;

MorphologyMap classify_city(const ingest::CityDataset& city, const forest::ForestModel& model,
                            const features::GridConfig& cfg, std::string model_id) {
  MorphologyMap map;
  const geom::Box box = geom::bounding_box(city.boundary);
  map.origin = {box.min_x, box.min_y};
  map.spacing = cfg.spacing;
  map.model_id = std::move(model_id);
  map.crs_note = city.crs_note;
  map.projection_origin = city.origin;

  const std::vector<Point> grid = features::generate_grid(city.boundary, cfg);
  if (grid.empty()) throw MapError("city boundary produced an empty grid");
  const features::FeatureExtractor extractor(city, cfg);
  const auto fvs = extractor.compute_all(grid);
  map.cells.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const bool open = fvs[i][features::Feature::building_count] < static_cast<double>(cfg.min_buildings);
    map.cells.push_back({grid[i], open ? EnvironmentClass::OPEN : forest::predict(model, fvs[i])});
  }
  return map;
}

std::array<std::size_t, 4> class_counts(const MorphologyMap& map) {
  std::array<std::size_t, 4> counts{};
  for (const auto& c : map.cells) ++counts[index_of(c.env)];
  return counts;
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw MapError("SHA-256 computation failed");
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::string file_sha256(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MapError(fmt::format("{}: cannot open for hashing", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

void emit_geojson(const MorphologyMap& map, const std::filesystem::path& path) {
  if (map.cells.empty()) throw MapError("cannot emit an empty map");
  const double h = 0.5 * map.spacing;
  json features = json::array();
  for (const auto& cell : map.cells) {
    const Point c = cell.location;
    json ring = json::array();
    for (const Point corner : {Point{c.x - h, c.y - h}, Point{c.x + h, c.y - h}, Point{c.x + h, c.y + h},
                               Point{c.x - h, c.y + h}, Point{c.x - h, c.y - h}}) {
      const ingest::LonLat ll = ingest::unproject(corner, map.projection_origin);
      ring.push_back(json::array({ll.lon, ll.lat}));
    }
    features.push_back({{"type", "Feature"},
                        {"properties", {{"env_class", std::string(to_string(cell.env))}, {"x", c.x}, {"y", c.y}}},
                        {"geometry", {{"type", "Polygon"}, {"coordinates", json::array({ring})}}}});
  }
  json doc = {{"type", "FeatureCollection"},
              {"model_id", map.model_id},
              {"crs", map.crs_note},
              {"spacing", map.spacing},
              {"grid_origin", json::array({map.origin.x, map.origin.y})},
              {"origin", json::array({map.projection_origin.lon, map.projection_origin.lat})},
              {"features", features}};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MapError(fmt::format("{}: cannot write map", path.string()));
  out << doc.dump() << '\n';
  if (!out) throw MapError(fmt::format("{}: write failed", path.string()));
}

MorphologyMap read_geojson(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MapError(fmt::format("{}: cannot open map", path.string()));
  try {
    const json doc = json::parse(in);
    MorphologyMap map;
    map.model_id = doc.value("model_id", "");
    map.crs_note = doc.value("crs", "");
    map.spacing = doc.at("spacing").get<double>();
    map.origin = {doc.at("grid_origin").at(0).get<double>(), doc.at("grid_origin").at(1).get<double>()};
    map.projection_origin = {doc.at("origin").at(0).get<double>(), doc.at("origin").at(1).get<double>()};
    for (const auto& f : doc.at("features")) {
      const auto& props = f.at("properties");
      const auto env = parse_environment(props.at("env_class").get<std::string>());
      if (!env) throw MapError("unknown env_class in map");
      map.cells.push_back({{props.at("x").get<double>(), props.at("y").get<double>()}, *env});
    }
    return map;
  } catch (const json::exception& e) {
    throw MapError(fmt::format("{}: invalid map file: {}", path.string(), e.what()));
  }
}

void emit_svg(const MorphologyMap& map, const std::filesystem::path& path, const Palette& palette) {
  if (map.cells.empty()) throw MapError("cannot emit an empty map");
  geom::Box box;
  for (const auto& c : map.cells) box.expand(c.location);
  const double h = 0.5 * map.spacing;
  const double span_x = box.max_x - box.min_x + map.spacing, span_y = box.max_y - box.min_y + map.spacing;
  const double scale = 900.0 / std::max(span_x, span_y);
  const double legend_h = 30.0;
  const double width = span_x * scale, height = span_y * scale + legend_h;
  const double side = map.spacing * scale;

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MapError(fmt::format("{}: cannot write SVG", path.string()));
  out << fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" viewBox=\"0 0 {:.2f} {:.2f}\">\n",
      std::ceil(width), std::ceil(height), width, height);
  out << "<g shape-rendering=\"crispEdges\">\n";
  for (const auto& c : map.cells) {
    const double x = (c.location.x - h - box.min_x) * scale;
    const double y = (box.max_y + h - c.location.y - h) * scale;
    out << fmt::format("<rect class=\"cell\" x=\"{:.3f}\" y=\"{:.3f}\" width=\"{:.3f}\" height=\"{:.3f}\" fill=\"{}\"/>\n", x, y,
                       side, side, palette.color(c.env));
  }
  out << "</g>\n<g font-family=\"sans-serif\" font-size=\"12\">\n";
  double lx = 8.0;
  const double ly = span_y * scale + 8.0;
  for (EnvironmentClass c :
       {EnvironmentClass::RES, EnvironmentClass::ULR, EnvironmentClass::UHR, EnvironmentClass::OPEN}) {
    out << fmt::format("<rect class=\"legend\" x=\"{:.0f}\" y=\"{:.0f}\" width=\"14\" height=\"14\" fill=\"{}\"/>\n",
                       lx, ly, palette.color(c));
    out << fmt::format("<text x=\"{:.0f}\" y=\"{:.0f}\">{}</text>\n", lx + 18, ly + 12, to_string(c));
    lx += 70.0;
  }
  out << "</g>\n</svg>\n";
}

}  // namespace morpho::mapgen
