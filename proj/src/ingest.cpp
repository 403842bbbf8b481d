#include "morpho/ingest.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "morpho/error.hpp"

namespace morpho::ingest {

using json = nlohmann::json;
using geom::Point;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

json read_feature_collection(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestError(fmt::format("{}: cannot open file", path.string()));
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw IngestError(fmt::format("{}: malformed JSON: {}", path.string(), e.what()));
  }
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" || !doc.contains("features") ||
      !doc["features"].is_array())
    throw IngestError(fmt::format("{}: not a GeoJSON FeatureCollection", path.string()));
  return doc;
}

std::string feature_id(const json& feature, std::size_t index, char prefix) {
  if (feature.contains("id")) {
    const auto& id = feature["id"];
    if (id.is_string()) return id.get<std::string>();
    if (id.is_number_integer()) return std::to_string(id.get<long long>());
  }
  const auto& props = feature.value("properties", json::object());
  if (props.is_object() && props.contains("id")) {
    const auto& id = props["id"];
    if (id.is_string()) return id.get<std::string>();
    if (id.is_number_integer()) return std::to_string(id.get<long long>());
  }
  return fmt::format("{}{}", prefix, index);
}

Point read_position(const json& pos, const Projection& proj) {
  if (!pos.is_array() || pos.size() < 2 || !pos[0].is_number() || !pos[1].is_number())
    throw GeometryError("bad position");
  return proj.forward({pos[0].get<double>(), pos[1].get<double>()});
}

geom::Ring read_ring(const json& coords, const Projection& proj) {
  if (!coords.is_array()) throw GeometryError("ring is not an array");
  geom::Ring ring;
  ring.reserve(coords.size());
  for (const auto& pos : coords) ring.push_back(read_position(pos, proj));
  return geom::normalize_ring(std::move(ring));
}

geom::Polygon read_polygon(const json& coords, const Projection& proj) {
  if (!coords.is_array() || coords.empty()) throw GeometryError("polygon has no rings");
  geom::Polygon p;
  p.exterior = read_ring(coords[0], proj);
  for (std::size_t i = 1; i < coords.size(); ++i) p.holes.push_back(read_ring(coords[i], proj));
  geom::validate(p);
  for (const auto& h : p.holes)
    if (!geom::point_in_polygon(h.front(), geom::Polygon{p.exterior, {}}))
      throw GeometryError("hole outside exterior");
  return p;
}

// Numbers may arrive as JSON numbers or as strings.
std::optional<double> number_property(const json& props, const std::string& key) {
  if (!props.is_object() || !props.contains(key)) return std::nullopt;
  const auto& v = props[key];
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) return parse_number(v.get<std::string>());
  return std::nullopt;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

json position(Point p, const Projection& proj) {
  const LonLat ll = proj.inverse(p);
  return json::array({ll.lon, ll.lat});
}

json ring_coords(const geom::Ring& ring, const Projection& proj) {
  json out = json::array();
  for (const Point& p : ring) out.push_back(position(p, proj));
  return out;
}

json polygon_coords(const geom::Polygon& poly, const Projection& proj) {
  json out = json::array({ring_coords(poly.exterior, proj)});
  for (const auto& h : poly.holes) out.push_back(ring_coords(h, proj));
  return out;
}

void write_json(const std::filesystem::path& path, const json& doc) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestError(fmt::format("{}: cannot write file", path.string()));
  out << doc.dump() << '\n';
  if (!out) throw IngestError(fmt::format("{}: write failed", path.string()));
}

}  // namespace

Point project_lonlat(double lon, double lat, LonLat origin) {
  if (!std::isfinite(lon) || !std::isfinite(lat) || std::abs(lat) >= 85.0)
    throw IngestError(fmt::format("latitude {} out of range (|lat| < 85)", lat));
  return {kEarthRadius * std::cos(origin.lat * kDeg) * (lon - origin.lon) * kDeg,
          kEarthRadius * (lat - origin.lat) * kDeg};
}

LonLat unproject(Point p, LonLat origin) {
  return {origin.lon + p.x / (kEarthRadius * std::cos(origin.lat * kDeg) * kDeg),
          origin.lat + p.y / (kEarthRadius * kDeg)};
}

Point Projection::forward(LonLat ll) const { return project_lonlat(ll.lon, ll.lat, origin); }

LonLat Projection::inverse(Point p) const { return unproject(p, origin); }

std::string Projection::crs_note() const {
  return fmt::format("local equirectangular, origin lon={:.9f} lat={:.9f}, R={} m", origin.lon, origin.lat,
                     kEarthRadius);
}

Projection resolve_projection(const ProjectionSpec& spec, const std::filesystem::path& buildings) {
  Projection proj;
  proj.height_key = spec.height_key;
  if (spec.origin) {
    proj.origin = *spec.origin;
    return proj;
  }
  const json doc = read_feature_collection(buildings);
  double sum_lon = 0.0, sum_lat = 0.0;
  std::size_t n = 0;
  auto add_ring = [&](const json& ring) {
    if (!ring.is_array()) return;
    for (const auto& pos : ring)
      if (pos.is_array() && pos.size() >= 2 && pos[0].is_number() && pos[1].is_number()) {
        sum_lon += pos[0].get<double>();
        sum_lat += pos[1].get<double>();
        ++n;
      }
  };
  for (const auto& f : doc["features"]) {
    if (!f.is_object() || !f.contains("geometry") || !f["geometry"].is_object()) continue;
    const auto& g = f["geometry"];
    const std::string type = g.value("type", "");
    if (!g.contains("coordinates") || !g["coordinates"].is_array()) continue;
    if (type == "Polygon" && !g["coordinates"].empty()) add_ring(g["coordinates"][0]);
    if (type == "MultiPolygon")
      for (const auto& part : g["coordinates"])
        if (part.is_array() && !part.empty()) add_ring(part[0]);
  }
  if (n == 0) throw IngestError(fmt::format("{}: no coordinates to derive a projection origin", buildings.string()));
  proj.origin = {sum_lon / static_cast<double>(n), sum_lat / static_cast<double>(n)};
  return proj;
}

std::optional<RoadClass> parse_road_class(std::string_view highway) {
  static constexpr std::pair<std::string_view, RoadClass> table[] = {
      {"motorway", RoadClass::motorway},   {"trunk", RoadClass::trunk},
      {"primary", RoadClass::primary},     {"secondary", RoadClass::secondary},
      {"tertiary", RoadClass::tertiary},   {"unclassified", RoadClass::unclassified},
      {"residential", RoadClass::residential},
  };
  for (const auto& [name, c] : table)
    if (name == highway) return c;
  return std::nullopt;
}

std::string_view to_string(RoadClass c) {
  switch (c) {
    case RoadClass::motorway: return "motorway";
    case RoadClass::trunk: return "trunk";
    case RoadClass::primary: return "primary";
    case RoadClass::secondary: return "secondary";
    case RoadClass::tertiary: return "tertiary";
    case RoadClass::unclassified: return "unclassified";
    case RoadClass::residential: return "residential";
  }
  return "?";
}

std::optional<double> parse_number(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::optional<double> parse_speed(std::string_view text) {
  text = trim(text);
  double scale = 1.0;
  for (const auto& [suffix, factor] : {std::pair<std::string_view, double>{"km/h", 1.0}, {"kmh", 1.0}, {"kph", 1.0},
                                       {"mph", 1.609344}})
    if (text.size() > suffix.size() && text.ends_with(suffix)) {
      text.remove_suffix(suffix.size());
      scale = factor;
      break;
    }
  const auto v = parse_number(text);
  if (!v) return std::nullopt;
  return *v * scale;
}

std::optional<int> parse_lanes(std::string_view text) {
  text = trim(text);
  int value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size() || value <= 0) return std::nullopt;
  return value;
}

Loaded<BuildingFootprint> load_buildings(const std::filesystem::path& path, const Projection& proj) {
  const json doc = read_feature_collection(path);
  Loaded<BuildingFootprint> out;
  const auto& features = doc["features"];
  for (std::size_t i = 0; i < features.size(); ++i) {
    const json& f = features[i];
    try {
      if (!f.is_object() || !f.contains("geometry") || !f["geometry"].is_object())
        throw GeometryError("missing geometry");
      const json& g = f["geometry"];
      const std::string type = g.value("type", "");
      const json props = f.value("properties", json::object());
      const std::string id = feature_id(f, i, 'b');

      std::optional<double> height = number_property(props, proj.height_key);
      if (height && !(*height > 0.0 && *height < 1000.0)) {
        out.stats.warnings.push_back(fmt::format("{} feature {}: height {} out of range, treated as absent",
                                                 path.string(), i, *height));
        height.reset();
      }

      std::vector<geom::Polygon> parts;
      if (type == "Polygon") {
        parts.push_back(read_polygon(g.at("coordinates"), proj));
      } else if (type == "MultiPolygon") {
        for (const auto& c : g.at("coordinates")) parts.push_back(read_polygon(c, proj));
        if (parts.empty()) throw GeometryError("empty MultiPolygon");
      } else {
        throw GeometryError(fmt::format("unsupported geometry type '{}'", type));
      }
      if (parts.size() == 1) {
        out.items.push_back({id, std::move(parts[0]), height});
      } else {
        for (std::size_t k = 0; k < parts.size(); ++k)
          out.items.push_back({fmt::format("{}:{}", id, k), std::move(parts[k]), height});
      }
    } catch (const std::exception& e) {
      ++out.stats.skipped;
      out.stats.warnings.push_back(fmt::format("{} feature {}: skipped: {}", path.string(), i, e.what()));
    }
  }
  out.stats.kept = out.items.size();
  if (out.items.empty()) throw IngestError(fmt::format("{}: no valid building features", path.string()));
  return out;
}

Loaded<RoadSegment> load_roads(const std::filesystem::path& path, const Projection& proj) {
  const json doc = read_feature_collection(path);
  Loaded<RoadSegment> out;
  std::size_t valid = 0;
  const auto& features = doc["features"];
  for (std::size_t i = 0; i < features.size(); ++i) {
    const json& f = features[i];
    try {
      if (!f.is_object() || !f.contains("geometry") || !f["geometry"].is_object())
        throw GeometryError("missing geometry");
      const json& g = f["geometry"];
      if (g.value("type", "") != "LineString") throw GeometryError("geometry is not a LineString");
      RoadSegment seg;
      for (const auto& pos : g.at("coordinates")) {
        const Point p = read_position(pos, proj);
        if (seg.path.points.empty() || !(seg.path.points.back() == p)) seg.path.points.push_back(p);
      }
      if (seg.path.points.size() < 2) throw GeometryError("fewer than 2 distinct path points");
      ++valid;

      const json props = f.value("properties", json::object());
      const std::string highway = props.is_object() && props.contains("highway") && props["highway"].is_string()
                                      ? props["highway"].get<std::string>()
                                      : std::string();
      const auto cls = parse_road_class(highway);
      if (!cls) {
        ++out.stats.dropped_by_class;
        continue;
      }
      seg.id = feature_id(f, i, 'r');
      seg.road_class = *cls;
      if (props.contains("lanes")) {
        const auto& v = props["lanes"];
        if (v.is_number_integer() && v.get<long long>() > 0) seg.lanes = static_cast<int>(v.get<long long>());
        else if (v.is_string()) seg.lanes = parse_lanes(v.get<std::string>());
      }
      if (props.contains("maxspeed")) {
        const auto& v = props["maxspeed"];
        const auto speed = v.is_number() ? std::optional<double>(v.get<double>())
                           : v.is_string() ? parse_speed(v.get<std::string>())
                                           : std::nullopt;
        if (speed && *speed > 0.0) seg.maxspeed = speed;
      }
      if (props.contains("name") && props["name"].is_string()) seg.name = props["name"].get<std::string>();
      out.items.push_back(std::move(seg));
    } catch (const std::exception& e) {
      ++out.stats.skipped;
      out.stats.warnings.push_back(fmt::format("{} feature {}: skipped: {}", path.string(), i, e.what()));
    }
  }
  out.stats.kept = out.items.size();
  if (valid == 0) throw IngestError(fmt::format("{}: no valid road features", path.string()));
  if (out.items.empty())
    out.stats.warnings.push_back(fmt::format("{}: every road was filtered out by class", path.string()));
  return out;
}

Loaded<LabeledPolygon> load_labeled_polygons(const std::filesystem::path& path, const Projection& proj) {
  const json doc = read_feature_collection(path);
  Loaded<LabeledPolygon> out;
  const auto& features = doc["features"];
  for (std::size_t i = 0; i < features.size(); ++i) {
    const json& f = features[i];
    const json props = f.is_object() ? f.value("properties", json::object()) : json::object();
    const std::string raw =
        props.is_object() && props.contains("env_class") && props["env_class"].is_string()
            ? props["env_class"].get<std::string>()
            : std::string("<missing>");
    const auto label = parse_environment(raw);
    if (!label || *label == EnvironmentClass::OPEN)
      throw IngestError(
          fmt::format("{} feature {}: unknown env_class '{}' (expected RES, ULR or UHR)", path.string(), i, raw));
    try {
      if (!f.contains("geometry") || !f["geometry"].is_object()) throw GeometryError("missing geometry");
      const json& g = f["geometry"];
      const std::string type = g.value("type", "");
      const std::string id = feature_id(f, i, 'l');
      if (type == "Polygon") {
        out.items.push_back({id, read_polygon(g.at("coordinates"), proj), *label});
      } else if (type == "MultiPolygon") {
        std::size_t k = 0;
        for (const auto& c : g.at("coordinates"))
          out.items.push_back({fmt::format("{}:{}", id, k++), read_polygon(c, proj), *label});
      } else {
        throw GeometryError(fmt::format("unsupported geometry type '{}'", type));
      }
    } catch (const GeometryError& e) {
      ++out.stats.skipped;
      out.stats.warnings.push_back(fmt::format("{} feature {}: skipped: {}", path.string(), i, e.what()));
    }
  }
  out.stats.kept = out.items.size();
  if (out.items.empty()) throw IngestError(fmt::format("{}: no valid labelled polygons", path.string()));
  return out;
}

CityDataset build_city_dataset(std::vector<BuildingFootprint> buildings, std::vector<RoadSegment> roads,
                               LonLat origin) {
  std::vector<Point> vertices;
  for (const auto& b : buildings)
    vertices.insert(vertices.end(), b.footprint.exterior.begin(), b.footprint.exterior.end());
  CityDataset city;
  try {
    city.boundary = geom::convex_hull(vertices);
  } catch (const GeometryError& e) {
    throw IngestError(fmt::format("cannot build city boundary: {}", e.what()));
  }
  city.buildings = std::move(buildings);
  city.roads = std::move(roads);
  city.origin = origin;
  city.crs_note = Projection{origin}.crs_note();
  return city;
}

void write_buildings_geojson(const std::filesystem::path& path, const std::vector<BuildingFootprint>& buildings,
                             const Projection& proj) {
  json features = json::array();
  for (const auto& b : buildings) {
    json props = json::object();
    if (b.height) props[proj.height_key] = *b.height;
    features.push_back({{"type", "Feature"},
                        {"id", b.id},
                        {"properties", props},
                        {"geometry", {{"type", "Polygon"}, {"coordinates", polygon_coords(b.footprint, proj)}}}});
  }
  write_json(path, {{"type", "FeatureCollection"}, {"features", features}});
}

void write_roads_geojson(const std::filesystem::path& path, const std::vector<RoadSegment>& roads,
                         const Projection& proj) {
  json features = json::array();
  for (const auto& r : roads) {
    json props = {{"highway", std::string(to_string(r.road_class))}};
    if (r.lanes) props["lanes"] = std::to_string(*r.lanes);
    if (r.maxspeed) props["maxspeed"] = fmt::format("{}", *r.maxspeed);
    if (r.name) props["name"] = *r.name;
    json coords = json::array();
    for (const Point& p : r.path.points) coords.push_back(position(p, proj));
    features.push_back({{"type", "Feature"},
                        {"id", r.id},
                        {"properties", props},
                        {"geometry", {{"type", "LineString"}, {"coordinates", coords}}}});
  }
  write_json(path, {{"type", "FeatureCollection"}, {"features", features}});
}

void write_labels_geojson(const std::filesystem::path& path, const std::vector<LabeledPolygon>& labels,
                          const Projection& proj) {
  json features = json::array();
  for (const auto& l : labels)
    features.push_back({{"type", "Feature"},
                        {"id", l.id},
                        {"properties", {{"env_class", std::string(to_string(l.label))}}},
                        {"geometry", {{"type", "Polygon"}, {"coordinates", polygon_coords(l.polygon, proj)}}}});
  write_json(path, {{"type", "FeatureCollection"}, {"features", features}});
}

void write_dataset_bundle(const std::filesystem::path& path, const CityDataset& city) {
  auto ring_xy = [](const geom::Ring& ring) {
    json out = json::array();
    for (const Point& p : ring) out.push_back(json::array({p.x, p.y}));
    return out;
  };
  json buildings = json::array();
  for (const auto& b : city.buildings) {
    json rings = json::array({ring_xy(b.footprint.exterior)});
    for (const auto& h : b.footprint.holes) rings.push_back(ring_xy(h));
    buildings.push_back({{"id", b.id}, {"height", b.height ? json(*b.height) : json(nullptr)}, {"rings", rings}});
  }
  json roads = json::array();
  for (const auto& r : city.roads) {
    json pts = json::array();
    for (const Point& p : r.path.points) pts.push_back(json::array({p.x, p.y}));
    roads.push_back({{"id", r.id},
                     {"class", std::string(to_string(r.road_class))},
                     {"lanes", r.lanes ? json(*r.lanes) : json(nullptr)},
                     {"maxspeed", r.maxspeed ? json(*r.maxspeed) : json(nullptr)},
                     {"name", r.name ? json(*r.name) : json(nullptr)},
                     {"path", pts}});
  }
  write_json(path, {{"crs", city.crs_note},
                    {"origin", json::array({city.origin.lon, city.origin.lat})},
                    {"boundary", ring_xy(city.boundary.exterior)},
                    {"buildings", buildings},
                    {"roads", roads}});
}

}  // namespace morpho::ingest
