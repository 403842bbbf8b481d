#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "morpho/error.hpp"
#include "morpho/features.hpp"
#include "test_util.hpp"

using namespace morpho;
using namespace morpho::features;
using geom::Point;
using geom::Polygon;
using ingest::BuildingFootprint;
using ingest::RoadClass;
using ingest::RoadSegment;
using morpho::testing::rect;
using morpho::testing::uniform;

namespace {

double seg_dist(Point p, Point a, Point b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 == 0.0 ? 0.0 : ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

// Membership by definition: centre inside the footprint or any edge within r.
bool touches(const Polygon& poly, Point c, double r) {
  if (geom::point_in_polygon(c, poly)) return true;
  auto ring_near = [&](const geom::Ring& ring) {
    for (std::size_t i = 0; i + 1 < ring.size(); ++i)
      if (seg_dist(c, ring[i], ring[i + 1]) <= r) return true;
    return false;
  };
  if (ring_near(poly.exterior)) return true;
  for (const auto& h : poly.holes)
    if (ring_near(h)) return true;
  return false;
}

// Length of a segment inside a disk by dense subdivision (independent of the
// exact circle clipping used by the library).
double sampled_length_in_disk(Point a, Point b, Point c, double r) {
  const int n = 20000;
  double len = 0.0;
  const double step = std::hypot(b.x - a.x, b.y - a.y) / n;
  for (int k = 0; k < n; ++k) {
    const double t = (k + 0.5) / n;
    const Point m{a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)};
    if (std::hypot(m.x - c.x, m.y - c.y) <= r) len += step;
  }
  return len;
}

// Linear-scan features; summation over buildings sorted by id.
FeatureVector brute_force(Point c, const ingest::CityDataset& city, double r) {
  std::vector<const BuildingFootprint*> hits;
  for (const auto& b : city.buildings)
    if (touches(b.footprint, c, r)) hits.push_back(&b);
  std::sort(hits.begin(), hits.end(), [](auto* a, auto* b) { return a->id < b->id; });
  FeatureVector fv;
  if (!hits.empty()) {
    std::vector<double> areas, heights;
    double covered = 0.0;
    for (auto* b : hits) {
      areas.push_back(geom::polygon_area(b->footprint));
      covered += geom::disk_intersection_area(b->footprint, c, r);
      if (b->height) heights.push_back(*b->height);
    }
    double sum = 0.0;
    for (double a : areas) sum += a;
    fv[Feature::avg_area] = sum / areas.size();
    fv[Feature::max_area] = *std::max_element(areas.begin(), areas.end());
    fv[Feature::min_area] = *std::min_element(areas.begin(), areas.end());
    fv[Feature::building_count] = static_cast<double>(hits.size());
    fv[Feature::footprint_density] = covered / (std::numbers::pi * r * r);
    if (!heights.empty()) {
      double hs = 0.0;
      for (double h : heights) hs += h;
      const double mean = hs / heights.size();
      double ss = 0.0;
      for (double h : heights) ss += (h - mean) * (h - mean);
      std::vector<double> s = heights;
      std::sort(s.begin(), s.end());
      const std::size_t n = s.size();
      fv[Feature::avg_height] = mean;
      fv[Feature::median_height] = n % 2 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
      fv[Feature::std_height] = std::sqrt(ss / n);
      fv[Feature::max_height] = s.back();
      fv[Feature::min_height] = s.front();
    }
  }
  double len = 0.0, lanes = 0.0, speed = 0.0;
  for (const auto& road : city.roads) {
    const double l = geom::clipped_length(road.path, c, r);
    if (l <= 0.0) continue;
    len += l;
    lanes += l * road.lanes.value_or(default_lanes(road.road_class));
    speed += l * road.maxspeed.value_or(default_speed(road.road_class));
  }
  if (len > 0.0) {
    fv[Feature::avg_lanes] = lanes / len;
    fv[Feature::avg_speed] = speed / len;
  }
  return fv;
}

bool close(double a, double b, double rel) { return std::abs(a - b) <= rel * std::max({1.0, std::abs(a), std::abs(b)}); }

ingest::CityDataset random_city(std::uint64_t seed, std::size_t n_buildings, std::size_t n_roads, double extent) {
  std::mt19937_64 rng(seed);
  std::vector<BuildingFootprint> bs;
  for (std::size_t i = 0; i < n_buildings; ++i) {
    const double x = uniform(rng, 0, extent), y = uniform(rng, 0, extent);
    const double w = uniform(rng, 4, 40), h = uniform(rng, 4, 40);
    std::optional<double> height;
    if (uniform(rng, 0, 1) < 0.9) height = uniform(rng, 3, 80);
    bs.push_back({"b" + std::to_string(100000 + i), rect(x, y, x + w, y + h), height});
  }
  std::vector<RoadSegment> rs;
  const RoadClass classes[] = {RoadClass::motorway,  RoadClass::trunk,        RoadClass::primary,    RoadClass::secondary,
                               RoadClass::tertiary,  RoadClass::unclassified, RoadClass::residential};
  for (std::size_t i = 0; i < n_roads; ++i) {
    const Point a{uniform(rng, 0, extent), uniform(rng, 0, extent)};
    const Point b{a.x + uniform(rng, -300, 300), a.y + uniform(rng, -300, 300)};
    std::optional<int> lanes;
    std::optional<double> speed;
    if (uniform(rng, 0, 1) < 0.5) lanes = 1 + static_cast<int>(uniform(rng, 0, 4));
    if (uniform(rng, 0, 1) < 0.5) speed = 10.0 * (3 + static_cast<int>(uniform(rng, 0, 7)));
    rs.push_back({"r" + std::to_string(100000 + i), geom::Polyline{{a, b}}, classes[i % 7], lanes, speed, {}});
  }
  return ingest::build_city_dataset(std::move(bs), std::move(rs));
}

}  // namespace

TEST_CASE("generate_grid") {
  const auto pts = generate_grid(rect(0, 0, 100, 100), {});
  REQUIRE(pts.size() == 16);
  std::size_t k = 0;
  for (double y : {0.0, 30.0, 60.0, 90.0})
    for (double x : {0.0, 30.0, 60.0, 90.0}) {
      CHECK(pts[k].x == x);
      CHECK(pts[k].y == y);
      ++k;
    }
  CHECK(generate_grid(rect(5, 5, 20, 20), {}).size() == 1);
  const Polygon flat{{{0, 0}, {10, 0}, {20, 0}, {0, 0}}, {}};
  CHECK(generate_grid(flat, {}).empty());
}

TEST_CASE("single building buffer") {
  auto city = ingest::build_city_dataset({{"a", rect(-5, -5, 5, 5), 5.0}}, {});
  const FeatureExtractor fx(city, {});
  const FeatureVector fv = fx.compute({0, 0});
  CHECK(fv[Feature::building_count] == 1.0);
  for (Feature f : {Feature::avg_height, Feature::median_height, Feature::max_height, Feature::min_height})
    CHECK(fv[f] == 5.0);
  CHECK(fv[Feature::std_height] == 0.0);
  for (Feature f : {Feature::avg_area, Feature::max_area, Feature::min_area}) CHECK(fv[f] == doctest::Approx(100.0));
  CHECK(fv[Feature::footprint_density] == doctest::Approx(100.0 / (std::numbers::pi * 300.0 * 300.0)).epsilon(1e-12));
  CHECK(fv[Feature::footprint_density] == doctest::Approx(3.537e-4).epsilon(1e-3));
  CHECK(fv[Feature::avg_lanes] == 0.0);
  CHECK(fv[Feature::avg_speed] == 0.0);

  const FeatureVector empty = fx.compute({5000, 5000});
  for (double v : empty.values) CHECK(v == 0.0);
}

TEST_CASE("height statistics use the population deviation and mid-average median") {
  std::vector<BuildingFootprint> bs;
  const double hs[] = {2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0};
  for (int i = 0; i < 8; ++i) bs.push_back({"b" + std::to_string(i), rect(i * 20, 0, i * 20 + 10, 10), hs[i]});
  bs.push_back({"nh", rect(0, 50, 10, 60), std::nullopt});
  auto city = ingest::build_city_dataset(std::move(bs), {});
  const FeatureVector fv = FeatureExtractor(city, {}).compute({50, 0});
  CHECK(fv[Feature::building_count] == 9.0);
  CHECK(fv[Feature::avg_height] == doctest::Approx(5.0));
  CHECK(fv[Feature::std_height] == doctest::Approx(2.0));
  CHECK(fv[Feature::median_height] == doctest::Approx(4.5));
}

TEST_CASE("road attributes are length weighted with class defaults") {
  std::vector<RoadSegment> rs{
      {"r1", geom::Polyline{{{-1000, 0}, {1000, 0}}}, RoadClass::primary, 4, 70.0, {}},
      {"r2", geom::Polyline{{{0, -100}, {0, 100}}}, RoadClass::residential, {}, {}, {}},
  };
  auto city = ingest::build_city_dataset({{"a", rect(-5, -5, 5, 5), 5.0}}, std::move(rs));
  const FeatureVector fv = FeatureExtractor(city, {}).compute({0, 0});
  // r1 contributes 600 m inside the buffer, r2 200 m.
  CHECK(fv[Feature::avg_lanes] == doctest::Approx((600.0 * 4 + 200.0 * 1) / 800.0));
  CHECK(fv[Feature::avg_speed] == doctest::Approx((600.0 * 70 + 200.0 * 40) / 800.0));

  CHECK(default_lanes(RoadClass::motorway) == 3);
  CHECK(default_lanes(RoadClass::tertiary) == 2);
  CHECK(default_lanes(RoadClass::unclassified) == 1);
  CHECK(default_speed(RoadClass::motorway) == 100.0);
  CHECK(default_speed(RoadClass::trunk) == 80.0);
  CHECK(default_speed(RoadClass::primary) == 60.0);
  CHECK(default_speed(RoadClass::unclassified) == 50.0);
}

TEST_CASE("exact circle clipping agrees with dense sampling") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const Point a{uniform(rng, -500, 500), uniform(rng, -500, 500)};
    const Point b{uniform(rng, -500, 500), uniform(rng, -500, 500)};
    const double exact = geom::clipped_length(geom::Polyline{{a, b}}, {0, 0}, 300);
    const double sampled = sampled_length_in_disk(a, b, {0, 0}, 300);
    REQUIRE(std::abs(exact - sampled) <= 2.0 * std::hypot(b.x - a.x, b.y - a.y) / 20000 + 1e-9);
  }
}

TEST_CASE("indexed features equal a brute-force scan") {
  const auto city = random_city(11, 1000, 150, 2000);
  const FeatureExtractor fx(city, {});
  std::mt19937_64 rng(12);
  for (int i = 0; i < 100; ++i) {
    const Point c{uniform(rng, -200, 2200), uniform(rng, -200, 2200)};
    const FeatureVector got = fx.compute(c);
    const FeatureVector want = brute_force(c, city, 300);
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      INFO("feature ", kFeatureNames[f], " at (", c.x, ", ", c.y, ")");
      REQUIRE(close(got.values[f], want.values[f], 1e-9));
    }
  }
}

TEST_CASE("feature invariants") {
  const auto city = random_city(21, 600, 60, 1500);
  const FeatureExtractor fx(city, {});
  std::mt19937_64 rng(22);
  for (int i = 0; i < 200; ++i) {
    const FeatureVector v = fx.compute({uniform(rng, 0, 1500), uniform(rng, 0, 1500)});
    for (double x : v.values) REQUIRE(std::isfinite(x));
    REQUIRE(v[Feature::min_height] <= v[Feature::median_height]);
    REQUIRE(v[Feature::median_height] <= v[Feature::max_height]);
    REQUIRE(v[Feature::min_height] <= v[Feature::avg_height]);
    REQUIRE(v[Feature::avg_height] <= v[Feature::max_height]);
    REQUIRE(v[Feature::min_area] <= v[Feature::avg_area] + 1e-9);
    REQUIRE(v[Feature::avg_area] <= v[Feature::max_area] + 1e-9);
    REQUIRE(v[Feature::building_count] >= 0.0);
    REQUIRE(v[Feature::footprint_density] >= 0.0);
  }
}

TEST_CASE("footprint density stays within the 64-gon bound for a full tiling") {
  std::vector<BuildingFootprint> bs;
  for (int i = -32; i < 32; ++i)
    for (int j = -32; j < 32; ++j)
      bs.push_back({"t" + std::to_string(i) + "_" + std::to_string(j), rect(i * 10.0, j * 10.0, i * 10.0 + 10, j * 10.0 + 10), 5.0});
  auto city = ingest::build_city_dataset(std::move(bs), {});
  const double d = FeatureExtractor(city, {}).compute({0, 0})[Feature::footprint_density];
  CHECK(d <= 1.02);
  CHECK(d >= 0.99);
}

TEST_CASE("locality: distant buildings do not matter") {
  auto city = random_city(31, 400, 0, 1500);
  const Point c{700, 700};
  const FeatureVector before = FeatureExtractor(city, {}).compute(c);
  std::vector<BuildingFootprint> kept;
  std::size_t removed = 0;
  for (const auto& b : city.buildings) {
    const geom::Box box = geom::bounding_box(b.footprint);
    const double diameter = std::hypot(box.max_x - box.min_x, box.max_y - box.min_y);
    const double dx = std::max({box.min_x - c.x, 0.0, c.x - box.max_x});
    const double dy = std::max({box.min_y - c.y, 0.0, c.y - box.max_y});
    if (std::hypot(dx, dy) > 300.0 + diameter) {
      ++removed;
      continue;
    }
    kept.push_back(b);
  }
  REQUIRE(removed > 0);
  auto smaller = ingest::build_city_dataset(std::move(kept), {});
  CHECK(FeatureExtractor(smaller, {}).compute(c) == before);
}

TEST_CASE("permuting buildings leaves features bitwise unchanged") {
  auto city = random_city(41, 500, 40, 1200);
  auto shuffled = city;
  std::mt19937_64 rng(42);
  std::shuffle(shuffled.buildings.begin(), shuffled.buildings.end(), rng);
  std::shuffle(shuffled.roads.begin(), shuffled.roads.end(), rng);
  const FeatureExtractor a(city, {}), b(shuffled, {});
  for (int i = 0; i < 50; ++i) {
    const Point c{uniform(rng, 0, 1200), uniform(rng, 0, 1200)};
    REQUIRE(a.compute(c) == b.compute(c));
  }
}

TEST_CASE("label_points") {
  const std::vector<ingest::LabeledPolygon> labels{
      {"res", rect(0, 0, 100, 100), EnvironmentClass::RES},
      {"ulr", rect(50, 0, 150, 100), EnvironmentClass::ULR},
      {"res2", rect(0, 0, 60, 60), EnvironmentClass::RES},
  };
  std::vector<SamplePoint> pts{{{10, 10}, {}, {}}, {{75, 10}, {}, {}}, {{120, 10}, {}, {}}, {{500, 500}, {}, {}}};
  const LabelResult got = label_points(pts, labels);
  REQUIRE(got.points.size() == 3);
  CHECK(got.conflicts_dropped == 1);
  CHECK(got.points[0].label == EnvironmentClass::RES);
  CHECK(got.points[1].label == EnvironmentClass::ULR);
  CHECK_FALSE(got.points[2].label);
}

TEST_CASE("extract_training_set") {
  std::vector<BuildingFootprint> bs;
  for (int i = 0; i < 10; ++i) bs.push_back({"b" + std::to_string(i), rect(i * 30.0, 0, i * 30.0 + 10, 10), 6.0});
  bs.push_back({"far", rect(5000, 5000, 5010, 5010), 6.0});
  auto city = ingest::build_city_dataset(std::move(bs), {});

  SUBCASE("one small polygon") {
    const std::vector<ingest::LabeledPolygon> labels{{"p", rect(0, 0, 100, 100), EnvironmentClass::RES}};
    const TrainingSet ts = extract_training_set(city, labels, {});
    CHECK(ts.samples.size() <= 16);
    CHECK(ts.samples.size() > 0);
    for (const auto& s : ts.samples) CHECK(s.label == EnvironmentClass::RES);
  }

  SUBCASE("overlapping same-label polygons do not duplicate points") {
    const std::vector<ingest::LabeledPolygon> labels{{"p", rect(0, 0, 100, 100), EnvironmentClass::RES},
                                                     {"q", rect(0, 0, 100, 100), EnvironmentClass::RES}};
    CHECK(extract_training_set(city, labels, {}).samples.size() == 16);
  }

  SUBCASE("water-only polygon") {
    const std::vector<ingest::LabeledPolygon> labels{{"lake", rect(2000, 2000, 2100, 2100), EnvironmentClass::RES}};
    CHECK_THROWS_AS(extract_training_set(city, labels, {}), PipelineError);
  }
}

TEST_CASE("samples CSV layout") {
  const auto dir = testing::tmp_dir("features_csv");
  FeatureVector fv;
  fv[Feature::building_count] = 3;
  std::vector<SamplePoint> samples{{{1.5, 2.5}, fv, EnvironmentClass::UHR}};
  write_samples_csv(dir / "s.csv", samples);
  std::ifstream in(dir / "s.csv");
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  std::string expected = "x,y";
  for (auto n : kFeatureNames) expected += "," + std::string(n);
  CHECK(header == expected + ",label");
  CHECK(row.rfind("1.5,2.5,", 0) == 0);
  CHECK(row.substr(row.size() - 4) == ",UHR");
}
