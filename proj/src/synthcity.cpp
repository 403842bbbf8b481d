#include "morpho/synthcity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "morpho/error.hpp"
#include "morpho/forest.hpp"
#include "morpho/normal.hpp"

namespace morpho::synthcity {

using geom::Point;
using ingest::RoadClass;

namespace {

constexpr double kMaxDensity = 0.6;
constexpr double kSizeSigma = 0.3;         // log-sd of footprint side
constexpr double kHeightClustering = 0.6;  // share of rank variance common to a street block
constexpr double kSizeClustering = 0.6;
constexpr double kStreetBlock = 120;  // target street spacing, m
constexpr std::size_t kArterialEvery = 4;

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Side a such that a disk of radius r meets `count` lattice squares of
// density `rho`: the Minkowski sum of disk and square has area
// pi r^2 + 4 a r + a^2, so count = rho (pi r^2 + 4 a r + a^2) / a^2.
double footprint_side(double count, double rho, double r) {
  const double qa = count - rho, qb = -4.0 * rho * r, qc = -rho * std::numbers::pi * r * r;
  return (-qb + std::sqrt(qb * qb - 4.0 * qa * qc)) / (2.0 * qa);
}

// Splits a target mean into the two neighbouring multiples of `step` and
// picks one with matching probability.
double dither(std::mt19937_64& rng, double target, double step) {
  const double lo = std::floor(target / step) * step;
  return unit(rng) < (target - lo) / step ? lo + step : lo;
}

// n quantiles of a log-normal with the given mean and log-sd, clamped.
std::vector<double> stratified_lognormal(std::size_t n, double mean, double sigma_ln, double lo, double hi) {
  const double mu = std::log(mean) - 0.5 * sigma_ln * sigma_ln;
  std::vector<double> v(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double u = (static_cast<double>(k) + 0.5) / static_cast<double>(n);
    v[k] = std::clamp(std::exp(mu + sigma_ln * normal_quantile(u)), lo, hi);
  }
  return v;
}

// Side multipliers with log-normal spread, capped at `cap` and rescaled so
// the mean squared multiplier (mean footprint area) stays 1.
std::vector<double> side_factors(std::size_t n, double sigma_ln, double cap) {
  std::vector<double> f = stratified_lognormal(n, 1.0, sigma_ln, 0.0, std::numeric_limits<double>::max());
  for (int pass = 0; pass < 8; ++pass) {
    double ms = 0.0;
    for (double& x : f) {
      x = std::min(x, 0.98 * cap);
      ms += x * x;
    }
    const double scale = 1.0 / std::sqrt(ms / static_cast<double>(n));
    for (double& x : f) x *= scale;
  }
  for (double& x : f) x = std::min(x, 0.98 * cap);
  return f;
}

// Assigns sorted `values` to slots ordered by a key whose share `c` of
// variance is common to the slot's block.
template <class BlockOf>
std::vector<double> clustered(std::mt19937_64& rng, std::vector<double> values, double c, std::size_t n_blocks,
                              BlockOf block_of) {
  const std::size_t n = values.size();
  std::vector<double> zb(n_blocks);
  for (double& z : zb) z = normal_quantile(std::clamp(unit(rng), 1e-12, 1.0 - 1e-12));
  std::vector<double> key(n);
  for (std::size_t k = 0; k < n; ++k)
    key[k] = std::sqrt(c) * zb[block_of(k)] +
             std::sqrt(1.0 - c) * normal_quantile(std::clamp(unit(rng), 1e-12, 1.0 - 1e-12));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return key[a] < key[b] || (key[a] == key[b] && a < b); });
  std::sort(values.begin(), values.end());
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[order[k]] = values[k];
  return out;
}

RoadClass class_for_speed(double speed) {
  if (speed >= 60.0) return RoadClass::secondary;
  if (speed >= 50.0) return RoadClass::tertiary;
  return RoadClass::residential;
}

}  // namespace

ClassProfile default_profile(EnvironmentClass c) {
  switch (c) {
    case EnvironmentClass::RES: return {6.45, 1.81, 192.91, 205.67, 0.13, 1.99, 39.96};
    case EnvironmentClass::ULR: return {6.94, 2.95, 5485.19, 19.22, 0.23, 2.26, 48.89};
    case EnvironmentClass::UHR: return {20.25, 15.76, 2327.38, 49.4, 0.38, 1.84, 34.18};
    case EnvironmentClass::OPEN: break;
  }
  throw GeneratorError("OPEN has no building profile");
}

District generate_district(const ClassProfile& profile, EnvironmentClass cls, double extent, std::uint64_t seed,
                           Point corner, const features::GridConfig& cfg) {
  const double r = cfg.buffer_radius;
  if (cls == EnvironmentClass::OPEN) throw GeneratorError("cannot generate an OPEN district");
  if (!(profile.count > 0.0) || !(profile.density > 0.0)) throw GeneratorError("profile has no buildings");
  if (!(profile.mean_height > 0.0) || profile.std_height < 0.0) throw GeneratorError("invalid height targets");
  if (profile.density > kMaxDensity)
    throw GeneratorError(fmt::format("density {} exceeds the packing bound {}", profile.density, kMaxDensity));
  if (profile.count <= profile.density) throw GeneratorError("building count too small for the density target");
  if (extent < 2.0 * r + cfg.spacing)
    throw GeneratorError(fmt::format("extent {} m is below 2 * buffer_radius + spacing", extent));

  std::mt19937_64 rng = forest::tree_rng(seed, 1 + index_of(cls));
  const double side = footprint_side(profile.count, profile.density, r);
  const double pitch = side / std::sqrt(profile.density);
  const auto cells = static_cast<std::size_t>(std::floor(extent / pitch));
  if (cells == 0) throw GeneratorError("district smaller than one building lattice cell");

  District d;
  const std::string tag(to_string(cls));
  const std::size_t n = cells * cells;
  const auto block = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(kStreetBlock / pitch)));
  const std::size_t blocks_per_row = (cells + block - 1) / block;
  auto block_of = [&](std::size_t slot) { return (slot / cells / block) * blocks_per_row + slot % cells / block; };

  // Stratified log-normal heights and side factors, assigned to lattice slots
  // through a ranking key shared partly within each street block so that
  // similar buildings cluster.
  const double cv2 = (profile.std_height / profile.mean_height) * (profile.std_height / profile.mean_height);
  const std::vector<double> heights =
      clustered(rng, stratified_lognormal(n, profile.mean_height, std::sqrt(std::log1p(cv2)), 0.5, 999.0),
                kHeightClustering, blocks_per_row * blocks_per_row, block_of);
  const std::vector<double> sides =
      clustered(rng, side_factors(n, kSizeSigma, pitch / side), kSizeClustering, blocks_per_row * blocks_per_row,
                block_of);

  const double margin = 0.5 * (extent - static_cast<double>(cells) * pitch);
  for (std::size_t j = 0; j < cells; ++j)
    for (std::size_t i = 0; i < cells; ++i) {
      const std::size_t slot = j * cells + i;
      const double s = side * sides[slot];
      // Each footprint stays inside its own lattice cell, so none overlap.
      const double jitter = 0.9 * std::max(0.0, pitch - s);
      const double cx = corner.x + margin + (static_cast<double>(i) + 0.5) * pitch + 0.5 * jitter * (2.0 * unit(rng) - 1.0);
      const double cy = corner.y + margin + (static_cast<double>(j) + 0.5) * pitch + 0.5 * jitter * (2.0 * unit(rng) - 1.0);
      const double h = 0.5 * s;
      geom::Polygon fp{{{cx - h, cy - h}, {cx + h, cy - h}, {cx + h, cy + h}, {cx - h, cy + h}, {cx - h, cy - h}}, {}};
      d.buildings.push_back({fmt::format("{}-{:06d}", tag, slot), std::move(fp), heights[slot]});
    }

  // Street grid on lattice lines, cut into block-length segments. Every
  // kArterialEvery-th line is an arterial; local streets take whatever keeps
  // the length-weighted means on target.
  const double step = static_cast<double>(block) * pitch;
  std::vector<double> lines;
  for (double t = 0.0; t <= extent + 1e-9; t += step) lines.push_back(t);
  const std::size_t offset = forest::uniform_index(rng, kArterialEvery);
  std::size_t n_arterial = 0;
  for (std::size_t k = 0; k < lines.size(); ++k) n_arterial += k % kArterialEvery == offset;
  const double f = static_cast<double>(n_arterial) / static_cast<double>(lines.size());
  const double art_speed = 10.0 * std::ceil((profile.speed + 15.0) / 10.0);
  const double art_lanes = std::ceil(profile.lanes) + 1.0;
  const double local_speed = std::max(10.0, (profile.speed - f * art_speed) / (1.0 - f));
  const double local_lanes = std::max(1.0, (profile.lanes - f * art_lanes) / (1.0 - f));

  std::size_t road_id = 0;
  auto add_road = [&](Point a, Point b, bool arterial) {
    const double speed = arterial ? art_speed : dither(rng, local_speed, 10.0);
    const int lanes = arterial ? static_cast<int>(art_lanes) : static_cast<int>(dither(rng, local_lanes, 1.0));
    d.roads.push_back({fmt::format("{}-r{:05d}", tag, road_id++), geom::Polyline{{a, b}}, class_for_speed(speed),
                       std::max(1, lanes), speed, std::nullopt});
  };
  for (std::size_t line = 0; line < lines.size(); ++line) {
    const double u = lines[line];
    const bool arterial = line % kArterialEvery == offset;
    for (std::size_t k = 0; k + 1 < lines.size(); ++k) {
      add_road({corner.x + lines[k], corner.y + u}, {corner.x + lines[k + 1], corner.y + u}, arterial);
      add_road({corner.x + u, corner.y + lines[k]}, {corner.x + u, corner.y + lines[k + 1]}, arterial);
    }
  }

  // Only points whose whole buffer lies in the district are labelled.
  const Point lo{corner.x + r, corner.y + r}, hi{corner.x + extent - r, corner.y + extent - r};
  d.label = {tag, geom::Polygon{{lo, {hi.x, lo.y}, hi, {lo.x, hi.y}, lo}, {}}, cls};
  return d;
}

double tricity_extent(EnvironmentClass c) {
  switch (c) {
    case EnvironmentClass::RES: return 1320.0;
    case EnvironmentClass::ULR: return 1440.0;
    case EnvironmentClass::UHR: return 1320.0;
    case EnvironmentClass::OPEN: break;
  }
  return 0.0;
}

TriCity generate_tricity(std::uint64_t seed, const features::GridConfig& cfg, ingest::LonLat origin) {
  const double gap = 2.0 * cfg.buffer_radius + 300.0;
  std::vector<ingest::BuildingFootprint> buildings;
  std::vector<ingest::RoadSegment> roads;
  TriCity tri;
  double x = 0.0;
  for (EnvironmentClass c : kTrainable) {
    District d = generate_district(default_profile(c), c, tricity_extent(c), seed, {x, 0.0}, cfg);
    buildings.insert(buildings.end(), d.buildings.begin(), d.buildings.end());
    roads.insert(roads.end(), d.roads.begin(), d.roads.end());
    tri.labels.push_back(std::move(d.label));
    x += tricity_extent(c) + gap;
  }
  tri.city = ingest::build_city_dataset(std::move(buildings), std::move(roads), origin);
  return tri;
}

void write_fixture(const std::filesystem::path& dir, const TriCity& tri) {
  const ingest::Projection proj{tri.city.origin};
  ingest::write_buildings_geojson(dir / "buildings.geojson", tri.city.buildings, proj);
  ingest::write_roads_geojson(dir / "roads.geojson", tri.city.roads, proj);
  ingest::write_labels_geojson(dir / "labels.geojson", tri.labels, proj);
}

}  // namespace morpho::synthcity
