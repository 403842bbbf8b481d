#pragma once

// Subcommand implementations shared by the morphomap CLI and the acceptance
// suite. Each returns a summary; failures surface as the module exceptions.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "morpho/environment.hpp"
#include "morpho/evalx.hpp"
#include "morpho/features.hpp"
#include "morpho/forest.hpp"
#include "morpho/ingest.hpp"
#include "morpho/pathloss.hpp"

namespace morpho::pipeline {

struct SplitConfig {
  double train_fraction = 0.7;
  std::uint64_t seed = 42;
  bool stratified = true;
};

struct PipelineConfig {
  std::filesystem::path buildings;
  std::filesystem::path roads;
  std::filesystem::path labels;
  std::filesystem::path model = "out/model.json";
  std::filesystem::path output_dir = "out";
  std::optional<std::filesystem::path> map;  // defaults to output_dir/morphology.geojson
  std::filesystem::path pathloss_params;
  features::GridConfig grid;
  forest::ForestConfig forest;
  SplitConfig split;
  ingest::ProjectionSpec projection;
  Palette palette;
  unsigned threads = 0;
  std::size_t boundary_resolution = 200;

  std::filesystem::path map_path() const { return map ? *map : output_dir / "morphology.geojson"; }
};

/// Relative paths in the file resolve against the config file's directory.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir = {});
std::string config_to_json(const PipelineConfig& cfg);

/// Throws PipelineError naming the first out-of-range field.
void validate(const PipelineConfig& cfg);

struct LoadedCity {
  ingest::Projection projection;
  ingest::CityDataset city;
  ingest::LoadStats building_stats;
  ingest::LoadStats road_stats;
};

LoadedCity load_city(const PipelineConfig& cfg);
std::vector<ingest::LabeledPolygon> load_labels(const PipelineConfig& cfg, const ingest::Projection& proj);

struct IngestSummary {
  std::size_t buildings_kept = 0;
  std::size_t buildings_skipped = 0;
  std::size_t roads_kept = 0;
  std::size_t roads_dropped_by_class = 0;
  std::size_t roads_skipped = 0;
  std::vector<std::string> warnings;
  std::filesystem::path bundle;
};

IngestSummary cmd_ingest(const PipelineConfig& cfg);

struct TrainSummary {
  std::size_t samples = 0;
  std::size_t train_samples = 0;
  std::size_t test_samples = 0;
  evalx::ConfusionMatrix confusion;
  evalx::ClassMetrics metrics;
  std::vector<std::pair<std::string, double>> importances;  // sorted descending
  std::string model_sha256;
  std::filesystem::path report;
};

/// Holdout metrics come from a forest trained on the training split; the
/// saved model is then trained on every labelled sample.
TrainSummary cmd_train(const PipelineConfig& cfg);

struct MapSummary {
  std::array<std::size_t, 4> counts{};
  std::filesystem::path geojson;
  std::filesystem::path svg;
};

MapSummary cmd_map(const PipelineConfig& cfg);

struct BoundarySummary {
  std::filesystem::path csv;
  std::filesystem::path svg;
  std::array<std::size_t, 3> cell_counts{};
};

BoundarySummary cmd_boundary(const PipelineConfig& cfg, features::Feature fx, features::Feature fy);

/// Endpoints in projected metres of the map's local frame.
pathloss::LinkResult cmd_pathloss(const PipelineConfig& cfg, geom::Point tx, geom::Point rx, double frequency,
                                  pathloss::Situation situation);

/// Writes the tricity fixture, a placeholder path-loss table and a ready
/// config.json into `dir`; returns the config path.
std::filesystem::path cmd_synth(const std::filesystem::path& dir, std::uint64_t seed);

/// Metrics from a CSV of actual,predicted labels (header required).
std::pair<evalx::ConfusionMatrix, evalx::ClassMetrics> cmd_eval(const std::filesystem::path& predictions);

/// The placeholder coefficient table shipped for testing.
std::string placeholder_pathloss_json();

}  // namespace morpho::pipeline
