#include "morpho/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "morpho/error.hpp"
#include "morpho/mapgen.hpp"
#include "morpho/parallel.hpp"
#include "morpho/synthcity.hpp"

namespace morpho::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

template <class... Args>
void log(fmt::format_string<Args...> f, Args&&... args) {
  fmt::print(stderr, "morphomap: {}\n", fmt::format(f, std::forward<Args>(args)...));
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PipelineError(fmt::format("{}: cannot open", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PipelineError(fmt::format("{}: cannot write", path.string()));
  out << text;
}

void ensure_dir(const fs::path& dir) {
  if (!dir.empty()) fs::create_directories(dir);
}

void apply_threads(const PipelineConfig& cfg) { set_thread_count(cfg.threads); }

}  // namespace

PipelineConfig parse_config(const std::string& json_text, const fs::path& base_dir) {
  PipelineConfig cfg;
  try {
    const json doc = json::parse(json_text);
    auto path_of = [&](const char* key, fs::path& dst) {
      if (doc.contains(key)) dst = resolve(base_dir, doc.at(key).get<std::string>());
    };
    path_of("buildings", cfg.buildings);
    path_of("roads", cfg.roads);
    path_of("labels", cfg.labels);
    path_of("pathloss_params", cfg.pathloss_params);
    cfg.model = resolve(base_dir, doc.value("model", cfg.model.string()));
    cfg.output_dir = resolve(base_dir, doc.value("output_dir", cfg.output_dir.string()));
    if (doc.contains("map")) cfg.map = resolve(base_dir, doc.at("map").get<std::string>());
    if (doc.contains("grid")) {
      const json& g = doc.at("grid");
      cfg.grid.spacing = g.value("spacing", cfg.grid.spacing);
      cfg.grid.buffer_radius = g.value("buffer_radius", cfg.grid.buffer_radius);
      cfg.grid.min_buildings = g.value("min_buildings", cfg.grid.min_buildings);
    }
    if (doc.contains("forest")) {
      const json& f = doc.at("forest");
      cfg.forest.n_trees = f.value("n_trees", cfg.forest.n_trees);
      if (f.contains("max_depth") && !f.at("max_depth").is_null())
        cfg.forest.max_depth = f.at("max_depth").get<std::size_t>();
      cfg.forest.min_samples_split = f.value("min_samples_split", cfg.forest.min_samples_split);
      cfg.forest.features_per_split = f.value("features_per_split", cfg.forest.features_per_split);
      cfg.forest.bootstrap = f.value("bootstrap", cfg.forest.bootstrap);
      cfg.forest.seed = f.value("seed", cfg.forest.seed);
    }
    if (doc.contains("split")) {
      const json& s = doc.at("split");
      cfg.split.train_fraction = s.value("train_fraction", cfg.split.train_fraction);
      cfg.split.seed = s.value("seed", cfg.split.seed);
      cfg.split.stratified = s.value("stratified", cfg.split.stratified);
    }
    if (doc.contains("projection")) {
      const json& p = doc.at("projection");
      if (p.contains("origin")) {
        const json& o = p.at("origin");
        if (o.is_string()) {
          if (o.get<std::string>() != "auto") throw PipelineError("projection.origin must be \"auto\" or [lon, lat]");
        } else {
          if (!o.is_array() || o.size() != 2) throw PipelineError("projection.origin must be \"auto\" or [lon, lat]");
          cfg.projection.origin = ingest::LonLat{o[0].get<double>(), o[1].get<double>()};
        }
      }
      cfg.projection.height_key = p.value("height_key", cfg.projection.height_key);
    }
    if (doc.contains("palette")) {
      const json& p = doc.at("palette");
      cfg.palette.res = p.value("RES", cfg.palette.res);
      cfg.palette.ulr = p.value("ULR", cfg.palette.ulr);
      cfg.palette.uhr = p.value("UHR", cfg.palette.uhr);
      cfg.palette.open = p.value("OPEN", cfg.palette.open);
    }
    cfg.threads = doc.value("threads", cfg.threads);
    cfg.boundary_resolution = doc.value("boundary_resolution", cfg.boundary_resolution);
  } catch (const json::exception& e) {
    throw PipelineError(fmt::format("invalid config: {}", e.what()));
  }
  validate(cfg);
  return cfg;
}

PipelineConfig load_config(const fs::path& path) { return parse_config(read_text(path), path.parent_path()); }

std::string config_to_json(const PipelineConfig& cfg) {
  const auto& f = cfg.forest;
  json doc = {
      {"buildings", cfg.buildings.generic_string()},
      {"roads", cfg.roads.generic_string()},
      {"labels", cfg.labels.generic_string()},
      {"model", cfg.model.generic_string()},
      {"output_dir", cfg.output_dir.generic_string()},
      {"pathloss_params", cfg.pathloss_params.generic_string()},
      {"grid",
       {{"spacing", cfg.grid.spacing}, {"buffer_radius", cfg.grid.buffer_radius},
        {"min_buildings", cfg.grid.min_buildings}}},
      {"forest",
       {{"n_trees", f.n_trees},
        {"max_depth", f.max_depth ? json(*f.max_depth) : json(nullptr)},
        {"min_samples_split", f.min_samples_split},
        {"features_per_split", f.features_per_split},
        {"bootstrap", f.bootstrap},
        {"seed", f.seed}}},
      {"split",
       {{"train_fraction", cfg.split.train_fraction}, {"seed", cfg.split.seed}, {"stratified", cfg.split.stratified}}},
      {"projection",
       {{"origin", cfg.projection.origin ? json::array({cfg.projection.origin->lon, cfg.projection.origin->lat})
                                         : json("auto")},
        {"height_key", cfg.projection.height_key}}},
      {"palette",
       {{"RES", cfg.palette.res}, {"ULR", cfg.palette.ulr}, {"UHR", cfg.palette.uhr}, {"OPEN", cfg.palette.open}}},
      {"threads", cfg.threads},
      {"boundary_resolution", cfg.boundary_resolution},
  };
  if (cfg.map) doc["map"] = cfg.map->generic_string();
  return doc.dump(2) + "\n";
}

void validate(const PipelineConfig& cfg) {
  const auto& g = cfg.grid;
  if (!(g.spacing > 0.0)) throw PipelineError("grid.spacing must be > 0");
  if (!(g.buffer_radius > 0.0)) throw PipelineError("grid.buffer_radius must be > 0");
  if (cfg.forest.n_trees == 0) throw PipelineError("forest.n_trees must be >= 1");
  if (cfg.forest.min_samples_split < 2) throw PipelineError("forest.min_samples_split must be >= 2");
  if (cfg.forest.features_per_split == 0 || cfg.forest.features_per_split > features::kFeatureCount)
    throw PipelineError(fmt::format("forest.features_per_split must lie in [1, {}]", features::kFeatureCount));
  if (!(cfg.split.train_fraction > 0.0 && cfg.split.train_fraction < 1.0))
    throw PipelineError("split.train_fraction must lie in (0, 1)");
  if (cfg.boundary_resolution < 2) throw PipelineError("boundary_resolution must be >= 2");
}

LoadedCity load_city(const PipelineConfig& cfg) {
  if (cfg.buildings.empty()) throw IngestError("config names no buildings file");
  if (cfg.roads.empty()) throw IngestError("config names no roads file");
  LoadedCity out;
  out.projection = ingest::resolve_projection(cfg.projection, cfg.buildings);
  auto buildings = ingest::load_buildings(cfg.buildings, out.projection);
  auto roads = ingest::load_roads(cfg.roads, out.projection);
  out.building_stats = std::move(buildings.stats);
  out.road_stats = std::move(roads.stats);
  out.city = ingest::build_city_dataset(std::move(buildings.items), std::move(roads.items), out.projection.origin);
  return out;
}

std::vector<ingest::LabeledPolygon> load_labels(const PipelineConfig& cfg, const ingest::Projection& proj) {
  if (cfg.labels.empty()) throw IngestError("config names no labels file");
  return ingest::load_labeled_polygons(cfg.labels, proj).items;
}

IngestSummary cmd_ingest(const PipelineConfig& cfg) {
  apply_threads(cfg);
  LoadedCity lc = load_city(cfg);
  IngestSummary s;
  s.buildings_kept = lc.building_stats.kept;
  s.buildings_skipped = lc.building_stats.skipped;
  s.roads_kept = lc.road_stats.kept;
  s.roads_dropped_by_class = lc.road_stats.dropped_by_class;
  s.roads_skipped = lc.road_stats.skipped;
  s.warnings = lc.building_stats.warnings;
  s.warnings.insert(s.warnings.end(), lc.road_stats.warnings.begin(), lc.road_stats.warnings.end());
  for (const auto& w : s.warnings) log("warning: {}", w);
  ensure_dir(cfg.output_dir);
  s.bundle = cfg.output_dir / "dataset.json";
  ingest::write_dataset_bundle(s.bundle, lc.city);
  log("buildings kept {} skipped {}; roads kept {} dropped-by-class {} skipped {}", s.buildings_kept,
      s.buildings_skipped, s.roads_kept, s.roads_dropped_by_class, s.roads_skipped);
  return s;
}

TrainSummary cmd_train(const PipelineConfig& cfg) {
  apply_threads(cfg);
  LoadedCity lc = load_city(cfg);
  const auto labels = load_labels(cfg, lc.projection);
  const features::TrainingSet ts = features::extract_training_set(lc.city, labels, cfg.grid);
  log("{} labelled samples ({} conflicting dropped, {} below min_buildings)", ts.samples.size(), ts.conflicts_dropped,
      ts.below_min_buildings);

  const evalx::Split sp = evalx::split(ts.samples, cfg.split.train_fraction, cfg.split.seed, cfg.split.stratified);
  if (sp.train.empty() || sp.test.empty()) throw PipelineError("split left an empty train or test set");
  const forest::ForestModel holdout_model = forest::train(sp.train, cfg.forest);

  std::vector<EnvironmentClass> actual, predicted;
  for (const auto& s : sp.test) {
    actual.push_back(*s.label);
    predicted.push_back(forest::predict(holdout_model, s.features));
  }
  TrainSummary out;
  out.samples = ts.samples.size();
  out.train_samples = sp.train.size();
  out.test_samples = sp.test.size();
  out.confusion = evalx::confusion(actual, predicted);
  out.metrics = evalx::metrics(out.confusion);
  log("holdout accuracy {:.4f} on {} samples", out.metrics.accuracy, out.test_samples);

  const forest::ForestModel model = forest::train(ts.samples, cfg.forest);
  forest::save_model(model, cfg.model);
  out.model_sha256 = mapgen::file_sha256(cfg.model);

  for (std::size_t f = 0; f < model.importances.size(); ++f)
    out.importances.emplace_back(model.feature_names[f], model.importances[f]);
  std::stable_sort(out.importances.begin(), out.importances.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  ensure_dir(cfg.output_dir);
  {
    std::string csv = "actual,predicted\n";
    for (std::size_t i = 0; i < actual.size(); ++i)
      csv += fmt::format("{},{}\n", to_string(actual[i]), to_string(predicted[i]));
    write_text(cfg.output_dir / "holdout_predictions.csv", csv);
  }
  features::write_samples_csv(cfg.output_dir / "samples.csv", ts.samples);

  json importances = json::array();
  for (const auto& [name, v] : out.importances) importances.push_back({{"feature", name}, {"importance", v}});
  json per_class = json::object();
  for (EnvironmentClass c : kTrainable)
    per_class[std::string(to_string(c))] =
        std::count_if(ts.samples.begin(), ts.samples.end(), [c](const auto& s) { return *s.label == c; });
  const json report = {
      {"samples",
       {{"total", out.samples},
        {"train", out.train_samples},
        {"test", out.test_samples},
        {"per_class", per_class},
        {"conflicts_dropped", ts.conflicts_dropped},
        {"below_min_buildings", ts.below_min_buildings}}},
      {"holdout", json::parse(evalx::metrics_json(out.confusion, out.metrics))},
      {"importances", importances},
      {"model", {{"path", cfg.model.filename().generic_string()}, {"sha256", out.model_sha256}}},
  };
  out.report = cfg.output_dir / "train_report.json";
  write_text(out.report, report.dump(2) + "\n");
  return out;
}

MapSummary cmd_map(const PipelineConfig& cfg) {
  apply_threads(cfg);
  if (!fs::exists(cfg.model)) throw MapError(fmt::format("{}: model file not found", cfg.model.string()));
  const forest::ForestModel model = forest::load_model(cfg.model);
  LoadedCity lc = load_city(cfg);
  const mapgen::MorphologyMap map =
      mapgen::classify_city(lc.city, model, cfg.grid, mapgen::file_sha256(cfg.model));
  MapSummary out;
  out.counts = mapgen::class_counts(map);
  out.geojson = cfg.map_path();
  out.svg = fs::path(out.geojson).replace_extension(".svg");
  ensure_dir(out.geojson.parent_path());
  mapgen::emit_geojson(map, out.geojson);
  mapgen::emit_svg(map, out.svg, cfg.palette);
  log("cells RES {} ULR {} UHR {} OPEN {}", out.counts[0], out.counts[1], out.counts[2], out.counts[3]);
  return out;
}

BoundarySummary cmd_boundary(const PipelineConfig& cfg, features::Feature fx, features::Feature fy) {
  apply_threads(cfg);
  if (fx == fy) throw EvalError("boundary features must differ");
  LoadedCity lc = load_city(cfg);
  const auto labels = load_labels(cfg, lc.projection);
  const features::TrainingSet ts = features::extract_training_set(lc.city, labels, cfg.grid);
  std::optional<forest::ForestModel> full;
  if (fs::exists(cfg.model)) full = forest::load_model(cfg.model);
  const evalx::BoundaryGrid grid =
      evalx::decision_boundary(ts.samples, fx, fy, cfg.forest, full ? &*full : nullptr, cfg.boundary_resolution);
  BoundarySummary out;
  for (EnvironmentClass c : grid.cell_class) ++out.cell_counts[index_of(c)];
  ensure_dir(cfg.output_dir);
  const std::string stem = fmt::format("boundary_{}_{}", features::kFeatureNames[static_cast<std::size_t>(fx)],
                                       features::kFeatureNames[static_cast<std::size_t>(fy)]);
  out.csv = cfg.output_dir / (stem + ".csv");
  out.svg = cfg.output_dir / (stem + ".svg");
  evalx::write_boundary_csv(out.csv, grid);
  evalx::write_boundary_svg(out.svg, grid);
  log("boundary cells RES {} ULR {} UHR {}", out.cell_counts[0], out.cell_counts[1], out.cell_counts[2]);
  return out;
}

pathloss::LinkResult cmd_pathloss(const PipelineConfig& cfg, geom::Point tx, geom::Point rx, double frequency,
                                  pathloss::Situation situation) {
  if (cfg.pathloss_params.empty()) throw PathLossError("config names no pathloss_params file");
  const pathloss::PathLossParams params = pathloss::load_params(cfg.pathloss_params);
  mapgen::MorphologyMap map;
  try {
    map = mapgen::read_geojson(cfg.map_path());
  } catch (const MapError& e) {
    throw PathLossError(e.what());
  }
  return pathloss::link_loss(map, params, {tx, rx, frequency, situation});
}

std::string placeholder_pathloss_json() {
  // Arbitrary round numbers so tests have a table to read. Not measured,
  // not transcribed from any recommendation; replace before real use.
  const json coeffs = {
      {"RES", {{"LoS", {{"alpha", 2.0}, {"beta", 30.0}, {"gamma", 2.0}, {"sigma", 4.0}}},
               {"NLoS", {{"alpha", 3.0}, {"beta", 25.0}, {"gamma", 2.0}, {"sigma", 6.0}}}}},
      {"ULR", {{"LoS", {{"alpha", 2.1}, {"beta", 31.0}, {"gamma", 2.0}, {"sigma", 4.0}}},
               {"NLoS", {{"alpha", 3.2}, {"beta", 24.0}, {"gamma", 2.0}, {"sigma", 6.0}}}}},
      {"UHR", {{"LoS", {{"alpha", 2.2}, {"beta", 32.0}, {"gamma", 2.0}, {"sigma", 5.0}}},
               {"NLoS", {{"alpha", 3.5}, {"beta", 22.0}, {"gamma", 2.0}, {"sigma", 7.0}}}}},
  };
  const json doc = {
      {"note", "PLACEHOLDER coefficients for testing only. Replace with values transcribed from the applicable "
               "site-general path-loss tables."},
      {"envs", coeffs},
      {"d_range", {1.0, 1000.0}},
      {"f_range", {0.3, 100.0}},
  };
  return doc.dump(2) + "\n";
}

fs::path cmd_synth(const fs::path& dir, std::uint64_t seed) {
  fs::create_directories(dir);
  const features::GridConfig grid;
  const synthcity::TriCity tri = synthcity::generate_tricity(seed, grid);
  synthcity::write_fixture(dir, tri);
  write_text(dir / "pathloss_placeholder.json", placeholder_pathloss_json());

  PipelineConfig cfg;
  cfg.buildings = "buildings.geojson";
  cfg.roads = "roads.geojson";
  cfg.labels = "labels.geojson";
  cfg.model = "out/model.json";
  cfg.output_dir = "out";
  cfg.pathloss_params = "pathloss_placeholder.json";
  cfg.projection.origin = tri.city.origin;
  cfg.forest.seed = seed;
  cfg.split.seed = seed;
  const fs::path config_path = dir / "config.json";
  write_text(config_path, config_to_json(cfg));
  log("wrote {} buildings, {} roads, {} labelled districts to {}", tri.city.buildings.size(), tri.city.roads.size(),
      tri.labels.size(), dir.string());
  return config_path;
}

std::pair<evalx::ConfusionMatrix, evalx::ClassMetrics> cmd_eval(const fs::path& predictions) {
  std::ifstream in(predictions);
  if (!in) throw EvalError(fmt::format("{}: cannot open", predictions.string()));
  std::string line;
  if (!std::getline(in, line)) throw EvalError(fmt::format("{}: empty file", predictions.string()));
  std::vector<EnvironmentClass> actual, predicted;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    const auto a = parse_environment(line.substr(0, comma));
    const auto p = comma == std::string::npos ? std::nullopt : parse_environment(line.substr(comma + 1));
    if (!a || !p) throw EvalError(fmt::format("{}:{}: expected actual,predicted labels", predictions.string(), lineno));
    actual.push_back(*a);
    predicted.push_back(*p);
  }
  evalx::ConfusionMatrix cm = evalx::confusion(actual, predicted);
  return {cm, evalx::metrics(cm)};
}

}  // namespace morpho::pipeline
