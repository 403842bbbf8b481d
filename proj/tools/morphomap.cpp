// morphomap: build environment-class maps from building and road footprints.
//
// Exit codes: 0 ok, 1 usage or other failure, 2 ingest, 3 train, 4 map,
// 5 boundary, 6 pathloss.

#include <cstdio>
#include <exception>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "morpho/error.hpp"
#include "morpho/pipeline.hpp"

namespace {

using namespace morpho;
namespace fs = std::filesystem;

struct Overrides {
  std::string config;
  std::optional<std::string> buildings, roads, labels, model, out, map, params;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trees;
  std::optional<unsigned> threads;
  std::optional<double> spacing, radius;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config, "Pipeline config (JSON)");
  cmd->add_option("--buildings", o.buildings, "Buildings GeoJSON");
  cmd->add_option("--roads", o.roads, "Roads GeoJSON");
  cmd->add_option("--labels", o.labels, "Labelled polygons GeoJSON");
  cmd->add_option("--model", o.model, "Model file");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--map", o.map, "Morphology map GeoJSON");
  cmd->add_option("--params", o.params, "Path-loss coefficient table");
  cmd->add_option("--seed", o.seed, "Seed for forest and split");
  cmd->add_option("--trees", o.trees, "Number of trees");
  cmd->add_option("--threads", o.threads, "Worker cap (0 = all cores)");
  cmd->add_option("--spacing", o.spacing, "Grid spacing, m");
  cmd->add_option("--radius", o.radius, "Buffer radius, m");
}

pipeline::PipelineConfig resolve_config(const Overrides& o) {
  pipeline::PipelineConfig cfg = o.config.empty() ? pipeline::PipelineConfig{} : pipeline::load_config(o.config);
  if (o.buildings) cfg.buildings = *o.buildings;
  if (o.roads) cfg.roads = *o.roads;
  if (o.labels) cfg.labels = *o.labels;
  if (o.model) cfg.model = *o.model;
  if (o.out) cfg.output_dir = *o.out;
  if (o.map) cfg.map = fs::path(*o.map);
  if (o.params) cfg.pathloss_params = *o.params;
  if (o.seed) cfg.forest.seed = cfg.split.seed = *o.seed;
  if (o.trees) cfg.forest.n_trees = *o.trees;
  if (o.threads) cfg.threads = *o.threads;
  if (o.spacing) cfg.grid.spacing = *o.spacing;
  if (o.radius) cfg.grid.buffer_radius = *o.radius;
  pipeline::validate(cfg);
  return cfg;
}

// Ingest failures keep code 2 whichever subcommand hit them.
int run(int code, const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const IngestError& e) {
    fmt::print(stderr, "morphomap: ingest error: {}\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    fmt::print(stderr, "morphomap: error: {}\n", e.what());
    return code;
  }
}

features::Feature feature_arg(const std::string& name) {
  const auto f = features::parse_feature(name);
  if (!f) throw EvalError(fmt::format("unknown feature '{}'", name));
  return *f;
}

geom::Point point_arg(const std::vector<double>& v) { return {v.at(0), v.at(1)}; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Urban morphology maps from building and road footprints"};
  app.require_subcommand(1);

  Overrides o;
  auto* ingest = app.add_subcommand("ingest", "Validate inputs and write a normalized dataset bundle");
  auto* train = app.add_subcommand("train", "Extract features, train the forest and report holdout metrics");
  auto* map = app.add_subcommand("map", "Classify the city grid and write GeoJSON and SVG");
  auto* boundary = app.add_subcommand("boundary", "Two-feature decision-boundary plot");
  auto* pl = app.add_subcommand("pathloss", "Median path loss for one link over the map");
  auto* synth = app.add_subcommand("synth", "Write the synthetic three-district fixture");
  auto* eval = app.add_subcommand("eval", "Metrics from a predictions CSV");
  for (auto* cmd : {ingest, train, map, boundary, pl}) add_common(cmd, o);

  std::string fx = "avg_height", fy = "building_count";
  std::optional<int> resolution;
  boundary->add_option("--fx", fx, "Feature on the x axis");
  boundary->add_option("--fy", fy, "Feature on the y axis");
  boundary->add_option("--resolution", resolution, "Cells per axis");

  std::vector<double> tx, rx;
  double frequency = 1.0;
  std::string situation = "LoS";
  pl->add_option("--tx", tx, "Transmitter x y (m)")->expected(2)->required();
  pl->add_option("--rx", rx, "Receiver x y (m)")->expected(2)->required();
  pl->add_option("-f,--frequency", frequency, "Frequency, GHz");
  pl->add_option("--situation", situation, "LoS or NLoS");

  std::string synth_dir = "synth";
  std::uint64_t synth_seed = 42;
  synth->add_option("dir", synth_dir, "Output directory");
  synth->add_option("--seed", synth_seed, "Generator seed");

  std::string predictions;
  bool as_json = false;
  eval->add_option("predictions", predictions, "CSV with actual,predicted columns")->required();
  eval->add_flag("--json", as_json, "Print JSON instead of a table");

  CLI11_PARSE(app, argc, argv);

  if (*ingest)
    return run(2, [&] {
      const auto s = pipeline::cmd_ingest(resolve_config(o));
      fmt::print("buildings_kept {}\nbuildings_skipped {}\nroads_kept {}\nroads_dropped_by_class {}\n"
                 "roads_skipped {}\nbundle {}\n",
                 s.buildings_kept, s.buildings_skipped, s.roads_kept, s.roads_dropped_by_class, s.roads_skipped,
                 s.bundle.string());
    });
  if (*train)
    return run(3, [&] {
      const auto s = pipeline::cmd_train(resolve_config(o));
      fmt::print("{}", evalx::metrics_table(s.confusion, s.metrics));
      for (const auto& [name, v] : s.importances) fmt::print("{:<18}{:.4f}\n", name, v);
      fmt::print("model_sha256 {}\n", s.model_sha256);
    });
  if (*map)
    return run(4, [&] {
      const auto s = pipeline::cmd_map(resolve_config(o));
      fmt::print("RES {}\nULR {}\nUHR {}\nOPEN {}\n", s.counts[0], s.counts[1], s.counts[2], s.counts[3]);
    });
  if (*boundary)
    return run(5, [&] {
      auto cfg = resolve_config(o);
      if (resolution) {
        if (*resolution < 2) throw EvalError("--resolution must be >= 2");
        cfg.boundary_resolution = static_cast<std::size_t>(*resolution);
      }
      const auto s = pipeline::cmd_boundary(cfg, feature_arg(fx), feature_arg(fy));
      fmt::print("{}\n{}\n", s.csv.string(), s.svg.string());
    });
  if (*pl)
    return run(6, [&] {
      const auto sit = pathloss::parse_situation(situation);
      if (!sit) throw PathLossError(fmt::format("unknown situation '{}'", situation));
      const auto r = pipeline::cmd_pathloss(resolve_config(o), point_arg(tx), point_arg(rx), frequency, *sit);
      const nlohmann::json j = {{"env_tx", to_string(r.env_tx)},
                                {"env_rx", to_string(r.env_rx)},
                                {"env_used", to_string(r.env_used)},
                                {"loss_db", r.loss_db}};
      fmt::print("{}\n", j.dump());
    });
  if (*synth)
    return run(1, [&] { fmt::print("{}\n", pipeline::cmd_synth(synth_dir, synth_seed).string()); });
  if (*eval)
    return run(1, [&] {
      const auto [cm, m] = pipeline::cmd_eval(predictions);
      fmt::print("{}", as_json ? evalx::metrics_json(cm, m) + "\n" : evalx::metrics_table(cm, m));
    });
  return 1;
}
