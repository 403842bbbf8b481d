#include "morpho/evalx.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <fmt/format.h>
#include <json.hpp>

#include "morpho/error.hpp"
#include "morpho/parallel.hpp"

namespace morpho::evalx {

using features::Feature;
using features::SamplePoint;
using json = nlohmann::json;

namespace {

void shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[forest::uniform_index(rng, i)]);
}

std::size_t checked_index(EnvironmentClass c) {
  if (c == EnvironmentClass::OPEN) throw EvalError("OPEN is not an evaluable class");
  return index_of(c);
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw EvalError(fmt::format("{}: cannot write file", path.string()));
  return out;
}

}  // namespace

Split split(std::span<const SamplePoint> samples, double train_fraction, std::uint64_t seed, bool stratified) {
  if (samples.empty()) throw EvalError("cannot split an empty sample set");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw EvalError("train fraction must lie in (0, 1)");
  std::mt19937_64 rng = forest::tree_rng(seed, 0);
  std::vector<bool> in_train(samples.size(), false);

  auto take = [&](std::vector<std::size_t>& idx) {
    shuffle(idx, rng);
    const auto k = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(idx.size())));
    for (std::size_t i = 0; i < k; ++i) in_train[idx[i]] = true;
  };

  if (stratified) {
    std::array<std::vector<std::size_t>, kTrainableClasses> by_class;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (!samples[i].label) throw EvalError("stratified split needs labelled samples");
      by_class[checked_index(*samples[i].label)].push_back(i);
    }
    const auto present = std::count_if(by_class.begin(), by_class.end(), [](const auto& v) { return !v.empty(); });
    if (present < 2) throw EvalError("stratified split needs at least two classes with samples");
    for (auto& idx : by_class)
      if (!idx.empty()) take(idx);
  } else {
    std::vector<std::size_t> idx(samples.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    take(idx);
  }

  Split out;
  for (std::size_t i = 0; i < samples.size(); ++i) (in_train[i] ? out.train : out.test).push_back(samples[i]);
  return out;
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (const auto& row : counts)
    for (auto c : row) t += c;
  return t;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t c) const {
  return counts[c][0] + counts[c][1] + counts[c][2];
}

std::uint64_t ConfusionMatrix::column_sum(std::size_t c) const {
  return counts[0][c] + counts[1][c] + counts[2][c];
}

ConfusionMatrix confusion(std::span<const EnvironmentClass> actual, std::span<const EnvironmentClass> predicted) {
  if (actual.size() != predicted.size())
    throw EvalError(fmt::format("length mismatch: {} actual vs {} predicted", actual.size(), predicted.size()));
  if (actual.empty()) throw EvalError("confusion of empty label lists");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < actual.size(); ++i) ++cm.counts[checked_index(actual[i])][checked_index(predicted[i])];
  return cm;
}

ClassMetrics metrics(const ConfusionMatrix& cm) {
  const std::uint64_t total = cm.total();
  if (total == 0) throw EvalError("metrics of an empty confusion matrix");
  ClassMetrics m;
  std::uint64_t trace = 0;
  for (std::size_t c = 0; c < 3; ++c) {
    const auto tp = static_cast<double>(cm.counts[c][c]);
    trace += cm.counts[c][c];
    if (const auto col = cm.column_sum(c); col > 0) m.precision[c] = tp / static_cast<double>(col);
    if (const auto row = cm.row_sum(c); row > 0) m.recall[c] = tp / static_cast<double>(row);
  }
  m.accuracy = static_cast<double>(trace) / static_cast<double>(total);
  return m;
}

std::string metrics_json(const ConfusionMatrix& cm, const ClassMetrics& m) {
  json precision = json::object(), recall = json::object();
  for (std::size_t c = 0; c < 3; ++c) {
    const std::string name(to_string(kTrainable[c]));
    precision[name] = m.precision[c] ? json(*m.precision[c]) : json(nullptr);
    recall[name] = m.recall[c] ? json(*m.recall[c]) : json(nullptr);
  }
  json confusion_rows = json::array();
  for (const auto& row : cm.counts) confusion_rows.push_back(row);
  return json{{"confusion", confusion_rows}, {"precision", precision}, {"recall", recall}, {"accuracy", m.accuracy}}
      .dump(2);
}

std::string metrics_table(const ConfusionMatrix& cm, const ClassMetrics& m) {
  auto opt = [](const std::optional<double>& v) { return v ? fmt::format("{:.4f}", *v) : std::string("-"); };
  std::string out = fmt::format("{:<8}{:>10}{:>10}{:>10}{:>12}{:>10}\n", "actual", "RES", "ULR", "UHR", "precision",
                                "recall");
  for (std::size_t c = 0; c < 3; ++c)
    out += fmt::format("{:<8}{:>10}{:>10}{:>10}{:>12}{:>10}\n", to_string(kTrainable[c]), cm.counts[c][0],
                       cm.counts[c][1], cm.counts[c][2], opt(m.precision[c]), opt(m.recall[c]));
  out += fmt::format("accuracy {:.4f} ({} samples)\n", m.accuracy, cm.total());
  return out;
}

double percentile_nearest_rank(std::vector<double> values, double p) {
  if (values.empty()) throw EvalError("percentile of no values");
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size());
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

double BoundaryGrid::cell_x(std::size_t i) const {
  return x_range.first + (static_cast<double>(i) + 0.5) * (x_range.second - x_range.first) / static_cast<double>(resolution);
}

double BoundaryGrid::cell_y(std::size_t j) const {
  return y_range.first + (static_cast<double>(j) + 0.5) * (y_range.second - y_range.first) / static_cast<double>(resolution);
}

BoundaryGrid decision_boundary(std::span<const SamplePoint> samples, Feature fx, Feature fy,
                               const forest::ForestConfig& cfg, const forest::ForestModel* full_model,
                               std::size_t resolution) {
  if (fx == fy) throw EvalError("decision boundary needs two distinct features");
  if (samples.empty()) throw EvalError("decision boundary needs samples");
  if (resolution == 0) throw EvalError("resolution must be positive");

  std::vector<double> xs, ys;
  for (const auto& s : samples) {
    xs.push_back(s.features[fx]);
    ys.push_back(s.features[fy]);
  }
  BoundaryGrid grid;
  grid.feature_x = fx;
  grid.feature_y = fy;
  grid.resolution = resolution;
  grid.x_range = {percentile_nearest_rank(xs, 1.0), percentile_nearest_rank(xs, 99.0)};
  grid.y_range = {percentile_nearest_rank(ys, 1.0), percentile_nearest_rank(ys, 99.0)};
  auto fname = [](Feature f) { return features::kFeatureNames[static_cast<std::size_t>(f)]; };
  if (!(grid.x_range.first < grid.x_range.second) || !std::isfinite(grid.x_range.second))
    throw EvalError(fmt::format("feature {} is constant over the 1-99% range", fname(fx)));
  if (!(grid.y_range.first < grid.y_range.second) || !std::isfinite(grid.y_range.second))
    throw EvalError(fmt::format("feature {} is constant over the 1-99% range", fname(fy)));

  // Canonical order so the auxiliary forest does not depend on input order.
  std::vector<SamplePoint> ordered(samples.begin(), samples.end());
  std::sort(ordered.begin(), ordered.end(), [&](const SamplePoint& a, const SamplePoint& b) {
    const auto ka = std::make_tuple(a.features[fx], a.features[fy], a.label);
    const auto kb = std::make_tuple(b.features[fx], b.features[fy], b.label);
    return ka < kb;
  });
  forest::ForestConfig aux_cfg = cfg;
  aux_cfg.features_per_split = std::min<std::size_t>(cfg.features_per_split, 2);
  const forest::ForestModel aux =
      forest::train(forest::make_dataset(ordered, fx, fy), aux_cfg, {std::string(fname(fx)), std::string(fname(fy))});

  grid.cell_class.resize(resolution * resolution);
  parallel_for(resolution, [&](std::size_t j) {
    for (std::size_t i = 0; i < resolution; ++i) {
      const double cell[2] = {grid.cell_x(i), grid.cell_y(j)};
      grid.cell_class[j * resolution + i] = static_cast<EnvironmentClass>(forest::predict_index(aux, cell));
    }
  });

  forest::ForestModel trained;
  if (!full_model) {
    trained = forest::train(samples, cfg);
    full_model = &trained;
  }
  for (const auto& s : samples) {
    const double x = s.features[fx], y = s.features[fy];
    if (x < grid.x_range.first || x > grid.x_range.second || y < grid.y_range.first || y > grid.y_range.second)
      continue;
    grid.point_overlay.push_back({x, y, forest::predict(*full_model, s.features)});
  }
  return grid;
}

void write_boundary_csv(const std::filesystem::path& path, const BoundaryGrid& grid) {
  std::ofstream out = open_out(path);
  out << "cell_x,cell_y,class\n";
  for (std::size_t j = 0; j < grid.resolution; ++j)
    for (std::size_t i = 0; i < grid.resolution; ++i)
      out << fmt::format("{},{},{}\n", grid.cell_x(i), grid.cell_y(j), to_string(grid.at(i, j)));
}

void write_boundary_svg(const std::filesystem::path& path, const BoundaryGrid& grid) {
  const Palette palette;
  constexpr double plot = 600.0, margin_l = 70.0, margin_t = 20.0, margin_b = 50.0, legend_w = 120.0;
  const double cell = plot / static_cast<double>(grid.resolution);
  const double width = margin_l + plot + legend_w, height = margin_t + plot + margin_b;
  const auto [x0, x1] = grid.x_range;
  const auto [y0, y1] = grid.y_range;
  auto px = [&](double x) { return margin_l + (x - x0) / (x1 - x0) * plot; };
  auto py = [&](double y) { return margin_t + plot - (y - y0) / (y1 - y0) * plot; };

  std::ofstream out = open_out(path);
  out << fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" viewBox=\"0 0 {:.0f} {:.0f}\">\n",
      width, height, width, height);
  out << "<g shape-rendering=\"crispEdges\" fill-opacity=\"0.45\">\n";
  // Runs of equal cells in a row collapse into one rect.
  for (std::size_t j = 0; j < grid.resolution; ++j) {
    const double top = margin_t + plot - static_cast<double>(j + 1) * cell;
    for (std::size_t i = 0; i < grid.resolution;) {
      std::size_t k = i;
      while (k < grid.resolution && grid.at(k, j) == grid.at(i, j)) ++k;
      out << fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"{}\"/>\n",
                         margin_l + static_cast<double>(i) * cell, top, static_cast<double>(k - i) * cell, cell,
                         palette.color(grid.at(i, j)));
      i = k;
    }
  }
  out << "</g>\n<g stroke=\"#202020\" stroke-width=\"0.4\">\n";
  for (const auto& p : grid.point_overlay)
    out << fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"2\" fill=\"{}\"/>\n", px(p.x), py(p.y),
                       palette.color(p.predicted));
  out << "</g>\n";
  out << fmt::format("<rect x=\"{:.0f}\" y=\"{:.0f}\" width=\"{:.0f}\" height=\"{:.0f}\" fill=\"none\" stroke=\"black\"/>\n",
                     margin_l, margin_t, plot, plot);
  const auto xname = features::kFeatureNames[static_cast<std::size_t>(grid.feature_x)];
  const auto yname = features::kFeatureNames[static_cast<std::size_t>(grid.feature_y)];
  out << fmt::format("<g font-family=\"sans-serif\" font-size=\"12\">\n");
  out << fmt::format("<text x=\"{:.0f}\" y=\"{:.0f}\" text-anchor=\"middle\">{}</text>\n", margin_l + plot / 2,
                     height - 12, xname);
  out << fmt::format("<text x=\"14\" y=\"{:.0f}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {:.0f})\">{}</text>\n",
                     margin_t + plot / 2, margin_t + plot / 2, yname);
  out << fmt::format("<text x=\"{:.0f}\" y=\"{:.0f}\" text-anchor=\"start\">{:.4g}</text>\n", margin_l,
                     margin_t + plot + 16, x0);
  out << fmt::format("<text x=\"{:.0f}\" y=\"{:.0f}\" text-anchor=\"end\">{:.4g}</text>\n", margin_l + plot,
                     margin_t + plot + 16, x1);
  out << fmt::format("<text x=\"{:.0f}\" y=\"{:.0f}\" text-anchor=\"end\">{:.4g}</text>\n", margin_l - 4,
                     margin_t + plot, y0);
  out << fmt::format("<text x=\"{:.0f}\" y=\"{:.0f}\" text-anchor=\"end\">{:.4g}</text>\n", margin_l - 4,
                     margin_t + 10, y1);
  double ly = margin_t + 10;
  for (EnvironmentClass c : kTrainable) {
    out << fmt::format("<rect x=\"{:.0f}\" y=\"{:.0f}\" width=\"14\" height=\"14\" fill=\"{}\"/>\n",
                       margin_l + plot + 16, ly, palette.color(c));
    out << fmt::format("<text x=\"{:.0f}\" y=\"{:.0f}\">{}</text>\n", margin_l + plot + 36, ly + 12, to_string(c));
    ly += 22;
  }
  out << "</g>\n</svg>\n";
}

}  // namespace morpho::evalx
