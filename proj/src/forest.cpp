#include "morpho/forest.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "morpho/error.hpp"
#include "morpho/parallel.hpp"

namespace morpho::forest {

using json = nlohmann::json;

namespace {

// Splits must beat this decrease; guards against rounding noise in gini sums.
constexpr double kMinDecrease = 1e-12;

struct Grower {
  const Dataset& data;
  const ForestConfig& cfg;
  std::mt19937_64 rng;
  Tree tree;
  std::vector<double> importance;
  double root_size = 0.0;

  std::vector<std::uint32_t> class_counts(std::span<const std::size_t> rows) const {
    std::vector<std::uint32_t> c(data.n_classes, 0);
    for (std::size_t r : rows) ++c[data.y[r]];
    return c;
  }

  bool is_constant(std::span<const std::size_t> rows, std::size_t f) const {
    const double v0 = data.at(rows[0], f);
    for (std::size_t r : rows)
      if (data.at(r, f) != v0) return false;
    return true;
  }

  // Draws features in random order, keeping the first features_per_split
  // that vary inside the node.
  std::vector<std::size_t> draw_candidates(std::span<const std::size_t> rows) {
    std::vector<std::size_t> order(data.n_features);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    std::vector<std::size_t> chosen;
    for (std::size_t f : order) {
      if (chosen.size() == cfg.features_per_split) break;
      if (!is_constant(rows, f)) chosen.push_back(f);
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
  }

  // Zero-gain fallback for impure nodes (e.g. XOR): lowest candidate feature,
  // lowest midpoint.
  std::optional<Split> first_split(std::span<const std::size_t> rows, std::span<const std::size_t> candidates) const {
    for (std::size_t f : candidates) {
      double lo = data.at(rows[0], f);
      for (std::size_t r : rows) lo = std::min(lo, data.at(r, f));
      std::optional<double> hi;
      for (std::size_t r : rows) {
        const double v = data.at(r, f);
        if (v > lo && (!hi || v < *hi)) hi = v;
      }
      if (!hi) continue;
      double threshold = lo + 0.5 * (*hi - lo);
      if (!(threshold < *hi)) threshold = lo;
      return Split{f, threshold, 0.0};
    }
    return std::nullopt;
  }

  std::int32_t grow(std::vector<std::size_t> rows, std::size_t depth) {
    const auto index = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    std::vector<std::uint32_t> counts = class_counts(rows);
    const bool pure = std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }) <= 1;
    const bool depth_cap = cfg.max_depth && depth >= *cfg.max_depth;

    std::optional<Split> split;
    if (!pure && !depth_cap && rows.size() >= cfg.min_samples_split) {
      const auto candidates = draw_candidates(rows);
      if (!candidates.empty()) {
        split = best_split(data, rows, candidates);
        if (!split) split = first_split(rows, candidates);
      }
    }
    if (!split) {
      tree.nodes[static_cast<std::size_t>(index)].counts = std::move(counts);
      return index;
    }

    importance[split->feature] += static_cast<double>(rows.size()) / root_size * split->impurity_decrease;
    std::vector<std::size_t> left, right;
    for (std::size_t r : rows) (data.at(r, split->feature) <= split->threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();

    const std::int32_t l = grow(std::move(left), depth + 1);
    const std::int32_t r = grow(std::move(right), depth + 1);
    TreeNode& node = tree.nodes[static_cast<std::size_t>(index)];
    node.feature = static_cast<std::int32_t>(split->feature);
    node.threshold = split->threshold;
    node.left = l;
    node.right = r;
    return index;
  }
};

json node_to_json(const Tree& tree, std::int32_t index) {
  const TreeNode& n = tree.nodes[static_cast<std::size_t>(index)];
  if (n.is_leaf()) return {{"counts", n.counts}};
  return {{"f", n.feature}, {"t", n.threshold}, {"l", node_to_json(tree, n.left)}, {"r", node_to_json(tree, n.right)}};
}

std::int32_t node_from_json(const json& j, Tree& tree, std::size_t n_features, std::size_t n_classes,
                            std::size_t depth) {
  if (depth > 4096) throw ModelIoError("tree too deep");
  if (!j.is_object()) throw ModelIoError("tree node is not an object");
  const auto index = static_cast<std::int32_t>(tree.nodes.size());
  tree.nodes.emplace_back();
  if (j.contains("counts")) {
    auto counts = j.at("counts").get<std::vector<std::uint32_t>>();
    if (counts.size() != n_classes) throw ModelIoError("leaf has wrong number of class counts");
    if (std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}) == 0)
      throw ModelIoError("leaf has zero total count");
    tree.nodes[static_cast<std::size_t>(index)].counts = std::move(counts);
    return index;
  }
  if (!j.contains("f") || !j.contains("t") || !j.contains("l") || !j.contains("r"))
    throw ModelIoError("internal node must carry f, t, l and r");
  const auto f = j.at("f").get<std::int64_t>();
  if (f < 0 || static_cast<std::size_t>(f) >= n_features) throw ModelIoError("node feature index out of range");
  const double t = j.at("t").get<double>();
  const std::int32_t l = node_from_json(j.at("l"), tree, n_features, n_classes, depth + 1);
  const std::int32_t r = node_from_json(j.at("r"), tree, n_features, n_classes, depth + 1);
  TreeNode& node = tree.nodes[static_cast<std::size_t>(index)];
  node.feature = static_cast<std::int32_t>(f);
  node.threshold = t;
  node.left = l;
  node.right = r;
  return index;
}

}  // namespace

void Dataset::add(std::span<const double> features, std::uint32_t label) {
  if (features.size() != n_features) throw ForestError("feature row has the wrong width");
  if (label >= n_classes) throw ForestError("label out of range");
  x.insert(x.end(), features.begin(), features.end());
  y.push_back(label);
}

Dataset make_dataset(std::span<const features::SamplePoint> samples) {
  Dataset d{features::kFeatureCount, kTrainableClasses, {}, {}};
  d.x.reserve(samples.size() * d.n_features);
  for (const auto& s : samples) {
    if (!s.label || *s.label == EnvironmentClass::OPEN) throw ForestError("training sample without a trainable label");
    d.add(s.features.values, static_cast<std::uint32_t>(index_of(*s.label)));
  }
  return d;
}

Dataset make_dataset(std::span<const features::SamplePoint> samples, features::Feature fx, features::Feature fy) {
  Dataset d{2, kTrainableClasses, {}, {}};
  for (const auto& s : samples) {
    if (!s.label || *s.label == EnvironmentClass::OPEN) throw ForestError("training sample without a trainable label");
    const double row[2] = {s.features[fx], s.features[fy]};
    d.add(row, static_cast<std::uint32_t>(index_of(*s.label)));
  }
  return d;
}

const TreeNode& Tree::leaf_for(std::span<const double> x) const {
  const TreeNode* n = &nodes.front();
  while (!n->is_leaf())
    n = &nodes[static_cast<std::size_t>(x[static_cast<std::size_t>(n->feature)] <= n->threshold ? n->left : n->right)];
  return *n;
}

std::size_t Tree::vote(std::span<const double> x) const {
  const auto& c = leaf_for(x).counts;
  return static_cast<std::size_t>(std::max_element(c.begin(), c.end()) - c.begin());
}

double gini(std::span<const std::uint32_t> counts) {
  // Integer sums keep the result independent of class order.
  std::uint64_t n = 0, sum_sq = 0;
  for (std::uint64_t c : counts) {
    n += c;
    sum_sq += c * c;
  }
  if (n == 0) throw ForestError("gini of an empty node");
  return 1.0 - static_cast<double>(sum_sq) / (static_cast<double>(n) * static_cast<double>(n));
}

std::optional<Split> best_split(const Dataset& data, std::span<const std::size_t> rows,
                                std::span<const std::size_t> candidate_features) {
  if (rows.size() < 2) return std::nullopt;
  std::vector<std::uint32_t> total(data.n_classes, 0);
  for (std::size_t r : rows) ++total[data.y[r]];
  const double parent = gini(total);
  const auto n = static_cast<double>(rows.size());

  std::vector<std::size_t> features(candidate_features.begin(), candidate_features.end());
  std::sort(features.begin(), features.end());

  std::optional<Split> best;
  std::vector<std::size_t> order(rows.begin(), rows.end());
  std::vector<std::uint32_t> left(data.n_classes), right(data.n_classes);
  for (std::size_t f : features) {
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double va = data.at(a, f), vb = data.at(b, f);
      return va != vb ? va < vb : a < b;
    });
    std::fill(left.begin(), left.end(), 0);
    right = total;
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      const std::uint32_t cls = data.y[order[i]];
      ++left[cls];
      --right[cls];
      const double lo = data.at(order[i], f), hi = data.at(order[i + 1], f);
      if (lo == hi) continue;
      const auto nl = static_cast<double>(i + 1);
      const double decrease = parent - (nl / n) * gini(left) - ((n - nl) / n) * gini(right);
      if (decrease > kMinDecrease && (!best || decrease > best->impurity_decrease)) {
        double threshold = lo + 0.5 * (hi - lo);
        if (!(threshold < hi)) threshold = lo;
        best = Split{f, threshold, decrease};
      }
    }
  }
  return best;
}

std::mt19937_64 tree_rng(std::uint64_t seed, std::size_t tree_index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tree_index), static_cast<std::uint32_t>(tree_index >> 32)};
  return std::mt19937_64(seq);
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  const std::uint64_t range = n;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % range;
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return static_cast<std::size_t>(v % range);
}

ForestModel train(const Dataset& data, const ForestConfig& cfg, std::vector<std::string> feature_names) {
  if (data.rows() == 0) throw ForestError("empty training set");
  if (cfg.n_trees == 0) throw ForestError("n_trees must be at least 1");
  if (cfg.features_per_split == 0 || cfg.features_per_split > data.n_features)
    throw ForestError(fmt::format("features_per_split must be in [1, {}]", data.n_features));
  if (feature_names.empty())
    for (std::size_t f = 0; f < data.n_features; ++f) feature_names.push_back(fmt::format("f{}", f));
  if (feature_names.size() != data.n_features) throw ForestError("feature name count mismatch");

  ForestModel model;
  model.n_features = data.n_features;
  model.n_classes = data.n_classes;
  model.feature_names = std::move(feature_names);
  model.config = cfg;
  model.train_seed = cfg.seed;
  model.trees.resize(cfg.n_trees);

  std::vector<std::vector<double>> per_tree(cfg.n_trees);
  parallel_for(cfg.n_trees, [&](std::size_t t) {
    Grower g{data, cfg, tree_rng(cfg.seed, t), {}, std::vector<double>(data.n_features, 0.0),
             static_cast<double>(data.rows())};
    std::vector<std::size_t> rows(data.rows());
    if (cfg.bootstrap) {
      for (auto& r : rows) r = uniform_index(g.rng, data.rows());
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    g.grow(std::move(rows), 0);
    model.trees[t] = std::move(g.tree);
    per_tree[t] = std::move(g.importance);
  });

  model.importances.assign(data.n_features, 0.0);
  for (const auto& imp : per_tree)
    for (std::size_t f = 0; f < data.n_features; ++f) model.importances[f] += imp[f];
  const double total = std::accumulate(model.importances.begin(), model.importances.end(), 0.0);
  if (total > 0.0)
    for (double& v : model.importances) v /= total;
  return model;
}

ForestModel train(std::span<const features::SamplePoint> samples, const ForestConfig& cfg) {
  std::vector<std::string> names(features::kFeatureNames.begin(), features::kFeatureNames.end());
  return train(make_dataset(samples), cfg, std::move(names));
}

std::size_t predict_index(const ForestModel& model, std::span<const double> x) {
  std::vector<std::size_t> votes(model.n_classes, 0);
  for (const auto& tree : model.trees) ++votes[tree.vote(x)];
  return static_cast<std::size_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

std::vector<double> predict_proba(const ForestModel& model, std::span<const double> x) {
  std::vector<double> p(model.n_classes, 0.0);
  for (const auto& tree : model.trees) p[tree.vote(x)] += 1.0;
  for (double& v : p) v /= static_cast<double>(model.trees.size());
  return p;
}

EnvironmentClass predict(const ForestModel& model, const features::FeatureVector& fv) {
  if (model.n_features != features::kFeatureCount || model.n_classes != kTrainableClasses)
    throw ForestError("model is not a twelve-feature environment classifier");
  return static_cast<EnvironmentClass>(predict_index(model, fv.values));
}

std::string to_json(const ForestModel& model) {
  const auto& c = model.config;
  json trees = json::array();
  for (const auto& t : model.trees) trees.push_back(node_to_json(t, 0));
  json doc = {
      {"version", "1"},
      {"config",
       {{"n_trees", c.n_trees},
        {"max_depth", c.max_depth ? json(*c.max_depth) : json(nullptr)},
        {"min_samples_split", c.min_samples_split},
        {"features_per_split", c.features_per_split},
        {"bootstrap", c.bootstrap},
        {"seed", c.seed}}},
      {"n_features", model.n_features},
      {"n_classes", model.n_classes},
      {"feature_names", model.feature_names},
      {"importances", model.importances},
      {"train_seed", model.train_seed},
      {"trees", trees},
  };
  return doc.dump();
}

ForestModel from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ModelIoError(fmt::format("malformed model file: {}", e.what()));
  }
  try {
    if (!doc.is_object() || !doc.contains("version")) throw ModelIoError("model file has no version");
    if (!doc["version"].is_string() || doc["version"].get<std::string>() != "1")
      throw ModelIoError(fmt::format("unsupported model version {}", doc["version"].dump()));
    ForestModel m;
    const json& c = doc.at("config");
    m.config.n_trees = c.at("n_trees").get<std::size_t>();
    if (!c.at("max_depth").is_null()) m.config.max_depth = c.at("max_depth").get<std::size_t>();
    m.config.min_samples_split = c.at("min_samples_split").get<std::size_t>();
    m.config.features_per_split = c.at("features_per_split").get<std::size_t>();
    m.config.bootstrap = c.at("bootstrap").get<bool>();
    m.config.seed = c.at("seed").get<std::uint64_t>();
    m.n_features = doc.at("n_features").get<std::size_t>();
    m.n_classes = doc.at("n_classes").get<std::size_t>();
    m.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
    m.importances = doc.at("importances").get<std::vector<double>>();
    m.train_seed = doc.at("train_seed").get<std::uint64_t>();
    if (m.n_features == 0 || m.n_classes == 0) throw ModelIoError("model has no features or classes");
    if (m.feature_names.size() != m.n_features || m.importances.size() != m.n_features)
      throw ModelIoError("feature_names/importances length does not match n_features");
    const json& trees = doc.at("trees");
    if (!trees.is_array() || trees.empty()) throw ModelIoError("model has no trees");
    for (const auto& t : trees) {
      Tree tree;
      node_from_json(t, tree, m.n_features, m.n_classes, 0);
      m.trees.push_back(std::move(tree));
    }
    if (m.trees.size() != m.config.n_trees) throw ModelIoError("tree count does not match config.n_trees");
    return m;
  } catch (const json::exception& e) {
    throw ModelIoError(fmt::format("invalid model file: {}", e.what()));
  }
}

void save_model(const ForestModel& model, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ModelIoError(fmt::format("{}: cannot write model", path.string()));
  out << to_json(model) << '\n';
  if (!out) throw ModelIoError(fmt::format("{}: write failed", path.string()));
}

ForestModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelIoError(fmt::format("{}: cannot open model", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace morpho::forest
