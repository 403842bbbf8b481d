#pragma once

// Random forest classifier: Gini-split CART trees grown on bootstrap
// resamples with per-node random feature subsets, predicting by plurality
// vote. Deterministic for a given seed regardless of worker count.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "morpho/environment.hpp"
#include "morpho/features.hpp"

namespace morpho::forest {

struct ForestConfig {
  std::size_t n_trees = 100;
  std::optional<std::size_t> max_depth;  // nullopt = grow until pure
  std::size_t min_samples_split = 2;
  std::size_t features_per_split = 3;  // floor(sqrt(12))
  bool bootstrap = true;
  std::uint64_t seed = 0;
};

/// Dense row-major design matrix with integer class labels in [0, n_classes).
struct Dataset {
  std::size_t n_features = 0;
  std::size_t n_classes = 0;
  std::vector<double> x;
  std::vector<std::uint32_t> y;

  std::size_t rows() const { return y.size(); }
  std::span<const double> row(std::size_t i) const { return {x.data() + i * n_features, n_features}; }
  double at(std::size_t i, std::size_t f) const { return x[i * n_features + f]; }
  void add(std::span<const double> features, std::uint32_t label);
};

/// Twelve-feature dataset over RES/ULR/UHR; throws ForestError on unlabelled or OPEN samples.
Dataset make_dataset(std::span<const features::SamplePoint> samples);

/// Two-feature projection used for decision-boundary plots.
Dataset make_dataset(std::span<const features::SamplePoint> samples, features::Feature fx, features::Feature fy);

struct TreeNode {
  // Internal nodes: feature >= 0, children set. Leaves: feature == -1, counts set.
  std::int32_t feature = -1;
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::vector<std::uint32_t> counts;

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  const TreeNode& leaf_for(std::span<const double> x) const;
  /// Majority class of the reached leaf; ties go to the lower class index.
  std::size_t vote(std::span<const double> x) const;
};

struct ForestModel {
  std::vector<Tree> trees;
  std::size_t n_features = 0;
  std::size_t n_classes = 0;
  std::vector<std::string> feature_names;
  std::vector<double> importances;
  ForestConfig config;
  std::uint64_t train_seed = 0;
};

/// 1 - sum(p_i^2); throws ForestError when all counts are zero.
double gini(std::span<const std::uint32_t> counts);

struct Split {
  std::size_t feature = 0;
  double threshold = 0.0;
  double impurity_decrease = 0.0;  // parent minus size-weighted children
};

/// Best Gini split of `rows` over `candidate_features`; thresholds are
/// midpoints of consecutive distinct values and `x <= threshold` goes left.
/// Ties prefer the lower feature index, then the lower threshold.
std::optional<Split> best_split(const Dataset& data, std::span<const std::size_t> rows,
                                std::span<const std::size_t> candidate_features);

/// Per-tree generator derived from (seed, tree index).
std::mt19937_64 tree_rng(std::uint64_t seed, std::size_t tree_index);

/// Unbiased draw from [0, n).
std::size_t uniform_index(std::mt19937_64& rng, std::size_t n);

ForestModel train(const Dataset& data, const ForestConfig& cfg, std::vector<std::string> feature_names = {});
ForestModel train(std::span<const features::SamplePoint> samples, const ForestConfig& cfg);

/// Plurality class index; ties go to the lower index.
std::size_t predict_index(const ForestModel& model, std::span<const double> x);
std::vector<double> predict_proba(const ForestModel& model, std::span<const double> x);

EnvironmentClass predict(const ForestModel& model, const features::FeatureVector& fv);

std::string to_json(const ForestModel& model);
ForestModel from_json(const std::string& text);
void save_model(const ForestModel& model, const std::filesystem::path& path);
ForestModel load_model(const std::filesystem::path& path);

}  // namespace morpho::forest
