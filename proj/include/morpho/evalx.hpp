#pragma once

// Holdout evaluation: stratified splitting, confusion matrix, per-class
// precision/recall, and two-feature decision-boundary grids.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "morpho/environment.hpp"
#include "morpho/features.hpp"
#include "morpho/forest.hpp"

namespace morpho::evalx {

struct Split {
  std::vector<features::SamplePoint> train;
  std::vector<features::SamplePoint> test;
};

/// Seeded shuffle split. Stratified splits keep round(fraction * n_c) of
/// every class in train and need at least two classes present.
Split split(std::span<const features::SamplePoint> samples, double train_fraction, std::uint64_t seed,
            bool stratified = true);

/// rows = actual class, columns = predicted class, order RES, ULR, UHR.
struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, 3>, 3> counts{};

  std::uint64_t total() const;
  std::uint64_t row_sum(std::size_t c) const;
  std::uint64_t column_sum(std::size_t c) const;
};

ConfusionMatrix confusion(std::span<const EnvironmentClass> actual, std::span<const EnvironmentClass> predicted);

struct ClassMetrics {
  std::array<std::optional<double>, 3> precision;  // absent when the class is never predicted
  std::array<std::optional<double>, 3> recall;     // absent when the class never occurs
  double accuracy = 0.0;
};

ClassMetrics metrics(const ConfusionMatrix& cm);

std::string metrics_json(const ConfusionMatrix& cm, const ClassMetrics& m);
std::string metrics_table(const ConfusionMatrix& cm, const ClassMetrics& m);

/// Nearest-rank percentile (p in (0, 100]) of unsorted values.
double percentile_nearest_rank(std::vector<double> values, double p);

struct OverlayPoint {
  double x = 0.0;
  double y = 0.0;
  EnvironmentClass predicted = EnvironmentClass::RES;
};

struct BoundaryGrid {
  features::Feature feature_x = features::Feature::avg_height;
  features::Feature feature_y = features::Feature::building_count;
  std::pair<double, double> x_range;  // 1st..99th percentile
  std::pair<double, double> y_range;
  std::size_t resolution = 200;
  std::vector<EnvironmentClass> cell_class;  // row-major, y then x
  std::vector<OverlayPoint> point_overlay;

  double cell_x(std::size_t i) const;
  double cell_y(std::size_t j) const;
  EnvironmentClass at(std::size_t i, std::size_t j) const { return cell_class[j * resolution + i]; }
};

/// Trains an auxiliary forest on (fx, fy) alone and classifies the cell
/// centres of a resolution x resolution grid spanning the 1st-99th
/// percentiles. Overlay points carry `full_model` predictions; when no model
/// is given one is trained on all features with `cfg`.
BoundaryGrid decision_boundary(std::span<const features::SamplePoint> samples, features::Feature fx,
                               features::Feature fy, const forest::ForestConfig& cfg,
                               const forest::ForestModel* full_model = nullptr, std::size_t resolution = 200);

void write_boundary_csv(const std::filesystem::path& path, const BoundaryGrid& grid);
void write_boundary_svg(const std::filesystem::path& path, const BoundaryGrid& grid);

}  // namespace morpho::evalx
