#pragma once

// Site-general path loss per environment class and the cross-environment
// rule for links whose endpoints sit in different environments:
//
//   L(d, f) = 10 alpha log10(d) + beta + 10 gamma log10(f)   [dB, d in m, f in GHz]
//
// Coefficients come from a user-supplied table; none are built in.

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "morpho/environment.hpp"
#include "morpho/geom.hpp"
#include "morpho/mapgen.hpp"

namespace morpho::pathloss {

enum class Situation { LoS = 0, NLoS = 1 };

std::optional<Situation> parse_situation(std::string_view s);
std::string_view to_string(Situation s);

struct Coefficients {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double sigma = 0.0;  // shadow-fading standard deviation, dB
};

struct PathLossParams {
  std::array<std::array<std::optional<Coefficients>, 2>, kTrainableClasses> table;
  std::pair<double, double> d_range{1.0, 1000.0};  // metres
  std::pair<double, double> f_range{0.3, 100.0};   // GHz

  /// Throws NoCoverageError for OPEN and PathLossError for a missing entry.
  const Coefficients& at(EnvironmentClass env, Situation s) const;
};

/// Parses {"envs": {ENV: {"LoS"|"NLoS": {alpha, beta, gamma, sigma}}}, "d_range", "f_range"}.
/// Missing ranges default to [1, 1000] m and [0.3, 100] GHz.
/// A "UVHR" (urban very high-rise) entry stands in for UHR when UHR is absent.
PathLossParams parse_params(const std::string& json_text);
PathLossParams load_params(const std::filesystem::path& path);

double median_loss(const PathLossParams& params, EnvironmentClass env, Situation s, double d, double f);

double shadowed_loss(const PathLossParams& params, EnvironmentClass env, Situation s, double d, double f,
                     double quantile);

/// Class of the nearest cell; equidistant cells resolve to the smallest (x, y).
EnvironmentClass select_environment(const mapgen::MorphologyMap& map, geom::Point p);

struct LinkQuery {
  geom::Point tx;
  geom::Point rx;
  double frequency = 1.0;  // GHz
  Situation situation = Situation::LoS;
};

struct LinkResult {
  EnvironmentClass env_tx = EnvironmentClass::OPEN;
  EnvironmentClass env_rx = EnvironmentClass::OPEN;
  EnvironmentClass env_used = EnvironmentClass::OPEN;
  double loss_db = 0.0;
};

/// Mixed-environment links use whichever endpoint environment gives the
/// lower loss (equal losses resolve to the lower class).
LinkResult link_loss(const mapgen::MorphologyMap& map, const PathLossParams& params, const LinkQuery& q);

}  // namespace morpho::pathloss
