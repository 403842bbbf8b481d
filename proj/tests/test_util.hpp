#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "morpho/geom.hpp"

namespace morpho::testing {

inline std::filesystem::path tmp_dir(const std::string& name) {
  auto dir = std::filesystem::path(MORPHO_TEST_TMP) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline geom::Polygon rect(double x0, double y0, double x1, double y1) {
  return geom::Polygon{{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}, {x0, y0}}, {}};
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace morpho::testing
