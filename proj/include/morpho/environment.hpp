#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace morpho {

/// ITU-R P.1411 environment types plus OPEN for cells with no buildings in
/// their buffer. Declaration order is the tie-break order.
enum class EnvironmentClass : std::uint8_t { RES = 0, ULR = 1, UHR = 2, OPEN = 3 };

inline constexpr std::size_t kTrainableClasses = 3;

inline constexpr std::array<EnvironmentClass, 3> kTrainable{EnvironmentClass::RES, EnvironmentClass::ULR,
                                                            EnvironmentClass::UHR};

inline constexpr std::string_view to_string(EnvironmentClass c) {
  switch (c) {
    case EnvironmentClass::RES: return "RES";
    case EnvironmentClass::ULR: return "ULR";
    case EnvironmentClass::UHR: return "UHR";
    case EnvironmentClass::OPEN: return "OPEN";
  }
  return "?";
}

inline constexpr std::optional<EnvironmentClass> parse_environment(std::string_view s) {
  if (s == "RES") return EnvironmentClass::RES;
  if (s == "ULR") return EnvironmentClass::ULR;
  if (s == "UHR") return EnvironmentClass::UHR;
  if (s == "OPEN") return EnvironmentClass::OPEN;
  return std::nullopt;
}

inline constexpr std::size_t index_of(EnvironmentClass c) { return static_cast<std::size_t>(c); }

}  // namespace morpho

namespace morpho {

/// Fill colours used by every SVG renderer.
struct Palette {
  std::string res = "#2e9e44";
  std::string ulr = "#f28e1c";
  std::string uhr = "#d7301f";
  std::string open = "#b0b0b0";

  const std::string& color(EnvironmentClass c) const {
    switch (c) {
      case EnvironmentClass::RES: return res;
      case EnvironmentClass::ULR: return ulr;
      case EnvironmentClass::UHR: return uhr;
      case EnvironmentClass::OPEN: break;
    }
    return open;
  }
};

}  // namespace morpho
