#include "morpho/pathloss.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "morpho/error.hpp"
#include "morpho/normal.hpp"

namespace morpho::pathloss {

using json = nlohmann::json;

namespace {

Coefficients read_coefficients(const json& j) {
  Coefficients c{j.at("alpha").get<double>(), j.at("beta").get<double>(), j.at("gamma").get<double>(),
                 j.value("sigma", 0.0)};
  if (!std::isfinite(c.alpha) || !std::isfinite(c.beta) || !std::isfinite(c.gamma) || !std::isfinite(c.sigma) ||
      c.sigma < 0.0)
    throw PathLossError("coefficients must be finite with sigma >= 0");
  return c;
}

std::pair<double, double> read_range(const json& j, const char* name) {
  if (!j.is_array() || j.size() != 2) throw PathLossError(fmt::format("{} must be [min, max]", name));
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

std::optional<Situation> parse_situation(std::string_view s) {
  if (s == "LoS") return Situation::LoS;
  if (s == "NLoS") return Situation::NLoS;
  return std::nullopt;
}

std::string_view to_string(Situation s) { return s == Situation::LoS ? "LoS" : "NLoS"; }

const Coefficients& PathLossParams::at(EnvironmentClass env, Situation s) const {
  if (env == EnvironmentClass::OPEN) throw NoCoverageError("no path-loss scenario for OPEN terrain");
  const auto& entry = table[index_of(env)][static_cast<std::size_t>(s)];
  if (!entry)
    throw PathLossError(fmt::format("no coefficients for {} {}", morpho::to_string(env), pathloss::to_string(s)));
  return *entry;
}

PathLossParams parse_params(const std::string& json_text) {
  PathLossParams p;
  try {
    const json doc = json::parse(json_text);
    const json& envs = doc.at("envs");
    std::optional<json> very_high;
    for (const auto& [key, sits] : envs.items()) {
      if (key == "UVHR") {
        very_high = sits;
        continue;
      }
      const auto env = parse_environment(key);
      if (!env || *env == EnvironmentClass::OPEN) throw PathLossError(fmt::format("unknown environment '{}'", key));
      for (const auto& [sk, coeffs] : sits.items()) {
        const auto s = parse_situation(sk);
        if (!s) throw PathLossError(fmt::format("unknown situation '{}'", sk));
        p.table[index_of(*env)][static_cast<std::size_t>(*s)] = read_coefficients(coeffs);
      }
    }
    if (very_high)
      for (const auto& [sk, coeffs] : very_high->items()) {
        const auto s = parse_situation(sk);
        if (!s) throw PathLossError(fmt::format("unknown situation '{}'", sk));
        auto& slot = p.table[index_of(EnvironmentClass::UHR)][static_cast<std::size_t>(*s)];
        if (!slot) slot = read_coefficients(coeffs);
      }
    if (doc.contains("d_range")) p.d_range = read_range(doc["d_range"], "d_range");
    if (doc.contains("f_range")) p.f_range = read_range(doc["f_range"], "f_range");
  } catch (const json::exception& e) {
    throw PathLossError(fmt::format("invalid path-loss parameters: {}", e.what()));
  }
  if (!(p.d_range.first > 0.0 && p.d_range.first < p.d_range.second))
    throw PathLossError("d_range must satisfy 0 < d_min < d_max");
  if (!(p.f_range.first >= 0.3 && p.f_range.second <= 100.0 && p.f_range.first < p.f_range.second))
    throw PathLossError("f_range must lie within 0.3-100 GHz with f_min < f_max");
  return p;
}

PathLossParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PathLossError(fmt::format("{}: cannot open path-loss parameters", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_params(ss.str());
}

double median_loss(const PathLossParams& params, EnvironmentClass env, Situation s, double d, double f) {
  const Coefficients& c = params.at(env, s);
  if (!(d >= params.d_range.first))
    throw RangeError(fmt::format("distance {} m below d_min {} m", d, params.d_range.first));
  if (!(d <= params.d_range.second))
    throw RangeError(fmt::format("distance {} m above d_max {} m", d, params.d_range.second));
  if (!(f >= params.f_range.first))
    throw RangeError(fmt::format("frequency {} GHz below f_min {} GHz", f, params.f_range.first));
  if (!(f <= params.f_range.second))
    throw RangeError(fmt::format("frequency {} GHz above f_max {} GHz", f, params.f_range.second));
  return 10.0 * c.alpha * std::log10(d) + c.beta + 10.0 * c.gamma * std::log10(f);
}

double shadowed_loss(const PathLossParams& params, EnvironmentClass env, Situation s, double d, double f,
                     double quantile) {
  const double median = median_loss(params, env, s, d, f);
  const double sigma = params.at(env, s).sigma;
  if (!(quantile > 0.0 && quantile < 1.0)) throw PathLossError("quantile must lie in (0, 1)");
  const double z = morpho::normal_quantile(quantile);
  return sigma == 0.0 ? median : median + sigma * z;
}

EnvironmentClass select_environment(const mapgen::MorphologyMap& map, geom::Point p) {
  if (map.cells.empty()) throw OutOfMapError("map has no cells");
  geom::Box box;
  for (const auto& c : map.cells) box.expand(c.location);
  const double h = 0.5 * map.spacing;
  if (p.x < box.min_x - h || p.x > box.max_x + h || p.y < box.min_y - h || p.y > box.max_y + h)
    throw OutOfMapError(fmt::format("point ({:.1f}, {:.1f}) lies outside the map extent", p.x, p.y));
  const mapgen::MapCell* best = nullptr;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (const auto& c : map.cells) {
    const double dx = c.location.x - p.x, dy = c.location.y - p.y;
    const double d2 = dx * dx + dy * dy;
    const bool smaller = best && (c.location.x < best->location.x ||
                                  (c.location.x == best->location.x && c.location.y < best->location.y));
    if (d2 < best_d2 || (d2 == best_d2 && smaller)) {
      best = &c;
      best_d2 = d2;
    }
  }
  return best->env;
}

LinkResult link_loss(const mapgen::MorphologyMap& map, const PathLossParams& params, const LinkQuery& q) {
  if (q.tx == q.rx) throw PathLossError("transmitter and receiver coincide");
  LinkResult r;
  r.env_tx = select_environment(map, q.tx);
  r.env_rx = select_environment(map, q.rx);
  if (r.env_tx == EnvironmentClass::OPEN || r.env_rx == EnvironmentClass::OPEN)
    throw NoCoverageError("link endpoint lies in OPEN terrain");
  const double d = geom::distance(q.tx, q.rx);
  if (r.env_tx == r.env_rx) {
    r.env_used = r.env_tx;
    r.loss_db = median_loss(params, r.env_tx, q.situation, d, q.frequency);
    return r;
  }
  const EnvironmentClass lo = std::min(r.env_tx, r.env_rx), hi = std::max(r.env_tx, r.env_rx);
  const double loss_lo = median_loss(params, lo, q.situation, d, q.frequency);
  const double loss_hi = median_loss(params, hi, q.situation, d, q.frequency);
  r.env_used = loss_hi < loss_lo ? hi : lo;
  r.loss_db = std::min(loss_lo, loss_hi);
  return r;
}

}  // namespace morpho::pathloss
