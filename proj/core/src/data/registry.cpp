#include "mobtcast/data/registry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mobtcast/data/windows.hpp"
#include "mobtcast/diff/tensor.hpp"

namespace mobtcast::data {
namespace {

double to_unit(double v, double lo, double hi) {
  if (!(hi > lo)) return 0.0;
  return std::clamp(2.0 * (v - lo) / (hi - lo) - 1.0, -1.0, 1.0);
}

double from_unit(double u, double lo, double hi) { return hi > lo ? lo + (u + 1.0) * 0.5 * (hi - lo) : lo; }

}  // namespace

std::array<double, 2> NormalizationBounds::normalize(double lat, double lon) const {
  return {to_unit(lon, lon_min, lon_max), to_unit(lat, lat_min, lat_max)};
}

std::array<double, 2> NormalizationBounds::denormalize(double x, double y) const {
  return {from_unit(y, lat_min, lat_max), from_unit(x, lon_min, lon_max)};
}

std::vector<std::uint8_t> training_mask(const CheckInLog& log, double train_frac) {
  std::vector<std::uint8_t> mask(log.size(), 0);
  for (std::size_t u = 0; u < log.num_users(); ++u) {
    const std::size_t begin = log.user_offsets[u];
    const std::size_t n = training_segment_length(log.user_offsets[u + 1] - begin, train_frac);
    std::fill_n(mask.begin() + static_cast<std::ptrdiff_t>(begin), n, std::uint8_t{1});
  }
  return mask;
}

PoiRegistry build_poi_registry(const CheckInLog& log, const CategoryScheme& scheme,
                               const std::vector<std::uint8_t>& fit_mask) {
  if (log.empty()) throw Error("build_poi_registry: empty check-in log");
  if (!fit_mask.empty() && fit_mask.size() != log.size()) {
    throw Error("build_poi_registry: fit mask has " + std::to_string(fit_mask.size()) + " entries for " +
                std::to_string(log.size()) + " check-ins");
  }

  PoiRegistry reg;
  reg.category_names = scheme.names();
  reg.pois.resize(log.num_pois());
  std::vector<std::uint8_t> seen(log.num_pois(), 0);
  constexpr double inf = std::numeric_limits<double>::infinity();
  double lat_lo = inf, lat_hi = -inf, lon_lo = inf, lon_hi = -inf;
  bool any_fit = false;

  for (std::size_t i = 0; i < log.size(); ++i) {
    const auto& c = log.records[i];
    const auto p = static_cast<std::size_t>(c.poi_id);
    if (!seen[p]) {
      seen[p] = 1;
      auto& rec = reg.pois[p];
      rec.lat = c.lat;
      rec.lon = c.lon;
      rec.raw_category = c.raw_category;
      rec.category_id = scheme.lookup(c.raw_category);
      if (rec.category_id == scheme.other_id()) ++reg.unknown_categories[c.raw_category];
    }
    if (fit_mask.empty() || fit_mask[i]) {
      any_fit = true;
      lat_lo = std::min(lat_lo, c.lat);
      lat_hi = std::max(lat_hi, c.lat);
      lon_lo = std::min(lon_lo, c.lon);
      lon_hi = std::max(lon_hi, c.lon);
    }
  }
  if (!any_fit) throw Error("build_poi_registry: no check-ins selected for fitting normalization bounds");
  reg.bounds = NormalizationBounds{lon_lo, lon_hi, lat_lo, lat_hi};
  for (auto& rec : reg.pois) {
    const auto xy = reg.bounds.normalize(rec.lat, rec.lon);
    rec.x = xy[0];
    rec.y = xy[1];
  }
  return reg;
}

}  // namespace mobtcast::data
