#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mobtcast/data/categories.hpp"
#include "mobtcast/data/checkin.hpp"

namespace mobtcast::data {

/// Min-max bounds per axis. Normalized x is longitude, y is latitude.
struct NormalizationBounds {
  double lon_min = 0.0;
  double lon_max = 0.0;
  double lat_min = 0.0;
  double lat_max = 0.0;

  /// Maps into [-1, 1]^2, clamping out-of-bounds points; a degenerate axis maps to 0.
  std::array<double, 2> normalize(double lat, double lon) const;
  /// Inverse of normalize for in-bounds points; returns {lat, lon}.
  std::array<double, 2> denormalize(double x, double y) const;

  bool operator==(const NormalizationBounds&) const = default;
};

struct PoiRecord {
  double lat = 0.0;
  double lon = 0.0;
  double x = 0.0;
  double y = 0.0;
  int category_id = 0;
  std::string raw_category;
};

struct PoiRegistry {
  std::vector<PoiRecord> pois;
  NormalizationBounds bounds;
  std::vector<std::string> category_names;
  /// Raw labels that fell into Other, with occurrence counts (per POI).
  std::map<std::string, std::size_t> unknown_categories;

  std::size_t size() const noexcept { return pois.size(); }
  int num_categories() const noexcept { return static_cast<int>(category_names.size()); }
};

/// Marks each record of the log that lies in its user's training segment
/// (first floor(train_frac * count) check-ins).
std::vector<std::uint8_t> training_mask(const CheckInLog& log, double train_frac = 0.8);

/// POI coordinates and category come from the POI's first record. Bounds are
/// fitted over records with fit_mask set (all records when fit_mask is empty).
PoiRegistry build_poi_registry(const CheckInLog& log, const CategoryScheme& scheme,
                               const std::vector<std::uint8_t>& fit_mask = {});

}  // namespace mobtcast::data
