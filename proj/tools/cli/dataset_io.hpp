#pragma once

#include <filesystem>
#include <string>

#include "mobtcast/data/checkin.hpp"
#include "mobtcast/data/registry.hpp"

namespace mobtcast::cli {

/// What `ingest` leaves on disk: the densified log plus the POI registry,
/// reloadable with identical ids, coordinates and bounds.
struct Dataset {
  data::CheckInLog log;
  data::PoiRegistry registry;
};

inline constexpr const char* kUsersFile = "users.tsv";
inline constexpr const char* kPoisFile = "pois.tsv";
inline constexpr const char* kCheckinsFile = "checkins.tsv";
inline constexpr const char* kCategoriesFile = "categories.tsv";
inline constexpr const char* kSplitsFile = "splits.tsv";
inline constexpr const char* kDatasetFile = "dataset.json";

/// Writes the id tables and the registry. `meta` is the dataset.json body.
void write_dataset(const std::filesystem::path& dir, const Dataset& dataset, const std::string& meta);
/// Throws mobtcast::Error naming the first missing or malformed file.
Dataset read_dataset(const std::filesystem::path& dir);

/// Round-trippable text form of a double.
std::string format_double(double v);

}  // namespace mobtcast::cli
