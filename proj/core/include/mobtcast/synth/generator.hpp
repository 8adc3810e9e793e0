#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "mobtcast/data/checkin.hpp"

namespace mobtcast::synth {

struct SynthConfig {
  std::size_t n_users = 50;
  std::size_t n_pois = 100;
  /// Drawn from the Foursquare high-level list (Food always included); at most 9.
  std::size_t n_categories = 8;
  std::size_t n_groups = 10;
  /// Chance that the next category follows the planted table instead of the user's favourites.
  double semantic_strength = 0.5;
  /// Chance that the next POI is copied from the group leader's latest visit.
  double social_strength = 0.5;
  /// Chance that the next POI is drawn within geo_radius of the current one.
  double geo_strength = 0.5;
  double geo_radius = 0.3;
  std::size_t checkins_per_user = 40;
  /// Favourite POIs per user used by the fallback mechanism.
  std::size_t favourites = 5;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthPoi {
  double x = 0.0;  // [-1, 1]
  double y = 0.0;
  int category = 0;  // index into SynthCorpus::category_names
};

struct SynthCorpus {
  data::CheckInLog log;
  /// Group of each dense user id.
  std::vector<std::size_t> groups;
  std::vector<SynthPoi> pois;  // by generator POI index ("poi<i>" keys)
  std::vector<std::string> category_names;
  /// Which mechanism produced each record of `log` (same order).
  std::vector<char> mechanism;
};

inline constexpr char kMechSocial = 's';
inline constexpr char kMechGeo = 'g';
inline constexpr char kMechSemantic = 'c';
inline constexpr char kMechBase = 'b';

/// Seed-deterministic corpus. Per check-in, social, geographic and semantic
/// draws are tried in that order; the first that fires picks the POI, else a
/// user favourite. A group's first member leads and never copies. Gaps are gamma(shape 2, mean 4h) in local time UTC-4.
SynthCorpus generate(const SynthConfig& config);

/// "user_key<TAB>group" lines.
void write_groups(std::ostream& out, const SynthCorpus& corpus);
/// Reads groups for the users of `log` (unknown keys are skipped, missing users get no group).
std::vector<std::int64_t> read_groups(const std::filesystem::path& path, const data::CheckInLog& log);

/// Friends are all other members of the same group (-1 means no group).
std::vector<std::vector<std::int64_t>> groups_to_friends(const std::vector<std::int64_t>& groups);

}  // namespace mobtcast::synth
