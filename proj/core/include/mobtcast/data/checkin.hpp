#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mobtcast::data {

enum class Format { foursquare, gowalla };

Format parse_format(std::string_view name);
std::string_view format_name(Format format);

struct CheckIn {
  std::int64_t user_id = 0;
  std::int64_t poi_id = 0;
  std::int64_t timestamp_utc = 0;
  double lat = 0.0;
  double lon = 0.0;
  int tz_offset_minutes = 0;
  std::string raw_category;
};

/// Check-ins grouped by user (ascending dense id), each user's records in
/// ascending time. Dense ids follow first appearance in the source.
struct CheckInLog {
  std::vector<CheckIn> records;
  std::vector<std::string> user_keys;
  std::vector<std::string> poi_keys;
  /// records[user_offsets[u] .. user_offsets[u + 1]) belong to user u.
  std::vector<std::size_t> user_offsets{0};

  std::size_t total_lines = 0;
  std::size_t malformed_lines = 0;
  std::vector<std::string> malformed_samples;

  std::size_t num_users() const noexcept { return user_keys.size(); }
  std::size_t num_pois() const noexcept { return poi_keys.size(); }
  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }
  std::span<const CheckIn> user(std::size_t u) const {
    return {records.data() + user_offsets.at(u), user_offsets.at(u + 1) - user_offsets.at(u)};
  }
};

/// One record before id densification.
struct RawCheckIn {
  std::string user_key;
  std::string poi_key;
  std::int64_t timestamp_utc = 0;
  double lat = 0.0;
  double lon = 0.0;
  int tz_offset_minutes = 0;
  std::string raw_category;
};

/// Densifies ids and sorts stably per user by time.
CheckInLog build_log(std::vector<RawCheckIn> raw);

struct ParseOptions {
  /// Parsing fails when more than this fraction of non-empty lines is malformed.
  double max_malformed_fraction = 0.01;
  std::size_t max_samples = 5;
  /// Gowalla only: optional "location_id<TAB>raw category" file.
  std::filesystem::path gowalla_categories;
};

CheckInLog parse_checkins(const std::filesystem::path& path, Format format, const ParseOptions& options = {});
CheckInLog parse_checkins(std::istream& in, Format format, const ParseOptions& options = {},
                          std::string_view source = "<stream>");

/// Writes the log in the Foursquare TSV layout (category id column = raw label).
void write_foursquare(std::ostream& out, const CheckInLog& log);

}  // namespace mobtcast::data
