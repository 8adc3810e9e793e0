#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace mobtcast::data {

inline constexpr int kTimeSlots = 168;

/// Hour-of-week slot in local time: weekday * 24 + hour, Monday = 0.
int time_slot(std::int64_t timestamp_utc, int tz_offset_minutes);

/// "Tue Apr 03 18:00:09 +0000 2012" -> seconds since epoch (UTC).
std::optional<std::int64_t> parse_foursquare_time(std::string_view text);

/// "2010-10-19T23:55:27Z" (also accepts a space separator and no "Z").
std::optional<std::int64_t> parse_iso8601(std::string_view text);

/// Inverse helper used by writers: "YYYY-MM-DDTHH:MM:SSZ".
std::string format_iso8601(std::int64_t timestamp_utc);
/// "Www Mmm DD HH:MM:SS +0000 YYYY" in UTC.
std::string format_foursquare_time(std::int64_t timestamp_utc);

}  // namespace mobtcast::data
