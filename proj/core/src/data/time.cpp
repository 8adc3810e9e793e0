#include "mobtcast/data/time.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cstdio>

namespace mobtcast::data {
namespace {

constexpr std::int64_t kDay = 86400;

std::int64_t floor_div(std::int64_t a, std::int64_t b) { return a / b - ((a % b != 0) && ((a < 0) != (b < 0))); }
std::int64_t floor_mod(std::int64_t a, std::int64_t b) { return a - floor_div(a, b) * b; }

template <typename T>
bool parse_int(std::string_view s, T& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::optional<std::int64_t> to_epoch(int year, unsigned month, unsigned day, int hh, int mm, int ss) {
  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
  if (!ymd.ok() || hh < 0 || hh > 23 || mm < 0 || mm > 59 || ss < 0 || ss > 60) return std::nullopt;
  const auto days = sys_days{ymd}.time_since_epoch().count();
  return static_cast<std::int64_t>(days) * kDay + hh * 3600 + mm * 60 + ss;
}

bool parse_clock(std::string_view s, int& hh, int& mm, int& ss) {
  if (s.size() != 8 || s[2] != ':' || s[5] != ':') return false;
  return parse_int(s.substr(0, 2), hh) && parse_int(s.substr(3, 2), mm) && parse_int(s.substr(6, 2), ss);
}

}  // namespace

int time_slot(std::int64_t timestamp_utc, int tz_offset_minutes) {
  const std::int64_t local = timestamp_utc + static_cast<std::int64_t>(tz_offset_minutes) * 60;
  const std::int64_t days = floor_div(local, kDay);
  const auto weekday = floor_mod(days + 3, 7);  // 1970-01-01 was a Thursday
  const auto hour = floor_mod(local, kDay) / 3600;
  return static_cast<int>(weekday * 24 + hour);
}

std::optional<std::int64_t> parse_foursquare_time(std::string_view text) {
  static constexpr std::array<std::string_view, 12> kMonths{"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                                            "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
  // Www Mmm DD HH:MM:SS +ZZZZ YYYY
  std::array<std::string_view, 6> parts;
  std::size_t count = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    while (pos < text.size() && text[pos] == ' ') ++pos;
    if (pos >= text.size()) break;
    const auto end = std::min(text.find(' ', pos), text.size());
    if (count == parts.size()) return std::nullopt;
    parts[count++] = text.substr(pos, end - pos);
    pos = end;
  }
  if (count != 6) return std::nullopt;

  unsigned month = 0;
  for (unsigned i = 0; i < kMonths.size(); ++i) {
    if (parts[1] == kMonths[i]) month = i + 1;
  }
  int day = 0;
  int year = 0;
  int hh = 0;
  int mm = 0;
  int ss = 0;
  if (month == 0 || !parse_int(parts[2], day) || !parse_clock(parts[3], hh, mm, ss) || !parse_int(parts[5], year)) {
    return std::nullopt;
  }
  const auto zone = parts[4];
  int zh = 0;
  int zm = 0;
  if (zone.size() != 5 || (zone[0] != '+' && zone[0] != '-') || !parse_int(zone.substr(1, 2), zh) ||
      !parse_int(zone.substr(3, 2), zm)) {
    return std::nullopt;
  }
  auto base = to_epoch(year, month, static_cast<unsigned>(day), hh, mm, ss);
  if (!base) return std::nullopt;
  const int offset = (zone[0] == '-' ? -1 : 1) * (zh * 60 + zm);
  return *base - static_cast<std::int64_t>(offset) * 60;
}

std::optional<std::int64_t> parse_iso8601(std::string_view text) {
  if (!text.empty() && text.back() == 'Z') text.remove_suffix(1);
  if (text.size() != 19 || text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != ' ')) {
    return std::nullopt;
  }
  int year = 0;
  int month = 0;
  int day = 0;
  int hh = 0;
  int mm = 0;
  int ss = 0;
  if (!parse_int(text.substr(0, 4), year) || !parse_int(text.substr(5, 2), month) ||
      !parse_int(text.substr(8, 2), day) || !parse_clock(text.substr(11), hh, mm, ss) || month < 1 || day < 1) {
    return std::nullopt;
  }
  return to_epoch(year, static_cast<unsigned>(month), static_cast<unsigned>(day), hh, mm, ss);
}

std::string format_iso8601(std::int64_t timestamp_utc) {
  using namespace std::chrono;
  const std::int64_t days = floor_div(timestamp_utc, kDay);
  const std::int64_t secs = floor_mod(timestamp_utc, kDay);
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), static_cast<int>(secs / 3600),
                static_cast<int>(secs / 60 % 60), static_cast<int>(secs % 60));
  return buf;
}

std::string format_foursquare_time(std::int64_t timestamp_utc) {
  static constexpr std::array<const char*, 7> kDays{"Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"};
  static constexpr std::array<const char*, 12> kMonths{"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                                       "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
  using namespace std::chrono;
  const std::int64_t days = floor_div(timestamp_utc, kDay);
  const std::int64_t secs = floor_mod(timestamp_utc, kDay);
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s %s %02u %02d:%02d:%02d +0000 %04d", kDays[floor_mod(days + 3, 7)],
                kMonths[static_cast<unsigned>(ymd.month()) - 1], static_cast<unsigned>(ymd.day()),
                static_cast<int>(secs / 3600), static_cast<int>(secs / 60 % 60), static_cast<int>(secs % 60),
                static_cast<int>(ymd.year()));
  return buf;
}

}  // namespace mobtcast::data
