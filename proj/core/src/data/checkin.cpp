#include "mobtcast/data/checkin.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "mobtcast/data/time.hpp"
#include "mobtcast/diff/tensor.hpp"

namespace mobtcast::data {
namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return fields;
}

bool parse_double(std::string_view s, double& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

bool parse_int(std::string_view s, int& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool valid_coords(double lat, double lon) { return lat >= -90.0 && lat <= 90.0 && lon >= -180.0 && lon <= 180.0; }

bool parse_foursquare_line(std::string_view line, RawCheckIn& rec) {
  const auto f = split_tabs(line);
  if (f.size() != 8 || f[0].empty() || f[1].empty()) return false;
  rec.user_key = f[0];
  rec.poi_key = f[1];
  rec.raw_category = f[3];
  if (!parse_double(f[4], rec.lat) || !parse_double(f[5], rec.lon) || !valid_coords(rec.lat, rec.lon)) return false;
  if (!parse_int(f[6], rec.tz_offset_minutes)) return false;
  auto ts = parse_foursquare_time(f[7]);
  if (!ts) return false;
  rec.timestamp_utc = *ts;
  return true;
}

bool parse_gowalla_line(std::string_view line, RawCheckIn& rec) {
  const auto f = split_tabs(line);
  if (f.size() != 5 || f[0].empty() || f[4].empty()) return false;
  rec.user_key = f[0];
  rec.poi_key = f[4];
  if (!parse_double(f[2], rec.lat) || !parse_double(f[3], rec.lon) || !valid_coords(rec.lat, rec.lon)) return false;
  auto ts = parse_iso8601(f[1]);
  if (!ts) return false;
  rec.timestamp_utc = *ts;
  rec.tz_offset_minutes = 0;
  return true;
}

std::unordered_map<std::string, std::string> read_category_file(const std::filesystem::path& path) {
  std::unordered_map<std::string, std::string> out;
  std::ifstream in(path);
  if (!in) throw Error("cannot read POI category file " + path.string());
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto tab = line.find('\t');
    if (line.empty() || tab == std::string::npos) continue;
    out.emplace(line.substr(0, tab), line.substr(tab + 1));
  }
  return out;
}

}  // namespace

Format parse_format(std::string_view name) {
  if (name == "foursquare") return Format::foursquare;
  if (name == "gowalla") return Format::gowalla;
  throw Error("unknown check-in format '" + std::string(name) + "' (expected foursquare or gowalla)");
}

std::string_view format_name(Format format) { return format == Format::foursquare ? "foursquare" : "gowalla"; }

CheckInLog build_log(std::vector<RawCheckIn> raw) {
  CheckInLog log;
  std::unordered_map<std::string, std::int64_t> users;
  std::unordered_map<std::string, std::int64_t> pois;
  std::vector<CheckIn> records;
  records.reserve(raw.size());
  for (auto& r : raw) {
    auto [uit, unew] = users.try_emplace(r.user_key, static_cast<std::int64_t>(log.user_keys.size()));
    if (unew) log.user_keys.push_back(r.user_key);
    auto [pit, pnew] = pois.try_emplace(r.poi_key, static_cast<std::int64_t>(log.poi_keys.size()));
    if (pnew) log.poi_keys.push_back(r.poi_key);
    records.push_back(CheckIn{uit->second, pit->second, r.timestamp_utc, r.lat, r.lon, r.tz_offset_minutes,
                              std::move(r.raw_category)});
  }
  std::stable_sort(records.begin(), records.end(), [](const CheckIn& a, const CheckIn& b) {
    return a.user_id != b.user_id ? a.user_id < b.user_id : a.timestamp_utc < b.timestamp_utc;
  });
  log.records = std::move(records);
  log.user_offsets.assign(log.user_keys.size() + 1, 0);
  for (const auto& c : log.records) ++log.user_offsets[static_cast<std::size_t>(c.user_id) + 1];
  std::partial_sum(log.user_offsets.begin(), log.user_offsets.end(), log.user_offsets.begin());
  return log;
}

CheckInLog parse_checkins(std::istream& in, Format format, const ParseOptions& options, std::string_view source) {
  std::vector<RawCheckIn> raw;
  std::size_t total = 0;
  std::size_t bad = 0;
  std::vector<std::string> samples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++total;
    RawCheckIn rec;
    const bool ok = format == Format::foursquare ? parse_foursquare_line(line, rec) : parse_gowalla_line(line, rec);
    if (ok) {
      raw.push_back(std::move(rec));
    } else {
      ++bad;
      if (samples.size() < options.max_samples) samples.push_back("line " + std::to_string(line_no) + ": " + line);
    }
  }
  if (total > 0 && static_cast<double>(bad) > options.max_malformed_fraction * static_cast<double>(total)) {
    std::ostringstream msg;
    msg << source << ": " << bad << " of " << total << " lines malformed for format " << format_name(format);
    for (const auto& s : samples) msg << "\n  " << s;
    throw Error(msg.str());
  }
  if (format == Format::gowalla && !options.gowalla_categories.empty()) {
    const auto cats = read_category_file(options.gowalla_categories);
    for (auto& r : raw) {
      if (auto it = cats.find(r.poi_key); it != cats.end()) r.raw_category = it->second;
    }
  }
  CheckInLog log = build_log(std::move(raw));
  log.total_lines = total;
  log.malformed_lines = bad;
  log.malformed_samples = std::move(samples);
  return log;
}

CheckInLog parse_checkins(const std::filesystem::path& path, Format format, const ParseOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read check-in file " + path.string());
  return parse_checkins(in, format, options, path.string());
}

void write_foursquare(std::ostream& out, const CheckInLog& log) {
  char buf[64];
  for (const auto& c : log.records) {
    out << log.user_keys[static_cast<std::size_t>(c.user_id)] << '\t' << log.poi_keys[static_cast<std::size_t>(c.poi_id)]
        << '\t' << c.raw_category << '\t' << c.raw_category << '\t';
    auto r = std::to_chars(buf, buf + sizeof buf, c.lat);
    out.write(buf, r.ptr - buf);
    out << '\t';
    r = std::to_chars(buf, buf + sizeof buf, c.lon);
    out.write(buf, r.ptr - buf);
    out << '\t' << c.tz_offset_minutes << '\t' << format_foursquare_time(c.timestamp_utc) << '\n';
  }
}

}  // namespace mobtcast::data
