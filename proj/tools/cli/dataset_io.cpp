#include "dataset_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <vector>

#include "mobtcast/diff/tensor.hpp"

namespace mobtcast::cli {

namespace fs = std::filesystem;

namespace {

std::string clean(std::string s) {
  for (char& c : s) {
    if (c == '\t' || c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

/// Tab-separated rows of a table written by write_dataset.
std::vector<std::vector<std::string>> read_table(const fs::path& path, std::size_t columns) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("missing dataset file " + path.string() + " (run ingest first)");
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const auto tab = line.find('\t', start);
      cells.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (cells.size() != columns) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(columns) + " columns");
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

template <typename T>
T number(const std::string& s, const fs::path& where) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw Error(where.string() + ": bad number '" + s + "'");
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_dataset(const fs::path& dir, const Dataset& ds, const std::string& meta) {
  fs::create_directories(dir);
  const auto& log = ds.log;
  {
    auto out = open_out(dir / kUsersFile);
    for (std::size_t u = 0; u < log.num_users(); ++u) out << u << '\t' << clean(log.user_keys[u]) << '\n';
  }
  {
    auto out = open_out(dir / kPoisFile);
    for (std::size_t p = 0; p < ds.registry.size(); ++p) {
      const auto& r = ds.registry.pois[p];
      out << p << '\t' << clean(log.poi_keys[p]) << '\t' << format_double(r.lat) << '\t' << format_double(r.lon) << '\t'
          << format_double(r.x) << '\t' << format_double(r.y) << '\t' << r.category_id << '\t' << clean(r.raw_category)
          << '\n';
    }
  }
  {
    auto out = open_out(dir / kCheckinsFile);
    for (std::size_t u = 0; u < log.num_users(); ++u) {
      for (const auto& c : log.user(u)) {
        out << c.user_id << '\t' << c.poi_id << '\t' << c.timestamp_utc << '\t' << c.tz_offset_minutes << '\t'
            << format_double(c.lat) << '\t' << format_double(c.lon) << '\t' << clean(c.raw_category) << '\n';
      }
    }
  }
  {
    auto out = open_out(dir / kCategoriesFile);
    for (std::size_t k = 0; k < ds.registry.category_names.size(); ++k) {
      out << k << '\t' << clean(ds.registry.category_names[k]) << '\n';
    }
  }
  auto out = open_out(dir / kDatasetFile);
  out << meta << '\n';
}

Dataset read_dataset(const fs::path& dir) {
  Dataset ds;
  auto& log = ds.log;

  for (const auto& row : read_table(dir / kUsersFile, 2)) {
    if (number<std::size_t>(row[0], dir / kUsersFile) != log.user_keys.size()) {
      throw Error((dir / kUsersFile).string() + ": user ids are not dense");
    }
    log.user_keys.push_back(row[1]);
  }

  const fs::path pois_path = dir / kPoisFile;
  for (const auto& row : read_table(pois_path, 8)) {
    if (number<std::size_t>(row[0], pois_path) != log.poi_keys.size()) throw Error(pois_path.string() + ": POI ids are not dense");
    log.poi_keys.push_back(row[1]);
    data::PoiRecord r;
    r.lat = number<double>(row[2], pois_path);
    r.lon = number<double>(row[3], pois_path);
    r.x = number<double>(row[4], pois_path);
    r.y = number<double>(row[5], pois_path);
    r.category_id = number<int>(row[6], pois_path);
    r.raw_category = row[7];
    ds.registry.pois.push_back(std::move(r));
  }

  for (const auto& row : read_table(dir / kCategoriesFile, 2)) ds.registry.category_names.push_back(row[1]);

  const fs::path checkins_path = dir / kCheckinsFile;
  log.user_offsets.assign(1, 0);
  for (const auto& row : read_table(checkins_path, 7)) {
    data::CheckIn c;
    c.user_id = number<std::int64_t>(row[0], checkins_path);
    c.poi_id = number<std::int64_t>(row[1], checkins_path);
    c.timestamp_utc = number<std::int64_t>(row[2], checkins_path);
    c.tz_offset_minutes = number<int>(row[3], checkins_path);
    c.lat = number<double>(row[4], checkins_path);
    c.lon = number<double>(row[5], checkins_path);
    c.raw_category = row[6];
    if (c.user_id < 0 || static_cast<std::size_t>(c.user_id) >= log.num_users() || c.poi_id < 0 ||
        static_cast<std::size_t>(c.poi_id) >= log.num_pois()) {
      throw Error(checkins_path.string() + ": id out of range");
    }
    const auto u = static_cast<std::size_t>(c.user_id);
    if (u + 1 < log.user_offsets.size()) throw Error(checkins_path.string() + ": records are not grouped by user");
    while (log.user_offsets.size() <= u) log.user_offsets.push_back(log.records.size());
    log.records.push_back(std::move(c));
  }
  while (log.user_offsets.size() <= log.num_users()) log.user_offsets.push_back(log.records.size());
  log.total_lines = log.records.size();

  std::ifstream meta_in(dir / kDatasetFile);
  if (!meta_in) throw Error("missing dataset file " + (dir / kDatasetFile).string() + " (run ingest first)");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_in);
    const auto& b = meta.at("bounds");
    ds.registry.bounds = {b.at("lon_min").get<double>(), b.at("lon_max").get<double>(), b.at("lat_min").get<double>(),
                          b.at("lat_max").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw Error((dir / kDatasetFile).string() + ": " + e.what());
  }
  return ds;
}

}  // namespace mobtcast::cli
