#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace mobtcast::data {

/// Maps raw venue-category labels onto a small set of high-level categories.
/// The last id is always the reserved "Other" bucket.
class CategoryScheme {
 public:
  static CategoryScheme foursquare();
  static CategoryScheme arcgis();
  /// Tab-separated "raw<TAB>high-level" lines. High-level names become ids in
  /// first-appearance order.
  static CategoryScheme from_file(const std::filesystem::path& path);
  /// Resolves "foursquare", "arcgis" or a path to a table file.
  static CategoryScheme named(std::string_view name_or_path);

  CategoryScheme(std::string name, std::vector<std::string> high_level,
                 const std::vector<std::pair<std::string, std::string>>& table,
                 std::vector<std::pair<std::string, std::string>> keywords = {});

  /// Exact match, then case-insensitive, then keyword containment; else Other.
  int lookup(std::string_view raw) const;
  bool known(std::string_view raw) const { return lookup(raw) != other_id(); }

  const std::string& name() const noexcept { return name_; }
  int other_id() const noexcept { return static_cast<int>(names_.size()) - 1; }
  int size() const noexcept { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  int id_of(std::string_view high_level) const;

 private:
  std::string name_;
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> exact_;
  std::unordered_map<std::string, int> folded_;
  std::vector<std::pair<std::string, int>> keywords_;
};

inline constexpr std::string_view kOtherCategory = "Other";

}  // namespace mobtcast::data
