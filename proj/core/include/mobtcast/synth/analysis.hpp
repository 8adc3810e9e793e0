#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "mobtcast/data/checkin.hpp"
#include "mobtcast/data/registry.hpp"
#include "mobtcast/data/windows.hpp"

namespace mobtcast::synth {

using Point = std::array<double, 2>;

/// counts[category][local hour].
using HourlyHistogram = std::vector<std::array<std::uint64_t, 24>>;

/// Check-ins per (high-level category, local hour). `registry` must be built
/// from the same log (POI ids agree).
HourlyHistogram hourly_category_histogram(const data::CheckInLog& log, const data::PoiRegistry& registry);
void write_histogram_csv(std::ostream& out, const HourlyHistogram& hist, const std::vector<std::string>& names);

/// Classic DTW with Euclidean point cost: the minimum total cost over
/// monotone alignment paths from (0, 0) to (|a|-1, |b|-1).
double dtw_distance(std::span<const Point> a, std::span<const Point> b);

/// [begin, end) index range of one clip.
struct TrajClip {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const noexcept { return end - begin; }
};

inline constexpr std::int64_t kClipGapSeconds = 6 * 3600;

/// Cuts wherever consecutive timestamps differ by more than max_gap.
std::vector<TrajClip> clip_split(std::span<const std::int64_t> timestamps, std::int64_t max_gap = kClipGapSeconds);

struct ClipDistanceStats {
  std::optional<double> intra;  // none when no clip holds two points
  std::optional<double> inter;  // none with fewer than two clips
  std::size_t intra_pairs = 0;
  std::size_t inter_pairs = 0;
  bool sampled = false;
};

/// Mean pairwise distance within clips versus across clips. Cross-clip pairs
/// are enumerated up to `cap`, else `cap` pairs are drawn with `seed`.
ClipDistanceStats clip_distance_stats(const std::vector<std::vector<Point>>& clips, std::uint64_t seed = 0,
                                      std::size_t cap = 100000);

/// Every user's clips as normalized coordinate lists.
std::vector<std::vector<Point>> user_clips(const data::UserSequences& sequences,
                                           std::int64_t max_gap = kClipGapSeconds);

struct FriendStrangerDtw {
  double friend_mean = 0.0;
  double stranger_mean = 0.0;
  std::size_t friend_pairs = 0;
  std::size_t stranger_pairs = 0;
};

/// Per user, DTW to each friend and to an equal number of seeded strangers
/// (fewer if not enough exist). Raw path sums, averaged over all pairs.
FriendStrangerDtw dtw_friend_vs_stranger(const std::vector<std::vector<Point>>& trajectories,
                                         const std::vector<std::vector<std::int64_t>>& friends, std::uint64_t seed = 0);

/// Each user's visits as normalized coordinates, optionally the most recent max_len only.
std::vector<std::vector<Point>> user_trajectories(const data::UserSequences& sequences, std::size_t max_len = 0);

}  // namespace mobtcast::synth
