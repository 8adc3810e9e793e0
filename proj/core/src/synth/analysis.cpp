#include "mobtcast/synth/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "mobtcast/diff/random.hpp"
#include "mobtcast/diff/tensor.hpp"

namespace mobtcast::synth {

namespace {

double dist(const Point& a, const Point& b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

int local_hour(std::int64_t ts, int tz_minutes) {
  const std::int64_t local = ts + static_cast<std::int64_t>(tz_minutes) * 60;
  return static_cast<int>((((local % 86400) + 86400) % 86400) / 3600);
}

}  // namespace

HourlyHistogram hourly_category_histogram(const data::CheckInLog& log, const data::PoiRegistry& registry) {
  HourlyHistogram hist(registry.category_names.size(), std::array<std::uint64_t, 24>{});
  for (const auto& r : log.records) {
    const auto cat = static_cast<std::size_t>(registry.pois.at(static_cast<std::size_t>(r.poi_id)).category_id);
    ++hist.at(cat)[static_cast<std::size_t>(local_hour(r.timestamp_utc, r.tz_offset_minutes))];
  }
  return hist;
}

void write_histogram_csv(std::ostream& out, const HourlyHistogram& hist, const std::vector<std::string>& names) {
  out << "category";
  for (int h = 0; h < 24; ++h) out << ",h" << h;
  out << '\n';
  for (std::size_t c = 0; c < hist.size(); ++c) {
    std::string name = c < names.size() ? names[c] : std::to_string(c);
    if (name.find(',') != std::string::npos) name = '"' + name + '"';
    out << name;
    for (auto v : hist[c]) out << ',' << v;
    out << '\n';
  }
}

double dtw_distance(std::span<const Point> a, std::span<const Point> b) {
  if (a.empty() || b.empty()) throw Error("dtw_distance: empty sequence");
  const std::size_t m = b.size();
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> prev(m, inf), cur(m, inf);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double best;
      if (i == 0 && j == 0) {
        best = 0.0;
      } else {
        best = inf;
        if (i > 0) best = std::min(best, prev[j]);
        if (j > 0) best = std::min(best, cur[j - 1]);
        if (i > 0 && j > 0) best = std::min(best, prev[j - 1]);
      }
      cur[j] = best + dist(a[i], b[j]);
    }
    std::swap(prev, cur);
  }
  return prev[m - 1];
}

std::vector<TrajClip> clip_split(std::span<const std::int64_t> ts, std::int64_t max_gap) {
  std::vector<TrajClip> clips;
  if (ts.empty()) return clips;
  std::size_t begin = 0;
  for (std::size_t i = 1; i < ts.size(); ++i) {
    if (ts[i] - ts[i - 1] > max_gap) {
      clips.push_back({begin, i});
      begin = i;
    }
  }
  clips.push_back({begin, ts.size()});
  return clips;
}

ClipDistanceStats clip_distance_stats(const std::vector<std::vector<Point>>& clips, std::uint64_t seed,
                                      std::size_t cap) {
  ClipDistanceStats s;
  double intra = 0.0;
  std::vector<std::pair<std::size_t, std::size_t>> points;  // (clip, index)
  for (std::size_t c = 0; c < clips.size(); ++c) {
    const auto& clip = clips[c];
    for (std::size_t i = 0; i < clip.size(); ++i) {
      points.emplace_back(c, i);
      for (std::size_t j = i + 1; j < clip.size(); ++j) {
        intra += dist(clip[i], clip[j]);
        ++s.intra_pairs;
      }
    }
  }
  if (s.intra_pairs) s.intra = intra / static_cast<double>(s.intra_pairs);

  std::size_t nonempty = 0;
  for (const auto& c : clips) nonempty += !c.empty();
  if (nonempty < 2) return s;

  // Cross-clip pair count: all pairs minus within-clip pairs.
  const double total = static_cast<double>(points.size());
  double cross = total * (total - 1) / 2 - static_cast<double>(s.intra_pairs);
  double inter = 0.0;
  if (cross <= static_cast<double>(cap)) {
    for (std::size_t a = 0; a < points.size(); ++a) {
      for (std::size_t b = a + 1; b < points.size(); ++b) {
        if (points[a].first == points[b].first) continue;
        inter += dist(clips[points[a].first][points[a].second], clips[points[b].first][points[b].second]);
        ++s.inter_pairs;
      }
    }
  } else {
    s.sampled = true;
    const std::uint64_t root = diff::derive_seed(seed, "sampling");
    std::uint64_t counter = 0;
    auto draw = [&] {
      const double u = diff::unit_interval(diff::derive_seed(root, counter++));
      return std::min(points.size() - 1, static_cast<std::size_t>(u * static_cast<double>(points.size())));
    };
    while (s.inter_pairs < cap) {
      const auto a = draw();
      const auto b = draw();
      if (points[a].first == points[b].first) continue;
      inter += dist(clips[points[a].first][points[a].second], clips[points[b].first][points[b].second]);
      ++s.inter_pairs;
    }
  }
  s.inter = inter / static_cast<double>(s.inter_pairs);
  return s;
}

std::vector<std::vector<Point>> user_clips(const data::UserSequences& sequences, std::int64_t max_gap) {
  std::vector<std::vector<Point>> out;
  for (const auto& seq : sequences.users) {
    std::vector<std::int64_t> ts;
    for (const auto& v : seq) ts.push_back(v.timestamp);
    for (const auto& c : clip_split(ts, max_gap)) {
      std::vector<Point> pts;
      for (std::size_t i = c.begin; i < c.end; ++i) pts.push_back({seq[i].x, seq[i].y});
      out.push_back(std::move(pts));
    }
  }
  return out;
}

std::vector<std::vector<Point>> user_trajectories(const data::UserSequences& sequences, std::size_t max_len) {
  std::vector<std::vector<Point>> out;
  for (const auto& seq : sequences.users) {
    const std::size_t start = max_len && seq.size() > max_len ? seq.size() - max_len : 0;
    std::vector<Point> pts;
    for (std::size_t i = start; i < seq.size(); ++i) pts.push_back({seq[i].x, seq[i].y});
    out.push_back(std::move(pts));
  }
  return out;
}

FriendStrangerDtw dtw_friend_vs_stranger(const std::vector<std::vector<Point>>& traj,
                                         const std::vector<std::vector<std::int64_t>>& friends, std::uint64_t seed) {
  if (friends.size() != traj.size()) throw Error("dtw_friend_vs_stranger: friend lists do not match users");
  FriendStrangerDtw r;
  double fsum = 0.0, ssum = 0.0;
  const std::uint64_t root = diff::derive_seed(seed, "sampling");
  for (std::size_t u = 0; u < traj.size(); ++u) {
    if (traj[u].empty() || friends[u].empty()) continue;
    std::vector<std::uint8_t> excluded(traj.size(), 0);
    excluded[u] = 1;
    std::size_t nf = 0;
    for (auto v : friends[u]) {
      const auto vi = static_cast<std::size_t>(v);
      excluded.at(vi) = 1;
      if (traj[vi].empty()) continue;
      fsum += dtw_distance(traj[u], traj[vi]);
      ++r.friend_pairs;
      ++nf;
    }
    std::vector<std::size_t> pool;
    for (std::size_t v = 0; v < traj.size(); ++v) {
      if (!excluded[v] && !traj[v].empty()) pool.push_back(v);
    }
    // Partial Fisher-Yates: the first nf entries form the sample.
    const std::uint64_t stream = diff::derive_seed(root, static_cast<std::uint64_t>(u));
    const std::size_t take = std::min(nf, pool.size());
    for (std::size_t i = 0; i < take; ++i) {
      const double x = diff::unit_interval(diff::derive_seed(stream, static_cast<std::uint64_t>(i)));
      const std::size_t j = i + std::min(pool.size() - i - 1, static_cast<std::size_t>(x * static_cast<double>(pool.size() - i)));
      std::swap(pool[i], pool[j]);
      ssum += dtw_distance(traj[u], traj[pool[i]]);
      ++r.stranger_pairs;
    }
  }
  if (r.friend_pairs) r.friend_mean = fsum / static_cast<double>(r.friend_pairs);
  if (r.stranger_pairs) r.stranger_mean = ssum / static_cast<double>(r.stranger_pairs);
  return r;
}

}  // namespace mobtcast::synth
