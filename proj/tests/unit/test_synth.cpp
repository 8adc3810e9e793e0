#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <fstream>
#include <limits>
#include <sstream>

#include "mobtcast/data/categories.hpp"
#include "mobtcast/data/registry.hpp"
#include "mobtcast/diff/random.hpp"
#include "mobtcast/social/social.hpp"
#include "mobtcast/synth/analysis.hpp"
#include "mobtcast/synth/generator.hpp"
#include "mobtcast/train/ablation.hpp"

using namespace mobtcast;
using namespace mobtcast::synth;

namespace {

SynthConfig planted(double semantic, double social, double geo, std::uint64_t seed) {
  SynthConfig c;
  c.semantic_strength = semantic;
  c.social_strength = social;
  c.geo_strength = geo;
  c.seed = seed;
  return c;
}

double groupmate_similarity(const SynthCorpus& s) {
  const auto vectors = social::build_checkin_vectors(s.log);
  double sum = 0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < s.groups.size(); ++a) {
    for (std::size_t b = a + 1; b < s.groups.size(); ++b) {
      if (s.groups[a] != s.groups[b]) continue;
      sum += social::cosine_similarity(vectors[a], vectors[b]);
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

std::vector<std::int64_t> signed_groups(const SynthCorpus& s) {
  return {s.groups.begin(), s.groups.end()};
}

}  // namespace

TEST(Generator, DeterministicAndSized) {
  const auto cfg = planted(0.5, 0.5, 0.5, 3);
  const auto a = generate(cfg);
  const auto b = generate(cfg);
  std::ostringstream sa, sb;
  data::write_foursquare(sa, a.log);
  data::write_foursquare(sb, b.log);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(a.log.num_users(), cfg.n_users);
  for (std::size_t u = 0; u < a.log.num_users(); ++u) EXPECT_EQ(a.log.user(u).size(), cfg.checkins_per_user);
  EXPECT_LE(a.log.num_pois(), cfg.n_pois);
  EXPECT_EQ(a.category_names.size(), cfg.n_categories);
  EXPECT_EQ(a.mechanism.size(), a.log.size());
}

TEST(Generator, OutputParsesBackUnchanged) {
  const auto s = generate(planted(0.3, 0.3, 0.3, 1));
  std::ostringstream out;
  data::write_foursquare(out, s.log);
  std::istringstream in(out.str());
  const auto parsed = data::parse_checkins(in, data::Format::foursquare);
  ASSERT_EQ(parsed.size(), s.log.size());
  EXPECT_EQ(parsed.user_keys, s.log.user_keys);
  const auto scheme = data::CategoryScheme::foursquare();
  for (const auto& r : parsed.records) EXPECT_TRUE(scheme.known(r.raw_category)) << r.raw_category;
}

TEST(Generator, ZeroStrengthRemovesMechanism) {
  const auto s = generate(planted(0.0, 0.0, 0.0, 2));
  EXPECT_TRUE(std::all_of(s.mechanism.begin(), s.mechanism.end(), [](char m) { return m == kMechBase; }));
  const auto t = generate(planted(0.0, 0.9, 0.0, 2));
  EXPECT_TRUE(std::none_of(t.mechanism.begin(), t.mechanism.end(), [](char m) { return m == kMechGeo || m == kMechSemantic; }));
  EXPECT_GT(std::count(t.mechanism.begin(), t.mechanism.end(), kMechSocial), 1000);
}

TEST(Generator, ValidatesConfig) {
  auto c = planted(1.5, 0, 0, 0);
  EXPECT_THROW(generate(c), Error);
  c = planted(0, 0, 0, 0);
  c.geo_radius = 0;
  EXPECT_THROW(generate(c), Error);
  c = planted(0, 0, 0, 0);
  c.n_categories = 10;
  EXPECT_THROW(generate(c), Error);
}

TEST(Generator, SocialRaisesGroupmateSimilarity) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    EXPECT_GT(groupmate_similarity(generate(planted(0, 0.8, 0, seed))),
              groupmate_similarity(generate(planted(0, 0.0, 0, seed))));
  }
}

TEST(Generator, SocialSimilarityMonotoneInStrength) {
  std::vector<double> medians;
  for (double strength : {0.0, 0.4, 0.8}) {
    std::vector<double> v;
    for (std::uint64_t seed = 0; seed < 5; ++seed) v.push_back(groupmate_similarity(generate(planted(0, strength, 0, seed))));
    medians.push_back(train::median(v));
  }
  EXPECT_LE(medians[0], medians[1]);
  EXPECT_LE(medians[1], medians[2]);
}

TEST(Histogram, EmptyAndSingle) {
  data::PoiRegistry reg;
  reg.category_names = {"Food", "Other"};
  data::CheckInLog empty;
  for (const auto& row : hourly_category_histogram(empty, reg)) {
    for (auto v : row) EXPECT_EQ(v, 0u);
  }
  data::RawCheckIn r{"u", "p", 1333368000 + 4 * 3600, 40.7, -74.0, -240, "Food"};  // 12:00 local
  const auto log = data::build_log({r});
  reg.pois.push_back({40.7, -74.0, 0, 0, 0, "Food"});
  const auto h = hourly_category_histogram(log, reg);
  for (int hr = 0; hr < 24; ++hr) EXPECT_EQ(h[0][static_cast<std::size_t>(hr)], hr == 12 ? 1u : 0u);
  for (auto v : h[1]) EXPECT_EQ(v, 0u);
}

TEST(Histogram, PlantedNoonFoodPeak) {
  const auto s = generate(planted(0.9, 0, 0, 0));
  const auto scheme = data::CategoryScheme::foursquare();
  const auto reg = data::build_poi_registry(s.log, scheme);
  const auto h = hourly_category_histogram(s.log, reg);
  const auto& food = h.at(static_cast<std::size_t>(scheme.id_of("Food")));
  EXPECT_EQ(std::max_element(food.begin(), food.end()) - food.begin(), 12);
}

TEST(Dtw, Examples) {
  const std::vector<Point> a{{0, 0}, {1, 0}, {2, 1}};
  EXPECT_EQ(dtw_distance(a, a), 0.0);
  const std::vector<Point> p{{0, 0}}, q{{3, 4}};
  EXPECT_DOUBLE_EQ(dtw_distance(p, q), 5.0);
  const std::vector<Point> x{{0, 0}, {1, 0}}, y{{0, 0}, {0, 0}, {1, 0}};
  EXPECT_EQ(dtw_distance(x, y), 0.0);
  EXPECT_THROW(dtw_distance({}, a), Error);
}

namespace {

// Minimum over every monotone path, each path summed from its start cell.
double brute_dtw(const std::vector<Point>& a, const std::vector<Point>& b, std::size_t i, std::size_t j,
                 double acc = 0.0) {
  acc += std::hypot(a[i][0] - b[j][0], a[i][1] - b[j][1]);
  if (i + 1 == a.size() && j + 1 == b.size()) return acc;
  double best = std::numeric_limits<double>::infinity();
  if (i + 1 < a.size()) best = std::min(best, brute_dtw(a, b, i + 1, j, acc));
  if (j + 1 < b.size()) best = std::min(best, brute_dtw(a, b, i, j + 1, acc));
  if (i + 1 < a.size() && j + 1 < b.size()) best = std::min(best, brute_dtw(a, b, i + 1, j + 1, acc));
  return best;
}

std::vector<Point> grid_sequence(std::uint64_t seed) {
  const std::size_t len = 1 + diff::derive_seed(seed, std::uint64_t{0}) % 5;
  std::vector<Point> s;
  for (std::size_t i = 0; i < len; ++i) {
    const auto cell = diff::derive_seed(seed, i + 1) % 9;
    s.push_back({static_cast<double>(cell % 3), static_cast<double>(cell / 3)});
  }
  return s;
}

}  // namespace

TEST(Dtw, MatchesBruteForceAndIsSymmetric) {
  for (std::uint64_t t = 0; t < 300; ++t) {
    const auto a = grid_sequence(2 * t);
    const auto b = grid_sequence(2 * t + 1);
    const double d = dtw_distance(a, b);
    EXPECT_EQ(d, brute_dtw(a, b, 0, 0));
    EXPECT_EQ(d, dtw_distance(b, a));
    EXPECT_GE(d, 0.0);
  }
}

TEST(Clips, Examples) {
  const std::int64_t h = 3600;
  std::vector<std::int64_t> ts{0, h, 8 * h, 10 * h};
  auto c = clip_split(ts);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0].size(), 2u);
  EXPECT_EQ(c[1].size(), 2u);
  ts = {0, 6 * h};
  EXPECT_EQ(clip_split(ts).size(), 1u);
  ts = {0, 8 * h, 17 * h};
  c = clip_split(ts);
  ASSERT_EQ(c.size(), 3u);
  for (const auto& x : c) EXPECT_EQ(x.size(), 1u);
  EXPECT_TRUE(clip_split({}).empty());
}

TEST(Clips, PartitionProperty) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    std::vector<std::int64_t> ts{0};
    const auto len = 1 + diff::derive_seed(s, std::uint64_t{0}) % 30;
    for (std::size_t i = 1; i < len; ++i) ts.push_back(ts.back() + static_cast<std::int64_t>(diff::derive_seed(s, i) % (12 * 3600)));
    const auto clips = clip_split(ts);
    std::size_t expect = 0;
    for (const auto& c : clips) {
      EXPECT_EQ(c.begin, expect);
      EXPECT_GT(c.size(), 0u);
      for (std::size_t i = c.begin + 1; i < c.end; ++i) EXPECT_LE(ts[i] - ts[i - 1], kClipGapSeconds);
      if (c.end < ts.size()) EXPECT_GT(ts[c.end] - ts[c.end - 1], kClipGapSeconds);
      expect = c.end;
    }
    EXPECT_EQ(expect, ts.size());
  }
}

TEST(ClipStats, Examples) {
  const std::vector<std::vector<Point>> same{{{0.2, 0.2}, {0.2, 0.2}}, {{0.2, 0.2}}};
  const auto s = clip_distance_stats(same);
  EXPECT_EQ(*s.intra, 0.0);
  EXPECT_EQ(*s.inter, 0.0);
  const std::vector<std::vector<Point>> singles{{{0, 0}}, {{1, 0}}};
  const auto t = clip_distance_stats(singles);
  EXPECT_FALSE(t.intra.has_value());
  EXPECT_DOUBLE_EQ(*t.inter, 1.0);
}

TEST(ClipStats, SamplingCapIsSeededAndBounded) {
  std::vector<std::vector<Point>> clips;
  for (std::size_t c = 0; c < 50; ++c) clips.push_back({{0.01 * c, 0}, {0.01 * c, 0.5}});
  const auto a = clip_distance_stats(clips, 4, 500);
  const auto b = clip_distance_stats(clips, 4, 500);
  const auto full = clip_distance_stats(clips, 4, 1000000);
  EXPECT_TRUE(a.sampled);
  EXPECT_FALSE(full.sampled);
  EXPECT_EQ(a.inter_pairs, 500u);
  EXPECT_EQ(*a.inter, *b.inter);
  EXPECT_NEAR(*a.inter, *full.inter, 0.05);
}

TEST(ClipStats, PlantedGeoLocality) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto s = generate(planted(0, 0, 0.9, seed));
    const auto scheme = data::CategoryScheme::foursquare();
    const auto reg = data::build_poi_registry(s.log, scheme);
    const auto stats = clip_distance_stats(user_clips(data::encode_sequences(s.log, reg)), seed);
    EXPECT_LT(*stats.intra, *stats.inter);
  }
}

TEST(FriendDtw, Examples) {
  const std::vector<Point> path{{0, 0}, {0.5, 0.5}};
  auto r = dtw_friend_vs_stranger({path, path, path}, {{1}, {0}, {}});
  EXPECT_EQ(r.friend_mean, 0.0);
  EXPECT_EQ(r.stranger_mean, 0.0);
  const std::vector<Point> far{{5, 5}, {5, 5}};
  r = dtw_friend_vs_stranger({path, path, far}, {{1}, {0}, {}});
  EXPECT_EQ(r.friend_mean, 0.0);
  EXPECT_GT(r.stranger_mean, 0.0);
  EXPECT_EQ(r.friend_pairs, 2u);
  EXPECT_EQ(r.stranger_pairs, 2u);
}

TEST(FriendDtw, PlantedSocialSignal) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto s = generate(planted(0, 0.8, 0, seed));
    const auto reg = data::build_poi_registry(s.log, data::CategoryScheme::foursquare());
    const auto traj = user_trajectories(data::encode_sequences(s.log, reg));
    const auto r = dtw_friend_vs_stranger(traj, groups_to_friends(signed_groups(s)), seed);
    EXPECT_LT(r.friend_mean, r.stranger_mean) << "seed " << seed;
  }
}

TEST(Groups, RoundTrip) {
  const auto s = generate(planted(0, 0, 0, 0));
  std::ostringstream out;
  write_groups(out, s);
  const auto path = std::filesystem::temp_directory_path() / "mobtcast_groups_test.tsv";
  {
    std::ofstream f(path);
    f << out.str();
  }
  EXPECT_EQ(read_groups(path, s.log), signed_groups(s));
  std::filesystem::remove(path);
  const auto friends = groups_to_friends({0, 1, 0, -1});
  EXPECT_EQ(friends[0], (std::vector<std::int64_t>{2}));
  EXPECT_TRUE(friends[1].empty());
  EXPECT_TRUE(friends[3].empty());
}
