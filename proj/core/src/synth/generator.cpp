#include "mobtcast/synth/generator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <ostream>
#include <unordered_map>

#include "mobtcast/data/categories.hpp"
#include "mobtcast/diff/random.hpp"
#include "mobtcast/diff/tensor.hpp"

namespace mobtcast::synth {

namespace {

using diff::derive_seed;
using diff::unit_interval;

constexpr std::int64_t kStart = 1333339200;  // 2012-04-02 04:00 UTC, a Monday midnight at UTC-4
constexpr int kTzMinutes = -240;
constexpr double kMeanGapSeconds = 4.0 * 3600.0;

/// Uniform draws from a counter-based stream.
class Stream {
 public:
  explicit Stream(std::uint64_t key) : key_(key) {}
  double uniform() { return unit_interval(derive_seed(key_, counter_++)); }
  std::size_t index(std::size_t n) { return std::min(n - 1, static_cast<std::size_t>(uniform() * static_cast<double>(n))); }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

int local_hour(std::int64_t ts) {
  const std::int64_t local = ts + kTzMinutes * 60;
  const std::int64_t day = ((local % 86400) + 86400) % 86400;
  return static_cast<int>(day / 3600);
}

struct Visit {
  std::int64_t ts;
  std::size_t poi;
};

}  // namespace

void SynthConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error("synth config: " + m); };
  if (n_users == 0 || n_pois == 0 || n_categories == 0 || n_groups == 0) fail("counts must be positive");
  if (n_categories > 9) fail("at most 9 categories are available");
  if (n_pois < n_categories) fail("need at least one POI per category");
  if (favourites == 0 || favourites > n_pois) fail("favourites must lie in [1, n_pois]");
  for (double s : {semantic_strength, social_strength, geo_strength}) {
    if (!(s >= 0.0 && s <= 1.0)) fail("strengths must lie in [0, 1]");
  }
  if (!(geo_radius > 0.0 && geo_radius <= 2.0)) fail("geo_radius must lie in (0, 2]");
}

SynthCorpus generate(const SynthConfig& cfg) {
  cfg.validate();
  SynthCorpus out;

  // Categories: Food first so the noon rule always has a target.
  std::vector<std::string> names = data::CategoryScheme::foursquare().names();
  names.pop_back();  // Other
  std::stable_partition(names.begin(), names.end(), [](const std::string& n) { return n == "Food"; });
  names.resize(cfg.n_categories);
  out.category_names = names;
  const int food = 0;
  const int C = static_cast<int>(cfg.n_categories);

  Stream poi_rng(derive_seed(cfg.seed, "synth.pois"));
  out.pois.resize(cfg.n_pois);
  std::vector<std::vector<std::size_t>> by_category(cfg.n_categories);
  for (std::size_t p = 0; p < cfg.n_pois; ++p) {
    auto& poi = out.pois[p];
    poi.x = 2.0 * poi_rng.uniform() - 1.0;
    poi.y = 2.0 * poi_rng.uniform() - 1.0;
    poi.category = p < cfg.n_categories ? static_cast<int>(p) : static_cast<int>(poi_rng.index(cfg.n_categories));
    by_category[static_cast<std::size_t>(poi.category)].push_back(p);
  }

  // Zipf(1.5) cumulative weights within each category, in POI index order.
  std::vector<std::vector<double>> zipf_cdf(cfg.n_categories);
  for (std::size_t c = 0; c < by_category.size(); ++c) {
    double acc = 0.0;
    for (std::size_t r = 0; r < by_category[c].size(); ++r) {
      acc += std::pow(static_cast<double>(r + 1), -1.5);
      zipf_cdf[c].push_back(acc);
    }
    for (double& v : zipf_cdf[c]) v /= acc;
  }

  // Planted category transition.
  std::vector<int> successor(cfg.n_categories);
  std::iota(successor.begin(), successor.end(), 0);
  Stream perm_rng(derive_seed(cfg.seed, "synth.table"));
  for (std::size_t i = successor.size(); i > 1; --i) std::swap(successor[i - 1], successor[perm_rng.index(i)]);

  // Neighbourhoods for the geographic mechanism.
  std::vector<std::vector<std::size_t>> nearby(cfg.n_pois);
  for (std::size_t a = 0; a < cfg.n_pois; ++a) {
    double best = 1e300;
    std::size_t nearest = a;
    for (std::size_t b = 0; b < cfg.n_pois; ++b) {
      if (a == b) continue;
      const double d = std::hypot(out.pois[a].x - out.pois[b].x, out.pois[a].y - out.pois[b].y);
      if (d <= cfg.geo_radius) nearby[a].push_back(b);
      if (d < best) best = d, nearest = b;
    }
    if (nearby[a].empty() && nearest != a) nearby[a].push_back(nearest);
  }

  // Users: groups round-robin, favourites, timestamps.
  const std::size_t U = cfg.n_users;
  const std::size_t K = cfg.checkins_per_user;
  out.groups.resize(U);
  std::vector<std::vector<std::size_t>> favourites(U);
  std::vector<std::vector<std::int64_t>> times(U);
  for (std::size_t u = 0; u < U; ++u) {
    out.groups[u] = u % cfg.n_groups;
    Stream rng(derive_seed(derive_seed(cfg.seed, "synth.user"), static_cast<std::uint64_t>(u)));
    std::vector<std::size_t> all(cfg.n_pois);
    std::iota(all.begin(), all.end(), std::size_t{0});
    for (std::size_t i = 0; i < cfg.favourites; ++i) std::swap(all[i], all[i + rng.index(cfg.n_pois - i)]);
    favourites[u].assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(cfg.favourites));
    double t = static_cast<double>(kStart) + rng.uniform() * 86400.0;
    for (std::size_t i = 0; i < K; ++i) {
      times[u].push_back(static_cast<std::int64_t>(std::floor(t)));
      // Gamma(2, mean/2): sum of two exponentials.
      const double e1 = -std::log(1.0 - rng.uniform());
      const double e2 = -std::log(1.0 - rng.uniform());
      t += std::max(60.0, 0.5 * kMeanGapSeconds * (e1 + e2));
    }
  }

  std::vector<std::vector<std::size_t>> members(cfg.n_groups);
  for (std::size_t u = 0; u < U; ++u) members[out.groups[u]].push_back(u);

  // Global time order so a groupmate's past is fixed before anyone copies it.
  std::vector<std::pair<std::size_t, std::size_t>> events;
  for (std::size_t u = 0; u < U; ++u) {
    for (std::size_t i = 0; i < K; ++i) events.emplace_back(u, i);
  }
  std::stable_sort(events.begin(), events.end(), [&](const auto& a, const auto& b) {
    return times[a.first][a.second] < times[b.first][b.second];
  });

  std::vector<std::vector<Visit>> visits(U);
  std::vector<std::vector<char>> mech(U, std::vector<char>(K, kMechBase));
  const std::uint64_t event_root = derive_seed(cfg.seed, "synth.events");
  for (const auto& [u, i] : events) {
    // Fixed draw schedule per event, whatever fires.
    Stream rng(derive_seed(derive_seed(event_root, static_cast<std::uint64_t>(u)), static_cast<std::uint64_t>(i)));
    const double d_social = rng.uniform(), d_geo = rng.uniform(), d_sem = rng.uniform();
    rng.uniform();  // spare slot in the per-event draw schedule
    const double pick_geo = rng.uniform();
    const double pick_sem = rng.uniform();
    const double pick_cat = rng.uniform(), pick_base = rng.uniform();
    const std::int64_t now = times[u][i];
    const bool has_prev = i > 0;
    const std::size_t prev = has_prev ? visits[u].back().poi : 0;

    std::optional<std::size_t> chosen;
    char how = kMechBase;
    // Groups copy from their first member, who never copies. Chains of copies
    // would otherwise collapse a group onto a single POI.
    const std::size_t leader = members[out.groups[u]].front();
    if (has_prev && u != leader && d_social < cfg.social_strength) {
      const std::int64_t cutoff = times[u][i - 1];
      const auto& source = visits[leader];
      const auto it = std::upper_bound(source.begin(), source.end(), cutoff,
                                       [](std::int64_t t, const Visit& vis) { return t < vis.ts; });
      if (it != source.begin()) {
        chosen = std::prev(it)->poi;
        how = kMechSocial;
      }
    }
    if (!chosen && has_prev && d_geo < cfg.geo_strength && !nearby[prev].empty()) {
      const auto& near = nearby[prev];
      chosen = near[std::min(near.size() - 1, static_cast<std::size_t>(pick_geo * static_cast<double>(near.size())))];
      how = kMechGeo;
    }
    if (!chosen && d_sem < cfg.semantic_strength) {
      int cat;
      if (local_hour(now) == 12) {
        cat = food;
      } else if (has_prev) {
        cat = successor[static_cast<std::size_t>(out.pois[prev].category)];
      } else {
        cat = std::min(C - 1, static_cast<int>(pick_cat * C));
      }
      const auto& cdf = zipf_cdf[static_cast<std::size_t>(cat)];
      const auto r = static_cast<std::size_t>(std::lower_bound(cdf.begin(), cdf.end(), pick_sem) - cdf.begin());
      chosen = by_category[static_cast<std::size_t>(cat)][std::min(r, cdf.size() - 1)];
      how = kMechSemantic;
    }
    if (!chosen) {
      const auto& fav = favourites[u];
      chosen = fav[std::min(fav.size() - 1, static_cast<std::size_t>(pick_base * static_cast<double>(fav.size())))];
    }
    visits[u].push_back({now, *chosen});
    mech[u][i] = how;
  }

  std::vector<data::RawCheckIn> raw;
  raw.reserve(U * K);
  for (std::size_t u = 0; u < U; ++u) {
    for (std::size_t i = 0; i < K; ++i) {
      const auto& v = visits[u][i];
      const auto& poi = out.pois[v.poi];
      data::RawCheckIn r;
      r.user_key = "u" + std::to_string(u);
      r.poi_key = "p" + std::to_string(v.poi);
      r.timestamp_utc = v.ts;
      r.lat = 40.7 + 0.1 * poi.y;
      r.lon = -74.0 + 0.1 * poi.x;
      r.tz_offset_minutes = kTzMinutes;
      r.raw_category = names[static_cast<std::size_t>(poi.category)];
      raw.push_back(std::move(r));
      out.mechanism.push_back(mech[u][i]);
    }
  }
  out.log = data::build_log(std::move(raw));
  return out;
}

void write_groups(std::ostream& out, const SynthCorpus& corpus) {
  for (std::size_t u = 0; u < corpus.groups.size(); ++u) {
    out << corpus.log.user_keys.at(u) << '\t' << corpus.groups[u] << '\n';
  }
}

std::vector<std::int64_t> read_groups(const std::filesystem::path& path, const data::CheckInLog& log) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open groups file " + path.string());
  std::unordered_map<std::string, std::size_t> ids;
  for (std::size_t u = 0; u < log.user_keys.size(); ++u) ids.emplace(log.user_keys[u], u);
  std::vector<std::int64_t> groups(log.num_users(), -1);
  std::string key;
  std::int64_t group = 0;
  while (in >> key >> group) {
    if (auto it = ids.find(key); it != ids.end()) groups[it->second] = group;
  }
  return groups;
}

std::vector<std::vector<std::int64_t>> groups_to_friends(const std::vector<std::int64_t>& groups) {
  std::unordered_map<std::int64_t, std::vector<std::int64_t>> members;
  for (std::size_t u = 0; u < groups.size(); ++u) {
    if (groups[u] >= 0) members[groups[u]].push_back(static_cast<std::int64_t>(u));
  }
  std::vector<std::vector<std::int64_t>> friends(groups.size());
  for (std::size_t u = 0; u < groups.size(); ++u) {
    if (groups[u] < 0) continue;
    for (auto v : members[groups[u]]) {
      if (v != static_cast<std::int64_t>(u)) friends[u].push_back(v);
    }
  }
  return friends;
}

}  // namespace mobtcast::synth
