#include "mobtcast/data/windows.hpp"

#include <cmath>

#include "mobtcast/data/time.hpp"
#include "mobtcast/diff/tensor.hpp"

namespace mobtcast::data {

// The epsilon absorbs products like 0.8 * 100.
std::size_t training_segment_length(std::size_t count, double train_frac) {
  return static_cast<std::size_t>(std::floor(train_frac * static_cast<double>(count) + 1e-9));
}

UserSequences encode_sequences(const CheckInLog& log, const PoiRegistry& registry) {
  if (registry.size() != log.num_pois()) throw Error("registry does not match check-in log");
  UserSequences out;
  out.users.resize(log.num_users());
  for (std::size_t u = 0; u < log.num_users(); ++u) {
    auto& seq = out.users[u];
    for (const auto& c : log.user(u)) {
      const auto& poi = registry.pois[static_cast<std::size_t>(c.poi_id)];
      seq.push_back(Visit{c.poi_id, poi.category_id, time_slot(c.timestamp_utc, c.tz_offset_minutes), poi.x, poi.y,
                          c.timestamp_utc});
    }
  }
  return out;
}

TrajectoryWindow make_window(std::span<const Visit> sequence, std::int64_t user, std::size_t target_index,
                             std::size_t n) {
  if (n == 0 || target_index < n || target_index >= sequence.size()) {
    throw Error("make_window: target index " + std::to_string(target_index) + " invalid for n=" +
                std::to_string(n) + " and " + std::to_string(sequence.size()) + " check-ins");
  }
  TrajectoryWindow w;
  w.user_id = user;
  w.target_index = target_index;
  w.poi_ids.reserve(n);
  w.category_ids.reserve(n);
  w.time_slots.reserve(n);
  w.coords.reserve(n);
  for (std::size_t i = target_index - n; i < target_index; ++i) {
    const auto& v = sequence[i];
    w.poi_ids.push_back(v.poi);
    w.category_ids.push_back(v.category);
    w.time_slots.push_back(v.slot);
    w.coords.push_back({v.x, v.y});
  }
  const auto& t = sequence[target_index];
  w.target_poi_id = t.poi;
  w.target_coord = {t.x, t.y};
  w.target_time_slot = t.slot;
  w.target_timestamp = t.timestamp;
  w.history_end_timestamp = sequence[target_index - 1].timestamp;
  return w;
}

std::vector<TrajectoryWindow> window_sequences(std::span<const Visit> sequence, std::int64_t user, std::size_t n) {
  if (n == 0) throw Error("window_sequences: n must be >= 1");
  std::vector<TrajectoryWindow> out;
  for (std::size_t t = n; t < sequence.size(); ++t) out.push_back(make_window(sequence, user, t, n));
  return out;
}

SplitBounds split_bounds(std::size_t count, double train_frac, double val_frac_of_train) {
  if (!(train_frac > 0.0 && train_frac < 1.0) || !(val_frac_of_train > 0.0 && val_frac_of_train < 1.0)) {
    throw Error("split fractions must lie in (0, 1)");
  }
  const std::size_t segment = training_segment_length(count, train_frac);
  const std::size_t val = training_segment_length(segment, val_frac_of_train);
  return {segment - val, segment, count};
}

DatasetSplit split(const UserSequences& sequences, std::size_t n, double train_frac, double val_frac_of_train) {
  if (n == 0) throw Error("split: n must be >= 1");
  DatasetSplit out;
  for (std::size_t u = 0; u < sequences.users.size(); ++u) {
    const auto& seq = sequences.users[u];
    const auto b = split_bounds(seq.size(), train_frac, val_frac_of_train);
    for (std::size_t t = n; t < seq.size(); ++t) {
      auto w = make_window(seq, static_cast<std::int64_t>(u), t, n);
      auto& bucket = t < b.train_end ? out.train : (t < b.val_end ? out.validation : out.test);
      bucket.push_back(std::move(w));
    }
  }
  return out;
}

}  // namespace mobtcast::data
