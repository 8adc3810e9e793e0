#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "mobtcast/data/checkin.hpp"
#include "mobtcast/data/registry.hpp"

namespace mobtcast::data {

/// One check-in reduced to model inputs.
struct Visit {
  std::int64_t poi = 0;
  int category = 0;
  int slot = 0;
  double x = 0.0;
  double y = 0.0;
  std::int64_t timestamp = 0;
};

/// Per-user chronological visit sequences, indexed by dense user id.
struct UserSequences {
  std::vector<std::vector<Visit>> users;
};

UserSequences encode_sequences(const CheckInLog& log, const PoiRegistry& registry);

struct TrajectoryWindow {
  std::int64_t user_id = 0;
  /// Index of the target inside the user's sequence (history is [t - n, t)).
  std::size_t target_index = 0;
  std::vector<std::int64_t> poi_ids;
  std::vector<int> category_ids;
  std::vector<int> time_slots;
  std::vector<std::array<double, 2>> coords;
  std::int64_t target_poi_id = 0;
  std::array<double, 2> target_coord{};
  int target_time_slot = 0;
  std::int64_t target_timestamp = 0;
  /// Timestamp of the last history check-in (cutoff for neighbor histories).
  std::int64_t history_end_timestamp = 0;

  std::size_t length() const noexcept { return poi_ids.size(); }
};

TrajectoryWindow make_window(std::span<const Visit> sequence, std::int64_t user, std::size_t target_index,
                             std::size_t n);

/// Stride-1 windows: every index >= n becomes a target.
std::vector<TrajectoryWindow> window_sequences(std::span<const Visit> sequence, std::int64_t user, std::size_t n);

/// floor(train_frac * count).
std::size_t training_segment_length(std::size_t count, double train_frac);

/// Per-user chronological partition by check-in index.
struct SplitBounds {
  std::size_t train_end = 0;  // train targets: [0, train_end)
  std::size_t val_end = 0;    // validation targets: [train_end, val_end)
  std::size_t count = 0;      // test targets: [val_end, count)
};

/// floor(train_frac * count) check-ins form the training segment; the last
/// floor(val_frac_of_train * segment) of them are validation targets.
SplitBounds split_bounds(std::size_t count, double train_frac = 0.8, double val_frac_of_train = 0.1);

struct DatasetSplit {
  std::vector<TrajectoryWindow> train;
  std::vector<TrajectoryWindow> validation;
  std::vector<TrajectoryWindow> test;
};

DatasetSplit split(const UserSequences& sequences, std::size_t n, double train_frac = 0.8,
                   double val_frac_of_train = 0.1);

}  // namespace mobtcast::data
