#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mobtcast/data/checkin.hpp"
#include "mobtcast/data/windows.hpp"

namespace mobtcast::social {

/// Sparse POI visit counts, sorted by POI id.
struct CheckinVector {
  std::vector<std::pair<std::int64_t, std::uint32_t>> counts;

  double norm() const;
  bool empty() const noexcept { return counts.empty(); }
};

/// Visit counts over each user's training segment (first floor(train_frac * count) check-ins).
std::vector<CheckinVector> build_checkin_vectors(const data::CheckInLog& log, double train_frac = 0.8);
std::vector<CheckinVector> build_checkin_vectors(const data::UserSequences& sequences, double train_frac = 0.8);

/// Dense convenience overload, mainly for tests.
double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);
double cosine_similarity(const CheckinVector& a, const CheckinVector& b);

struct Neighbor {
  std::int64_t user = 0;
  double similarity = 0.0;
};

struct NeighborGraph {
  double tau = 0.0;
  /// Per user, by descending similarity then ascending id.
  std::vector<std::vector<Neighbor>> neighbors;

  std::size_t num_users() const noexcept { return neighbors.size(); }
  std::size_t num_edges() const;
  bool connected(std::int64_t a, std::int64_t b) const;
};

/// Edge (i, j) iff cosine similarity > tau.
NeighborGraph discover_neighbors(const std::vector<CheckinVector>& vectors, double tau);

/// Reads "user<TAB>user" (or whitespace-separated) friendship lines given as
/// raw keys. Pairs naming unknown users and self-loops are skipped. Edges are
/// symmetrised; similarity is taken from `vectors` when given, else 1.
NeighborGraph load_edges(const std::filesystem::path& path, const data::CheckInLog& log,
                         const std::vector<CheckinVector>* vectors = nullptr);

/// "user<TAB>neighbor<TAB>similarity" per directed edge, using raw keys when provided.
void export_neighbors(std::ostream& out, const NeighborGraph& graph, const std::vector<std::string>* user_keys = nullptr);
NeighborGraph import_neighbors(std::istream& in, std::size_t num_users, double tau,
                               const std::unordered_map<std::string, std::int64_t>* key_to_id = nullptr);

/// Visits [begin, end) of `user`'s sequence.
struct HistorySpan {
  std::int64_t user = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// Most recent n consecutive check-ins whose last timestamp is <= cutoff.
std::optional<HistorySpan> neighbor_window(const std::vector<data::Visit>& sequence, std::int64_t user,
                                           std::int64_t cutoff, std::size_t n);

inline constexpr std::size_t kDefaultMaxNeighbors = 8;

/// The user's top-k_max neighbors by similarity, keeping those with a feasible
/// window at the cutoff (in the same order).
std::vector<HistorySpan> select_neighbor_windows(const NeighborGraph& graph, const data::UserSequences& sequences,
                                                 std::int64_t user, std::int64_t cutoff, std::size_t n,
                                                 std::size_t k_max = kDefaultMaxNeighbors);

}  // namespace mobtcast::social
