#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mobtcast::train {

/// -log(max(p_target, 1e-12)).
double loss_poi(std::span<const double> probs, std::int64_t target);
/// Squared Euclidean distance over the two axes.
double loss_traj(std::array<double, 2> pred, std::array<double, 2> target);
/// Squared distance from pred to the coordinate of argmax(probs) (lowest id on ties).
double loss_consistency(std::span<const double> probs, std::array<double, 2> pred,
                        std::span<const std::array<double, 2>> poi_coords);

struct Theta {
  double t1 = 1.0;
  double t2 = 1.0;
  double t3 = 1.0;
};

/// Batch-averaged loss terms.
struct LossBreakdown {
  double l1 = 0.0;
  double l2 = 0.0;
  double l3 = 0.0;
  double total = 0.0;
  std::size_t batch = 0;
};

LossBreakdown total_loss(double l1, double l2, double l3, const Theta& theta, std::size_t batch = 1);

/// Sample-weighted running mean of breakdowns.
void accumulate(LossBreakdown& into, const LossBreakdown& part);

/// 0-based position of `target` when scores are sorted descending, ties by
/// ascending id: #(s > s_t) + #(s == s_t with lower id).
std::size_t target_rank(std::span<const double> scores, std::int64_t target);

inline constexpr std::array<std::size_t, 4> kTopK{1, 5, 10, 20};

struct EvalReport {
  std::array<double, 4> acc{};  // at k = 1, 5, 10, 20
  double mean_aux_dist = 0.0;
  double mean_consistency_dist = 0.0;
  std::uint64_t seed = 0;
  std::size_t count = 0;
  LossBreakdown loss;

  double acc1() const { return acc[0]; }
};

/// Accuracy at each k from 0-based target ranks.
std::array<double, 4> topk_from_ranks(std::span<const std::size_t> ranks);

/// Nearest POI to pred by Euclidean distance (lowest id on ties).
std::int64_t aux_only_predict(std::array<double, 2> pred, std::span<const std::array<double, 2>> poi_coords);
/// Scores for ranking POIs by proximity: negative squared distance.
std::vector<double> aux_only_scores(std::array<double, 2> pred, std::span<const std::array<double, 2>> poi_coords);

/// One metrics-log event.
struct MetricsRecord {
  std::size_t epoch = 0;
  std::string split;
  std::optional<std::array<double, 4>> acc;
  LossBreakdown loss;
  std::optional<double> mean_aux_dist;
  std::optional<double> mean_consistency_dist;
  std::uint64_t seed = 0;
  std::string variant;
};

MetricsRecord to_record(const EvalReport& report, std::size_t epoch, const std::string& split,
                        const std::string& variant);
/// One JSON object per line with keys epoch, split, acc1..acc20, l1, l2, l3,
/// total, mean_aux_dist, mean_consistency_dist, seed, variant.
std::string to_json_line(const MetricsRecord& record);

}  // namespace mobtcast::train
