#include "mobtcast/train/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "mobtcast/diff/tensor.hpp"

namespace mobtcast::train {

double loss_poi(std::span<const double> probs, std::int64_t target) {
  if (target < 0 || static_cast<std::size_t>(target) >= probs.size()) throw Error("loss_poi: target out of range");
  return -std::log(std::max(probs[static_cast<std::size_t>(target)], 1e-12));
}

double loss_traj(std::array<double, 2> pred, std::array<double, 2> target) {
  const double dx = pred[0] - target[0];
  const double dy = pred[1] - target[1];
  return dx * dx + dy * dy;
}

double loss_consistency(std::span<const double> probs, std::array<double, 2> pred,
                        std::span<const std::array<double, 2>> poi_coords) {
  if (probs.empty() || probs.size() != poi_coords.size()) throw Error("loss_consistency: size mismatch");
  const auto best = static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
  return loss_traj(poi_coords[best], pred);
}

LossBreakdown total_loss(double l1, double l2, double l3, const Theta& theta, std::size_t batch) {
  if (theta.t1 < 0 || theta.t2 < 0 || theta.t3 < 0) throw Error("loss weights must be non-negative");
  LossBreakdown b;
  b.l1 = theta.t1 > 0 ? l1 : 0.0;
  b.l2 = theta.t2 > 0 ? l2 : 0.0;
  b.l3 = theta.t3 > 0 ? l3 : 0.0;
  b.total = theta.t1 * b.l1 + theta.t2 * b.l2 + theta.t3 * b.l3;
  b.batch = batch;
  return b;
}

void accumulate(LossBreakdown& into, const LossBreakdown& part) {
  const double n0 = static_cast<double>(into.batch);
  const double n1 = static_cast<double>(part.batch);
  if (n1 == 0) return;
  const double w = n1 / (n0 + n1);
  into.l1 += w * (part.l1 - into.l1);
  into.l2 += w * (part.l2 - into.l2);
  into.l3 += w * (part.l3 - into.l3);
  into.total += w * (part.total - into.total);
  into.batch += part.batch;
}

std::size_t target_rank(std::span<const double> scores, std::int64_t target) {
  if (target < 0 || static_cast<std::size_t>(target) >= scores.size()) throw Error("target_rank: target out of range");
  const auto t = static_cast<std::size_t>(target);
  const double st = scores[t];
  std::size_t rank = 0;
  for (std::size_t p = 0; p < scores.size(); ++p) rank += scores[p] > st || (scores[p] == st && p < t);
  return rank;
}

std::array<double, 4> topk_from_ranks(std::span<const std::size_t> ranks) {
  std::array<double, 4> acc{};
  if (ranks.empty()) return acc;
  for (std::size_t i = 0; i < kTopK.size(); ++i) {
    const auto hits = std::count_if(ranks.begin(), ranks.end(), [k = kTopK[i]](std::size_t r) { return r < k; });
    acc[i] = static_cast<double>(hits) / static_cast<double>(ranks.size());
  }
  return acc;
}

std::vector<double> aux_only_scores(std::array<double, 2> pred, std::span<const std::array<double, 2>> poi_coords) {
  std::vector<double> s(poi_coords.size());
  for (std::size_t p = 0; p < poi_coords.size(); ++p) s[p] = -loss_traj(pred, poi_coords[p]);
  return s;
}

std::int64_t aux_only_predict(std::array<double, 2> pred, std::span<const std::array<double, 2>> poi_coords) {
  if (poi_coords.empty()) throw Error("aux_only_predict: empty registry");
  const auto s = aux_only_scores(pred, poi_coords);
  return static_cast<std::int64_t>(std::max_element(s.begin(), s.end()) - s.begin());
}

MetricsRecord to_record(const EvalReport& report, std::size_t epoch, const std::string& split,
                        const std::string& variant) {
  MetricsRecord r;
  r.epoch = epoch;
  r.split = split;
  r.acc = report.acc;
  r.loss = report.loss;
  r.mean_aux_dist = report.mean_aux_dist;
  r.mean_consistency_dist = report.mean_consistency_dist;
  r.seed = report.seed;
  r.variant = variant;
  return r;
}

std::string to_json_line(const MetricsRecord& r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["split"] = r.split;
  const char* names[] = {"acc1", "acc5", "acc10", "acc20"};
  for (std::size_t i = 0; i < 4; ++i) j[names[i]] = r.acc ? nlohmann::ordered_json((*r.acc)[i]) : nullptr;
  j["l1"] = r.loss.l1;
  j["l2"] = r.loss.l2;
  j["l3"] = r.loss.l3;
  j["total"] = r.loss.total;
  j["mean_aux_dist"] = r.mean_aux_dist ? nlohmann::ordered_json(*r.mean_aux_dist) : nullptr;
  j["mean_consistency_dist"] = r.mean_consistency_dist ? nlohmann::ordered_json(*r.mean_consistency_dist) : nullptr;
  j["seed"] = r.seed;
  j["variant"] = r.variant;
  return j.dump();
}

}  // namespace mobtcast::train
