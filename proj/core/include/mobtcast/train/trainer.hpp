#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mobtcast/diff/parameters.hpp"
#include "mobtcast/model/network.hpp"
#include "mobtcast/train/corpus.hpp"
#include "mobtcast/train/metrics.hpp"

namespace mobtcast::train {

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 512;
  std::size_t max_epochs = 200;
  std::size_t patience = 10;
  std::uint64_t seed = 0;
  std::string variant = "full";
  std::size_t n = 20;

  /// Instances per graph build. Gradients of a mini-batch are accumulated
  /// over its chunks, so this only trades memory for graph overhead.
  std::size_t micro_batch = 64;
  std::size_t eval_batch = 256;
  /// Worker threads for chunked evaluation and gradient accumulation. Results
  /// are combined in chunk order, so the count never changes the numbers.
  std::size_t threads = 1;
  /// Evaluate the training split every k epochs (0: only once at the end).
  std::size_t train_eval_every = 0;
  /// Stop as soon as a training evaluation reaches this top-1 (0 disables).
  double target_train_acc = 0.0;
  /// When off, the last epoch's parameters are returned instead of the best
  /// validation ones, and patience is ignored.
  bool early_stopping = true;

  void validate() const;
};

/// Variant wiring from `base` dimensions, bound to the corpus.
model::ModelConfig resolve_model(const model::ModelConfig& base, const TrainConfig& train, const Corpus& corpus);

using MetricsSink = std::function<void(const MetricsRecord&)>;

/// Batch items for windows, with future-masked neighbor histories when the
/// social path is on.
std::vector<model::BatchItem> make_batch(const model::ModelConfig& config, const Corpus& corpus,
                                         std::span<const data::TrajectoryWindow* const> windows);

/// Eval-mode metrics over `windows`. Without the mobility path the ranking
/// comes from proximity to the predicted coordinate.
EvalReport evaluate(const model::ModelConfig& config, const diff::ParameterSet& params, const Corpus& corpus,
                    std::span<const data::TrajectoryWindow> windows, std::size_t eval_batch = 256,
                    std::size_t threads = 1);

struct EpochSummary {
  std::size_t epoch = 0;
  LossBreakdown train_loss;
  std::optional<EvalReport> validation;
  std::optional<EvalReport> train;
};

struct TrainResult {
  diff::ParameterSet params;
  std::vector<EpochSummary> epochs;
  std::size_t best_epoch = 0;
  double best_validation_acc1 = 0.0;
  bool early_stopped = false;
  /// Training-split metrics of the returned parameters.
  EvalReport final_train;
};

/// Mini-batch Adam with per-epoch validation and best-top-1 selection.
/// Throws mobtcast::Error naming the epoch and batch on a non-finite loss.
TrainResult train_model(const model::ModelConfig& config, const TrainConfig& train, const Corpus& corpus,
                        const MetricsSink& sink = {}, const diff::ParameterSet* initial = nullptr);

}  // namespace mobtcast::train
