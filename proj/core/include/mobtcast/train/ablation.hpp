#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mobtcast/train/trainer.hpp"

namespace mobtcast::train {

struct AblationCell {
  std::string variant;
  std::uint64_t seed = 0;
  std::optional<EvalReport> test;
  std::optional<EvalReport> validation;
  std::size_t epochs = 0;
  /// Set when the cell failed; other cells still run.
  std::string error;

  bool ok() const noexcept { return test.has_value(); }
};

struct VariantSummary {
  std::string variant;
  std::size_t runs = 0;
  std::size_t failures = 0;
  std::array<double, 4> mean_acc{};
  std::array<double, 4> median_acc{};
  double median_validation_consistency = 0.0;
};

struct AblationTable {
  std::vector<AblationCell> cells;

  /// Per-variant aggregates over successful cells, in first-seen order.
  std::vector<VariantSummary> summary() const;
  const VariantSummary* find(const std::vector<VariantSummary>& rows, const std::string& variant) const;
};

/// Supplies the corpus for a seed; the same seed yields the same data for every variant.
using CorpusProvider = std::function<const Corpus&(std::uint64_t seed)>;

/// Trains and tests every (seed, variant) cell; `train.seed` and
/// `train.variant` are overridden per cell.
AblationTable run_ablation(const std::vector<std::string>& variants, const std::vector<std::uint64_t>& seeds,
                           const model::ModelConfig& base, const TrainConfig& train, const CorpusProvider& corpus,
                           const MetricsSink& sink = {});
AblationTable run_ablation(const std::vector<std::string>& variants, const std::vector<std::uint64_t>& seeds,
                           const model::ModelConfig& base, const TrainConfig& train, const Corpus& corpus,
                           const MetricsSink& sink = {});

/// Header variant,seed,acc1,acc5,acc10,acc20; failed cells have empty metrics.
void write_ablation_csv(std::ostream& out, const AblationTable& table);

double median(std::vector<double> values);

}  // namespace mobtcast::train
