#include "mobtcast/train/ablation.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>

namespace mobtcast::train {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::vector<VariantSummary> AblationTable::summary() const {
  std::vector<VariantSummary> rows;
  std::vector<std::vector<const AblationCell*>> groups;
  for (const auto& c : cells) {
    auto it = std::find_if(rows.begin(), rows.end(), [&](const VariantSummary& r) { return r.variant == c.variant; });
    if (it == rows.end()) {
      rows.push_back(VariantSummary{c.variant});
      groups.emplace_back();
      it = rows.end() - 1;
    }
    groups[static_cast<std::size_t>(it - rows.begin())].push_back(&c);
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::array<std::vector<double>, 4> acc;
    std::vector<double> consistency;
    for (const auto* c : groups[r]) {
      if (!c->ok()) {
        ++rows[r].failures;
        continue;
      }
      ++rows[r].runs;
      for (std::size_t k = 0; k < 4; ++k) acc[k].push_back(c->test->acc[k]);
      if (c->validation) consistency.push_back(c->validation->mean_consistency_dist);
    }
    for (std::size_t k = 0; k < 4; ++k) {
      double s = 0;
      for (double a : acc[k]) s += a;
      rows[r].mean_acc[k] = acc[k].empty() ? 0.0 : s / static_cast<double>(acc[k].size());
      rows[r].median_acc[k] = median(acc[k]);
    }
    rows[r].median_validation_consistency = median(consistency);
  }
  return rows;
}

const VariantSummary* AblationTable::find(const std::vector<VariantSummary>& rows, const std::string& variant) const {
  for (const auto& r : rows) {
    if (r.variant == variant) return &r;
  }
  return nullptr;
}

AblationTable run_ablation(const std::vector<std::string>& variants, const std::vector<std::uint64_t>& seeds,
                           const model::ModelConfig& base, const TrainConfig& train, const CorpusProvider& corpus,
                           const MetricsSink& sink) {
  for (const auto& v : variants) model::variant_config(v, base);  // unknown names fail before any work
  AblationTable table;
  for (const auto seed : seeds) {
    const Corpus* data = nullptr;
    std::string corpus_error;
    try {
      data = &corpus(seed);
    } catch (const std::exception& e) {
      corpus_error = e.what();
    }
    for (const auto& variant : variants) {
      AblationCell cell;
      cell.variant = variant;
      cell.seed = seed;
      if (!data) {
        cell.error = corpus_error;
        table.cells.push_back(std::move(cell));
        continue;
      }
      try {
        TrainConfig tc = train;
        tc.seed = seed;
        tc.variant = variant;
        const auto config = resolve_model(base, tc, *data);
        auto result = train_model(config, tc, *data, sink);
        cell.epochs = result.epochs.size();
        cell.validation = evaluate(config, result.params, *data, data->split.validation, tc.eval_batch, tc.threads);
        cell.validation->seed = seed;
        cell.test = evaluate(config, result.params, *data, data->split.test, tc.eval_batch, tc.threads);
        cell.test->seed = seed;
        if (sink) sink(to_record(*cell.test, result.best_epoch, "test", variant));
      } catch (const std::exception& e) {
        cell.error = e.what();
        cell.test.reset();
      }
      table.cells.push_back(std::move(cell));
    }
  }
  return table;
}

AblationTable run_ablation(const std::vector<std::string>& variants, const std::vector<std::uint64_t>& seeds,
                           const model::ModelConfig& base, const TrainConfig& train, const Corpus& corpus,
                           const MetricsSink& sink) {
  return run_ablation(variants, seeds, base, train, [&](std::uint64_t) -> const Corpus& { return corpus; }, sink);
}

void write_ablation_csv(std::ostream& out, const AblationTable& table) {
  out << "variant,seed,acc1,acc5,acc10,acc20\n";
  char buf[32];
  for (const auto& c : table.cells) {
    out << c.variant << ',' << c.seed;
    for (std::size_t k = 0; k < 4; ++k) {
      out << ',';
      if (c.test) {
        std::snprintf(buf, sizeof buf, "%.6f", c.test->acc[k]);
        out << buf;
      }
    }
    out << '\n';
  }
}

}  // namespace mobtcast::train
