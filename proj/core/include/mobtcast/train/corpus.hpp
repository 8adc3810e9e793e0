#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mobtcast/data/categories.hpp"
#include "mobtcast/data/checkin.hpp"
#include "mobtcast/data/registry.hpp"
#include "mobtcast/data/windows.hpp"
#include "mobtcast/diff/tensor.hpp"
#include "mobtcast/model/config.hpp"
#include "mobtcast/social/social.hpp"

namespace mobtcast::train {

struct CorpusOptions {
  std::size_t n = 20;
  double tau = 0.5;
  double train_frac = 0.8;
  double val_frac_of_train = 0.1;
  /// Explicit friendship file; similarity discovery is used when empty.
  std::filesystem::path edges;
};

/// Everything a model needs from one dataset: encoded sequences, windows per
/// split, the neighbor graph and the registry coordinate table.
struct Corpus {
  data::PoiRegistry registry;
  data::UserSequences sequences;
  data::DatasetSplit split;
  social::NeighborGraph graph;
  diff::Tensor poi_coords;
  std::size_t n = 0;

  std::size_t num_users() const noexcept { return sequences.users.size(); }
  model::DatasetFingerprint fingerprint() const;
};

Corpus prepare_corpus(const data::CheckInLog& log, const data::CategoryScheme& scheme, const CorpusOptions& options = {});
/// Same, over an already built registry (POI ids must match the log).
Corpus prepare_corpus(const data::CheckInLog& log, data::PoiRegistry registry, const CorpusOptions& options = {});

/// Copies the dataset dimensions (|P|, |U|, |C|, n) into `config`.
model::ModelConfig bind_dataset(model::ModelConfig config, const Corpus& corpus);

}  // namespace mobtcast::train
