#include "mobtcast/train/corpus.hpp"

#include "mobtcast/model/network.hpp"

namespace mobtcast::train {

model::DatasetFingerprint Corpus::fingerprint() const {
  model::DatasetFingerprint fp;
  fp.num_pois = registry.size();
  fp.num_users = num_users();
  fp.num_categories = registry.category_names.size();
  fp.bounds = registry.bounds;
  return fp;
}

Corpus prepare_corpus(const data::CheckInLog& log, const data::CategoryScheme& scheme, const CorpusOptions& options) {
  return prepare_corpus(log, data::build_poi_registry(log, scheme, data::training_mask(log, options.train_frac)), options);
}

Corpus prepare_corpus(const data::CheckInLog& log, data::PoiRegistry registry, const CorpusOptions& options) {
  if (options.n == 0) throw Error("observation length must be positive");
  if (registry.size() != log.num_pois()) throw Error("registry does not cover the log's POIs");
  Corpus c;
  c.n = options.n;
  c.registry = std::move(registry);
  c.sequences = data::encode_sequences(log, c.registry);
  c.split = data::split(c.sequences, options.n, options.train_frac, options.val_frac_of_train);
  const auto vectors = social::build_checkin_vectors(c.sequences, options.train_frac);
  c.graph = options.edges.empty() ? social::discover_neighbors(vectors, options.tau)
                                  : social::load_edges(options.edges, log, &vectors);
  c.poi_coords = model::coordinate_table(c.registry);
  return c;
}

model::ModelConfig bind_dataset(model::ModelConfig config, const Corpus& corpus) {
  config.num_pois = corpus.registry.size();
  config.num_users = corpus.num_users();
  config.num_categories = corpus.registry.category_names.size();
  const bool drop_last = config.aux_input_len + 1 == config.n;
  config.n = corpus.n;
  config.aux_input_len = drop_last ? corpus.n - 1 : corpus.n;
  return config;
}

}  // namespace mobtcast::train
