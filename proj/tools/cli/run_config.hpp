#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mobtcast/model/config.hpp"
#include "mobtcast/synth/generator.hpp"
#include "mobtcast/train/corpus.hpp"
#include "mobtcast/train/trainer.hpp"

namespace mobtcast::cli {

/// Every knob of every command. Flat keys; `--kebab-case` flags mirror them.
struct RunConfig {
  // Inputs and outputs.
  std::string data;
  std::string format = "foursquare";
  std::string categories = "foursquare";
  std::string gowalla_categories;
  std::string edges;
  std::string neighbors;
  std::string groups;
  std::string dataset = "dataset";
  std::string out = "out";
  std::string checkpoint;
  std::string split = "test";

  // Run selection.
  std::string variant = "full";
  std::vector<std::string> variants{"V0", "V1", "V2", "V3", "V4", "V5", "full"};
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  bool random_init = false;
  bool synth_per_seed = false;

  // Training.
  double learning_rate = 1e-3;
  std::size_t batch_size = 512;
  std::size_t max_epochs = 200;
  std::size_t patience = 10;
  std::size_t micro_batch = 64;
  std::size_t eval_batch = 256;
  std::size_t threads = 1;
  std::size_t train_eval_every = 0;
  double target_train_acc = 0.0;
  bool early_stopping = true;

  // Model.
  std::size_t d_model = 128;
  std::size_t d_poi = 80;
  std::size_t d_cat = 24;
  std::size_t d_time = 24;
  std::size_t layers = 2;
  std::size_t heads = 8;
  std::size_t ffn = 256;
  double dropout = 0.1;
  std::size_t d_user = 40;
  std::size_t k_max = 8;
  std::size_t n = 20;
  /// 0 means n.
  std::size_t aux_input_len = 0;
  /// Negative keeps the variant's own weight.
  double theta1 = -1.0;
  double theta2 = -1.0;
  double theta3 = -1.0;

  // Data pipeline.
  double tau = 0.5;
  double train_frac = 0.8;
  double val_frac = 0.1;

  // Synthesis.
  std::size_t n_users = 50;
  std::size_t n_pois = 100;
  std::size_t n_categories = 8;
  std::size_t n_groups = 10;
  std::size_t checkins_per_user = 40;
  std::size_t favourites = 5;
  double semantic_strength = 0.5;
  double social_strength = 0.5;
  double geo_strength = 0.5;
  double geo_radius = 0.3;

  // Analysis.
  std::size_t dtw_max_len = 0;
  std::size_t clip_pair_cap = 100000;
};

/// Calls f(key, field, help) for every field, in documentation order.
template <typename Config, typename F>
void visit_fields(Config& c, F&& f) {
  f("data", c.data, "Raw check-in file (ingest)");
  f("format", c.format, "foursquare or gowalla");
  f("categories", c.categories, "Category scheme: foursquare, arcgis or a table path");
  f("gowalla_categories", c.gowalla_categories, "Gowalla location_id -> category file");
  f("edges", c.edges, "Friendship edges file; replaces similarity discovery");
  f("neighbors", c.neighbors, "Neighbor graph written by the neighbors command");
  f("groups", c.groups, "Ground-truth groups (user<TAB>group) for analyze");
  f("dataset", c.dataset, "Ingested dataset directory");
  f("out", c.out, "Output directory");
  f("checkpoint", c.checkpoint, "Checkpoint archive (eval)");
  f("split", c.split, "train, validation or test (eval)");
  f("variant", c.variant, "Model variant: V0..V5, full, aux-tra");
  f("variants", c.variants, "Comma-separated variants (ablate)");
  f("seed", c.seed, "Run seed");
  f("seeds", c.seeds, "Comma-separated seeds (ablate)");
  f("random_init", c.random_init, "eval: score freshly initialised weights");
  f("synth_per_seed", c.synth_per_seed, "ablate: generate a synthetic corpus per seed");
  f("learning_rate", c.learning_rate, "Adam learning rate");
  f("batch_size", c.batch_size, "Mini-batch size");
  f("max_epochs", c.max_epochs, "Epoch limit");
  f("patience", c.patience, "Epochs without validation gain before stopping");
  f("micro_batch", c.micro_batch, "Instances per graph build");
  f("eval_batch", c.eval_batch, "Instances per evaluation chunk");
  f("threads", c.threads, "Worker threads");
  f("train_eval_every", c.train_eval_every, "Evaluate the training split every k epochs");
  f("target_train_acc", c.target_train_acc, "Stop once training top-1 reaches this");
  f("early_stopping", c.early_stopping, "Select the best validation epoch");
  f("d_model", c.d_model, "Model width");
  f("d_poi", c.d_poi, "POI embedding width");
  f("d_cat", c.d_cat, "Category embedding width");
  f("d_time", c.d_time, "Time-slot embedding width");
  f("layers", c.layers, "Encoder layers");
  f("heads", c.heads, "Attention heads");
  f("ffn", c.ffn, "Feed-forward width");
  f("dropout", c.dropout, "Dropout rate");
  f("d_user", c.d_user, "User embedding width");
  f("k_max", c.k_max, "Neighbors attended per instance");
  f("n", c.n, "Observation length");
  f("aux_input_len", c.aux_input_len, "Steps fed to the geographic encoder (0: n)");
  f("theta1", c.theta1, "POI loss weight (negative: variant default)");
  f("theta2", c.theta2, "Trajectory loss weight (negative: variant default)");
  f("theta3", c.theta3, "Consistency loss weight (negative: variant default)");
  f("tau", c.tau, "Similarity threshold for neighbors");
  f("train_frac", c.train_frac, "Per-user training fraction");
  f("val_frac", c.val_frac, "Validation share of the training segment");
  f("n_users", c.n_users, "synth: users");
  f("n_pois", c.n_pois, "synth: POIs");
  f("n_categories", c.n_categories, "synth: categories");
  f("n_groups", c.n_groups, "synth: groups");
  f("checkins_per_user", c.checkins_per_user, "synth: check-ins per user");
  f("favourites", c.favourites, "synth: favourite POIs per user");
  f("semantic_strength", c.semantic_strength, "synth: semantic signal");
  f("social_strength", c.social_strength, "synth: social signal");
  f("geo_strength", c.geo_strength, "synth: geographic signal");
  f("geo_radius", c.geo_radius, "synth: geographic radius");
  f("dtw_max_len", c.dtw_max_len, "analyze: most recent steps per DTW trajectory (0: all)");
  f("clip_pair_cap", c.clip_pair_cap, "analyze: cross-clip pair cap");
}

std::string to_json(const RunConfig& config);
/// Overlays a JSON object onto `config`; unknown keys are an error.
void apply_json(RunConfig& config, const std::string& text, const std::string& source);

/// Assigns a flag value given as text to the field named `key`.
void apply_flag(RunConfig& config, const std::string& key, const std::string& value);

std::vector<std::string> field_keys();
std::string kebab(const std::string& key);

model::ModelConfig model_base(const RunConfig& c);
/// Variant wiring plus explicit theta overrides, without dataset dimensions.
model::ModelConfig variant_model(const RunConfig& c, const std::string& variant);
train::TrainConfig train_config(const RunConfig& c);
synth::SynthConfig synth_config(const RunConfig& c, std::uint64_t seed);
train::CorpusOptions corpus_options(const RunConfig& c);

}  // namespace mobtcast::cli
