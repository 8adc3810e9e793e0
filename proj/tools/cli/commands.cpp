#include "commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <ostream>
#include <unordered_map>

#include "dataset_io.hpp"
#include "mobtcast/data/categories.hpp"
#include "mobtcast/diff/checkpoint.hpp"
#include "mobtcast/model/network.hpp"
#include "mobtcast/social/social.hpp"
#include "mobtcast/synth/analysis.hpp"
#include "mobtcast/synth/generator.hpp"
#include "mobtcast/train/ablation.hpp"

namespace mobtcast::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kManifestEntry = "model.txt";

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void check_dims(const RunConfig& c) {
  if (c.n == 0) throw Error("n must be positive");
  if (c.aux_input_len != 0 && c.aux_input_len != c.n && c.aux_input_len + 1 != c.n) {
    throw Error("aux_input_len must be 0, n or n - 1");
  }
}

/// Cosine similarity never exceeds 1, so a threshold above 1 admits no edge.
/// Discovery itself only accepts [0, 1].
social::NeighborGraph vacuous_graph(std::size_t users, double tau) {
  social::NeighborGraph g;
  g.tau = tau;
  g.neighbors.resize(users);
  return g;
}

social::NeighborGraph neighbor_graph(const RunConfig& c, const data::CheckInLog& log,
                                     const std::vector<social::CheckinVector>& vectors) {
  if (!c.edges.empty()) return social::load_edges(c.edges, log, &vectors);
  if (c.tau > 1.0) return vacuous_graph(vectors.size(), c.tau);
  return social::discover_neighbors(vectors, c.tau);
}

train::Corpus load_corpus(const RunConfig& c, Dataset ds) {
  check_dims(c);
  auto opts = corpus_options(c);
  const bool vacuous = opts.edges.empty() && c.tau > 1.0;
  if (vacuous) opts.tau = 1.0;
  train::Corpus corpus = train::prepare_corpus(ds.log, std::move(ds.registry), opts);
  if (vacuous) corpus.graph = vacuous_graph(corpus.num_users(), c.tau);
  if (!c.neighbors.empty()) {
    std::ifstream in(c.neighbors);
    if (!in) throw Error("cannot read neighbor graph " + c.neighbors);
    std::unordered_map<std::string, std::int64_t> ids;
    for (std::size_t u = 0; u < ds.log.num_users(); ++u) ids.emplace(ds.log.user_keys[u], static_cast<std::int64_t>(u));
    corpus.graph = social::import_neighbors(in, corpus.num_users(), c.tau, &ids);
  }
  return corpus;
}

train::Corpus load_corpus(const RunConfig& c) { return load_corpus(c, read_dataset(c.dataset)); }

const std::vector<data::TrajectoryWindow>& split_windows(const train::Corpus& corpus, const std::string& name) {
  if (name == "train") return corpus.split.train;
  if (name == "validation") return corpus.split.validation;
  if (name == "test") return corpus.split.test;
  throw Error("unknown split '" + name + "' (expected train, validation or test)");
}

train::MetricsSink jsonl_sink(std::ofstream& file) {
  return [&file](const train::MetricsRecord& r) { file << train::to_json_line(r) << '\n'; };
}

json report_json(const train::EvalReport& r, const std::string& split, const std::string& variant) {
  json j = json::parse(train::to_json_line(train::to_record(r, 0, split, variant)));
  j.erase("epoch");
  j["count"] = r.count;
  return j;
}

}  // namespace

void cmd_ingest(const RunConfig& c, std::ostream& out, std::ostream& err) {
  if (c.data.empty()) throw Error("ingest needs --data");
  check_dims(c);
  data::ParseOptions po;
  po.gowalla_categories = c.gowalla_categories;
  Dataset ds;
  ds.log = data::parse_checkins(c.data, data::parse_format(c.format), po);
  if (ds.log.empty()) throw Error("no check-ins parsed");
  if (ds.log.malformed_lines > 0) {
    err << "skipped " << ds.log.malformed_lines << " malformed line(s) of " << ds.log.total_lines << '\n';
    for (const auto& s : ds.log.malformed_samples) err << "  " << s << '\n';
  }
  const auto scheme = data::CategoryScheme::named(c.categories);
  ds.registry = data::build_poi_registry(ds.log, scheme, data::training_mask(ds.log, c.train_frac));
  if (!ds.registry.unknown_categories.empty()) {
    err << ds.registry.unknown_categories.size() << " raw categor"
        << (ds.registry.unknown_categories.size() == 1 ? "y" : "ies") << " mapped to Other\n";
  }

  const auto sequences = data::encode_sequences(ds.log, ds.registry);
  const auto split = data::split(sequences, c.n, c.train_frac, c.val_frac);

  const auto& b = ds.registry.bounds;
  json meta;
  meta["format"] = c.format;
  meta["categories"] = scheme.name();
  meta["users"] = ds.log.num_users();
  meta["pois"] = ds.log.num_pois();
  meta["checkins"] = ds.log.size();
  meta["num_categories"] = ds.registry.category_names.size();
  meta["malformed_lines"] = ds.log.malformed_lines;
  meta["n"] = c.n;
  meta["train_frac"] = c.train_frac;
  meta["val_frac"] = c.val_frac;
  meta["windows"] = {{"train", split.train.size()}, {"validation", split.validation.size()}, {"test", split.test.size()}};
  meta["bounds"] = {{"lon_min", b.lon_min}, {"lon_max", b.lon_max}, {"lat_min", b.lat_min}, {"lat_max", b.lat_max}};
  write_dataset(c.out, ds, meta.dump(2));

  // Per-user split manifest: check-in index boundaries and window counts.
  auto splits = open_out(fs::path(c.out) / kSplitsFile);
  splits << "user\tcheckins\ttrain_end\tval_end\ttrain_windows\tval_windows\ttest_windows\n";
  for (std::size_t u = 0; u < sequences.users.size(); ++u) {
    const std::size_t count = sequences.users[u].size();
    const auto sb = data::split_bounds(count, c.train_frac, c.val_frac);
    const auto windows = [&](std::size_t lo, std::size_t hi) {
      lo = std::max(lo, c.n);
      return hi > lo ? hi - lo : 0;
    };
    splits << u << '\t' << count << '\t' << sb.train_end << '\t' << sb.val_end << '\t' << windows(0, sb.train_end) << '\t'
           << windows(sb.train_end, sb.val_end) << '\t' << windows(sb.val_end, count) << '\n';
  }

  out << "users " << ds.log.num_users() << " pois " << ds.log.num_pois() << " checkins " << ds.log.size()
      << " windows train " << split.train.size() << " validation " << split.validation.size() << " test "
      << split.test.size() << '\n';
}

void cmd_neighbors(const RunConfig& c, std::ostream& out, std::ostream&) {
  const Dataset ds = read_dataset(c.dataset);
  const auto vectors = social::build_checkin_vectors(ds.log, c.train_frac);
  const auto graph = neighbor_graph(c, ds.log, vectors);
  auto file = open_out(fs::path(c.out) / "neighbors.tsv");
  social::export_neighbors(file, graph, &ds.log.user_keys);
  out << "users " << graph.num_users() << " edges " << graph.num_edges() << '\n';
}

void cmd_synth(const RunConfig& c, std::ostream& out, std::ostream&) {
  const auto corpus = synth::generate(synth_config(c, c.seed));
  auto checkins = open_out(fs::path(c.out) / "checkins.txt");
  data::write_foursquare(checkins, corpus.log);
  auto groups = open_out(fs::path(c.out) / "groups.tsv");
  synth::write_groups(groups, corpus);

  std::map<char, std::size_t> mech;
  for (char m : corpus.mechanism) ++mech[m];
  out << "users " << corpus.log.num_users() << " pois " << corpus.log.num_pois() << " checkins " << corpus.log.size()
      << " social " << mech[synth::kMechSocial] << " geo " << mech[synth::kMechGeo] << " semantic "
      << mech[synth::kMechSemantic] << " base " << mech[synth::kMechBase] << '\n';
}

void cmd_train(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const train::Corpus corpus = load_corpus(c);
  const auto tc = train_config(c);
  tc.validate();
  const auto config = train::bind_dataset(variant_model(c, c.variant), corpus);
  config.validate();

  const fs::path dir = c.out;
  auto metrics = open_out(dir / "metrics.jsonl");
  const auto result = train::train_model(config, tc, corpus, jsonl_sink(metrics));
  diff::save_checkpoint(dir / "model.ckpt", result.params,
                        {{kManifestEntry, model::write_manifest(config, corpus.fingerprint())}});
  auto cfg_file = open_out(dir / "config.json");
  cfg_file << to_json(c) << '\n';

  if (result.early_stopped) err << "stopped early after epoch " << result.epochs.size() << '\n';
  out << "epochs " << result.epochs.size() << " best_epoch " << result.best_epoch << " best_validation_acc1 "
      << fixed(result.best_validation_acc1) << " final_train_acc1 " << fixed(result.final_train.acc1()) << '\n';
}

void cmd_eval(const RunConfig& c, std::ostream& out, std::ostream&) {
  const train::Corpus corpus = load_corpus(c);
  model::ModelConfig config;
  diff::ParameterSet params;
  if (c.random_init) {
    config = train::bind_dataset(variant_model(c, c.variant), corpus);
    config.validate();
    params = model::init_params(config, c.seed);
  } else {
    const fs::path path = c.checkpoint.empty() ? fs::path(c.out) / "model.ckpt" : fs::path(c.checkpoint);
    auto ckpt = diff::load_checkpoint(path);
    const auto it = ckpt.text.find(kManifestEntry);
    if (it == ckpt.text.end()) throw Error(path.string() + " carries no model manifest");
    model::DatasetFingerprint fp;
    model::read_manifest(it->second, config, fp);
    const auto have = corpus.fingerprint();
    if (!(fp == have)) {
      throw Error("checkpoint/dataset fingerprint mismatch\n  checkpoint: " + fp.to_string() +
                  "\n  dataset:    " + have.to_string());
    }
    if (config.n != corpus.n) {
      throw Error("checkpoint was trained with n=" + std::to_string(config.n) + " but --n is " + std::to_string(corpus.n));
    }
    params = std::move(ckpt.params);
  }
  const auto report = train::evaluate(config, params, corpus, split_windows(corpus, c.split), c.eval_batch, c.threads);
  const auto j = report_json(report, c.split, config.variant);
  auto file = open_out(fs::path(c.out) / "eval.json");
  file << j.dump(2) << '\n';
  out << j.dump() << '\n';
}

void cmd_ablate(const RunConfig& c, std::ostream& out, std::ostream& err) {
  check_dims(c);
  auto tc = train_config(c);
  tc.validate();
  const auto base = model_base(c);

  const fs::path dir = c.out;
  auto metrics = open_out(dir / "metrics.jsonl");
  train::AblationTable table;
  if (c.synth_per_seed) {
    std::map<std::uint64_t, train::Corpus> cache;
    const auto scheme = data::CategoryScheme::foursquare();
    const train::CorpusProvider provider = [&](std::uint64_t seed) -> const train::Corpus& {
      auto it = cache.find(seed);
      if (it == cache.end()) {
        const auto s = synth::generate(synth_config(c, seed));
        it = cache.emplace(seed, train::prepare_corpus(s.log, scheme, corpus_options(c))).first;
      }
      return it->second;
    };
    table = train::run_ablation(c.variants, c.seeds, base, tc, provider, jsonl_sink(metrics));
  } else {
    const train::Corpus corpus = load_corpus(c);
    table = train::run_ablation(c.variants, c.seeds, base, tc, corpus, jsonl_sink(metrics));
  }
  auto csv = open_out(dir / "ablation.csv");
  train::write_ablation_csv(csv, table);

  for (const auto& cell : table.cells) {
    if (!cell.ok()) err << "cell " << cell.variant << " seed " << cell.seed << " failed: " << cell.error << '\n';
  }
  out << "variant\truns\tmedian_acc1\tmedian_acc5\tmedian_acc10\tmedian_acc20\n";
  for (const auto& row : table.summary()) {
    out << row.variant << '\t' << row.runs;
    for (double a : row.median_acc) out << '\t' << fixed(a);
    out << '\n';
  }
  std::size_t failed = 0;
  for (const auto& cell : table.cells) failed += cell.ok() ? 0 : 1;
  if (failed == table.cells.size() && failed > 0) throw Error("every ablation cell failed");
}

void cmd_analyze(const RunConfig& c, std::ostream& out, std::ostream&) {
  const Dataset ds = read_dataset(c.dataset);
  const train::Corpus corpus = load_corpus(c, ds);
  const fs::path dir = c.out;

  auto hist_file = open_out(dir / "hourly_histogram.csv");
  synth::write_histogram_csv(hist_file, synth::hourly_category_histogram(ds.log, corpus.registry),
                             corpus.registry.category_names);

  const auto clips = synth::clip_distance_stats(synth::user_clips(corpus.sequences), c.seed, c.clip_pair_cap);
  auto clip_file = open_out(dir / "clip_distances.csv");
  const auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  clip_file << "intra_mean,inter_mean,intra_pairs,inter_pairs,sampled\n"
            << opt(clips.intra) << ',' << opt(clips.inter) << ',' << clips.intra_pairs << ',' << clips.inter_pairs << ','
            << (clips.sampled ? 1 : 0) << '\n';

  std::vector<std::vector<std::int64_t>> friends;
  if (!c.groups.empty()) {
    friends = synth::groups_to_friends(synth::read_groups(c.groups, ds.log));
  } else {
    friends.resize(corpus.num_users());
    for (std::size_t u = 0; u < corpus.num_users(); ++u) {
      for (const auto& nb : corpus.graph.neighbors[u]) friends[u].push_back(nb.user);
    }
  }
  const auto dtw = synth::dtw_friend_vs_stranger(synth::user_trajectories(corpus.sequences, c.dtw_max_len), friends, c.seed);
  auto dtw_file = open_out(dir / "dtw_friends.csv");
  dtw_file << "friend_mean,stranger_mean,friend_pairs,stranger_pairs\n"
           << format_double(dtw.friend_mean) << ',' << format_double(dtw.stranger_mean) << ',' << dtw.friend_pairs << ','
           << dtw.stranger_pairs << '\n';

  out << "intra " << opt(clips.intra) << " inter " << opt(clips.inter) << " friend_dtw " << format_double(dtw.friend_mean)
      << " stranger_dtw " << format_double(dtw.stranger_mean) << '\n';
}

}  // namespace mobtcast::cli
