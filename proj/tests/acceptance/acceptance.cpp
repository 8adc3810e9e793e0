// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Optional arguments select criteria by name.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli/cli.hpp"
#include "mobtcast/data/categories.hpp"
#include "mobtcast/diff/gradcheck.hpp"
#include "mobtcast/diff/graph.hpp"
#include "mobtcast/diff/random.hpp"
#include "mobtcast/model/network.hpp"
#include "mobtcast/synth/analysis.hpp"
#include "mobtcast/synth/generator.hpp"
#include "mobtcast/train/ablation.hpp"
#include "tiny_instance.hpp"

using namespace mobtcast;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

diff::Tensor random_tensor(diff::Shape shape, std::uint64_t seed, double scale = 1.0) {
  diff::Tensor t(shape, 0.0);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = scale * (2.0 * diff::unit_interval(diff::derive_seed(seed, i)) - 1.0);
  return t;
}

// Every EvalReport produced anywhere in the suite, for the top-k check.
std::vector<std::pair<std::string, std::array<double, 4>>> g_reports;

void record(const std::string& where, const train::EvalReport& r) { g_reports.emplace_back(where, r.acc); }

train::MetricsSink recording_sink(const std::string& where) {
  return [where](const train::MetricsRecord& m) {
    if (m.acc) g_reports.emplace_back(where + "/" + m.variant + "/" + m.split, *m.acc);
  };
}

// ---------------------------------------------------------------- gradients

double primitive_catalog_error() {
  diff::ParameterSet ps;
  ps.add("emb", random_tensor({6, 4}, 1));
  ps.add("W", random_tensor({4, 4}, 2));
  ps.add("Wq", random_tensor({4, 4}, 3));
  ps.add("gain", random_tensor({8}, 4));
  ps.add("bias", random_tensor({8}, 5));
  ps.add("target", random_tensor({2, 8}, 6));
  ps.add("other", random_tensor({2, 3, 4}, 7));
  ps.add("a", random_tensor({2, 8}, 8));
  ps.add("scores", random_tensor({2, 5}, 9));
  diff::Graph g(ps);
  auto e = g.embedding(g.param("emb"), {0, 3, -1, 5, 3, 1});
  auto e3 = g.reshape(e, {2, 3, 4});
  auto h = g.relu(g.add(g.matmul(e3, g.param("W")), g.param("other")));
  auto q = g.matmul(h, g.param("Wq"));
  auto att = diff::scaled_dot_product_attention(g, q, h, h, {1, 1, 0, 1, 1, 1, 1, 0, 1, 1, 1, 1, 1, 1, 1, 0, 1, 1});
  auto mixed = g.sub(att.output, g.scale(h, 0.5));
  auto cat = g.concat({g.select(mixed, 1, 2), g.select(h, 1, 0)});
  auto ln = g.layer_norm(cat, g.param("gain"), g.param("bias"));
  auto sq = g.squared_error(ln, g.param("target"));
  auto perm = g.permute(e3, {1, 0, 2});
  auto lsm = g.log_softmax(g.reshape(perm, {3, 8}));
  auto picked = g.pick(lsm, {1, 7, 4});
  auto logv = g.log(g.add(g.softmax(ln), g.constant(diff::Tensor({8}, 1.0))));
  auto blended = g.blend_rows(ln, g.param("a"), {1, 0});
  auto looked = g.argmax_lookup(g.param("scores"), g.constant(random_tensor({5, 8}, 10)));
  auto bmm = g.batch_matmul(h, q, true);
  auto loss = g.add(g.add(g.mean(sq), g.sum(picked)), g.mean(logv));
  loss = g.add(loss, g.add(g.mean(g.mul(blended, blended)), g.mean(g.mul(looked, blended))));
  loss = g.add(loss, g.mean(bmm));
  g.set_output("loss", loss);
  return diff::finite_diff_check(g, {}, 1e-5).max_relative_error;
}

Outcome gradient_oracle() {
  const double prim = primitive_catalog_error();
  double worst = 0.0;
  std::string where;
  const std::vector<std::array<double, 3>> patterns{{1, 0, 0}, {1, 1, 0}, {1, 0, 1}, {1, 1, 1}};
  for (const auto& th : patterns) {
    auto t = fixtures::make_tiny(6);
    t.config.theta1 = th[0];
    t.config.theta2 = th[1];
    t.config.theta3 = th[2];
    auto p = model::init_params(t.config, 13);
    diff::Graph g(p);
    model::build_network(g, t.config, t.batch(3), t.sequences, t.poi_coords, {});
    const auto r = diff::finite_diff_check(g, {}, 1e-4);
    if (r.max_relative_error > worst) {
      worst = r.max_relative_error;
      where = "theta (" + fmt("%g", th[0]) + "," + fmt("%g", th[1]) + "," + fmt("%g", th[2]) + ") " + r.worst_parameter;
    }
  }
  const bool pass = prim < 1e-4 && worst < 1e-4;
  return {pass, "primitives " + fmt("%.2e", prim) + ", full loss " + fmt("%.2e", worst) + " at " + where + " (< 1e-4)"};
}

// -------------------------------------------------------------- detachment

Outcome detachment() {
  std::size_t zero_violations = 0;
  double geo_min = std::numeric_limits<double>::infinity();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto t = fixtures::make_tiny(100 + seed);
    t.config.theta1 = 0;
    t.config.theta2 = 0;
    t.config.theta3 = 1;
    auto p = model::init_params(t.config, 200 + seed);
    diff::Graph g(p);
    model::build_network(g, t.config, t.batch(4), t.sequences, t.poi_coords, {});
    diff::forward(g);
    const auto grads = diff::backward(g, "loss");
    double geo = 0.0;
    for (std::size_t i = 0; i < grads.size(); ++i) {
      for (double v : grads.at(i).values()) {
        if (grads.name(i).starts_with(model::kPoiHeadPrefix) && v != 0.0) ++zero_violations;
        if (grads.name(i).starts_with(model::kGeoHeadPrefix)) geo += std::abs(v);
      }
    }
    geo_min = std::min(geo_min, geo);
  }
  return {zero_violations == 0 && geo_min > 0.0,
          std::to_string(zero_violations) + " nonzero dL3/d(POI head) entries; min |dL3/d(geo head)|_1 " +
              fmt("%.3e", geo_min) + " over 5 instances"};
}

// ----------------------------------------------------------- normalization

Outcome normalization() {
  double worst = 0.0;
  double min_prob = 1.0;
  std::size_t rows = 0;
  auto check_rows = [&](const diff::Tensor& t) {
    const std::size_t w = t.dim(t.rank() - 1);
    for (std::size_t r = 0; r < t.size() / w; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < w; ++c) s += t[r * w + c];
      worst = std::max(worst, std::abs(s - 1.0));
      ++rows;
    }
  };
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    auto t = fixtures::make_tiny(1000 + seed);
    auto p = model::init_params(t.config, 5000 + seed);
    diff::Graph g(p);
    const auto nodes = model::build_network(g, t.config, t.batch(3, seed % t.windows.size()), t.sequences,
                                            t.poi_coords, {});
    diff::forward(g);
    const auto& probs = g.value(*nodes.probs);
    check_rows(probs);
    for (double v : probs.values()) min_prob = std::min(min_prob, v);
    for (const auto& a : nodes.encoder_attention) check_rows(g.value(a));
    if (nodes.social_weights) check_rows(g.value(*nodes.social_weights));
  }
  return {worst <= 1e-6 && min_prob > 0.0,
          std::to_string(rows) + " rows over 1000 instances; max |sum - 1| " + fmt("%.2e", worst) + ", min prob " +
              fmt("%.2e", min_prob)};
}

// -------------------------------------------------------------------- DTW

double brute_dtw(const std::vector<synth::Point>& a, const std::vector<synth::Point>& b, std::size_t i,
                 std::size_t j, double acc) {
  acc += std::hypot(a[i][0] - b[j][0], a[i][1] - b[j][1]);
  if (i + 1 == a.size() && j + 1 == b.size()) return acc;
  double best = std::numeric_limits<double>::infinity();
  if (i + 1 < a.size()) best = std::min(best, brute_dtw(a, b, i + 1, j, acc));
  if (j + 1 < b.size()) best = std::min(best, brute_dtw(a, b, i, j + 1, acc));
  if (i + 1 < a.size() && j + 1 < b.size()) best = std::min(best, brute_dtw(a, b, i + 1, j + 1, acc));
  return best;
}

std::vector<synth::Point> grid_sequence(std::uint64_t seed) {
  const std::size_t len = 1 + diff::derive_seed(seed, std::uint64_t{0}) % 5;
  std::vector<synth::Point> s;
  for (std::size_t i = 0; i < len; ++i) {
    const auto cell = diff::derive_seed(seed, i + 1) % 9;
    s.push_back({static_cast<double>(cell % 3), static_cast<double>(cell / 3)});
  }
  return s;
}

Outcome dtw_oracle() {
  std::size_t mismatches = 0;
  for (std::uint64_t t = 0; t < 1000; ++t) {
    const auto a = grid_sequence(77000 + 2 * t);
    const auto b = grid_sequence(77000 + 2 * t + 1);
    if (synth::dtw_distance(a, b) != brute_dtw(a, b, 0, 0, 0.0)) ++mismatches;
  }
  return {mismatches == 0, std::to_string(mismatches) + " exact mismatches over 1000 pairs (length <= 5, 3x3 grid)"};
}

// ---------------------------------------------------------------- training

/// Training settings shared by every fixture run.
train::TrainConfig desk_train(std::size_t n) {
  train::TrainConfig tc;
  tc.n = n;
  tc.batch_size = 32;
  tc.micro_batch = 32;
  tc.learning_rate = 1e-3;
  tc.max_epochs = 200;
  tc.patience = 10;
  return tc;
}

train::Corpus synth_corpus(const synth::SynthConfig& sc, std::size_t n) {
  train::CorpusOptions co;
  co.n = n;
  return train::prepare_corpus(synth::generate(sc).log, data::CategoryScheme::foursquare(), co);
}

/// The overfit fixture corpus (defaults with seed 0), shared by two criteria.
const train::Corpus& overfit_corpus() {
  static const train::Corpus c = synth_corpus(synth::SynthConfig{}, 20);
  return c;
}

Outcome overfit() {
  auto tc = desk_train(20);
  tc.early_stopping = false;
  tc.target_train_acc = 0.90;
  tc.train_eval_every = 5;
  const auto& corpus = overfit_corpus();
  const auto config = train::resolve_model(model::desk_config(), tc, corpus);
  const auto r = train::train_model(config, tc, corpus, recording_sink("overfit"));
  record("overfit/final_train", r.final_train);
  return {r.final_train.acc1() >= 0.90, "train top-1 " + fmt("%.4f", r.final_train.acc1()) + " after " +
                                            std::to_string(r.epochs.size()) + " epochs (>= 0.90 within 200)"};
}

Outcome aux_collapse() {
  const auto& corpus = overfit_corpus();
  const auto tc = desk_train(20);
  std::map<std::string, double> acc;
  for (const char* variant : {"full", "aux-tra"}) {
    auto t = tc;
    t.variant = variant;
    const auto config = train::resolve_model(model::desk_config(), t, corpus);
    const auto r = train::train_model(config, t, corpus, recording_sink("aux_collapse"));
    const auto test = train::evaluate(config, r.params, corpus, corpus.split.test);
    record(std::string("aux_collapse/") + variant + "/test", test);
    acc[variant] = test.acc1();
  }
  return {acc["aux-tra"] < 0.2 * acc["full"],
          "test top-1 aux-tra " + fmt("%.4f", acc["aux-tra"]) + " vs full " + fmt("%.4f", acc["full"]) +
              " (need < 0.2 x full = " + fmt("%.4f", 0.2 * acc["full"]) + ")"};
}

// ---------------------------------------------------------------- ablation

const std::vector<std::uint64_t> kAblationSeeds{0, 1, 2, 3, 4};

struct Fixture {
  synth::SynthConfig synth;
  std::size_t n = 20;
};

/// Median test top-1 per variant (and validation consistency) over the
/// ablation seeds, generator seed = cell seed.
std::vector<train::VariantSummary> ablate(const Fixture& fx, const std::vector<std::string>& variants,
                                          const std::string& label) {
  std::map<std::uint64_t, train::Corpus> cache;
  const train::CorpusProvider provider = [&](std::uint64_t seed) -> const train::Corpus& {
    auto it = cache.find(seed);
    if (it == cache.end()) {
      auto sc = fx.synth;
      sc.seed = seed;
      it = cache.emplace(seed, synth_corpus(sc, fx.n)).first;
    }
    return it->second;
  };
  const auto table =
      train::run_ablation(variants, kAblationSeeds, model::desk_config(), desk_train(fx.n), provider, recording_sink(label));
  for (const auto& cell : table.cells) {
    if (cell.ok()) {
      record(label + "/" + cell.variant + "/test", *cell.test);
      std::printf("    %s %s seed %llu: test top-1 %.4f, validation consistency %.4f, %zu epochs\n", label.c_str(),
                  cell.variant.c_str(), static_cast<unsigned long long>(cell.seed), cell.test->acc1(),
                  cell.validation->mean_consistency_dist, cell.epochs);
    } else {
      std::printf("    %s %s seed %llu failed: %s\n", label.c_str(), cell.variant.c_str(),
                  static_cast<unsigned long long>(cell.seed), cell.error.c_str());
    }
    std::fflush(stdout);
  }
  return table.summary();
}

const train::VariantSummary& row(const std::vector<train::VariantSummary>& rows, const std::string& v) {
  for (const auto& r : rows) {
    if (r.variant == v) return r;
  }
  static const train::VariantSummary empty;
  return empty;
}

Outcome ordering(const std::vector<train::VariantSummary>& rows, const std::string& hi, const std::string& lo,
                 double margin) {
  const auto& a = row(rows, hi);
  const auto& b = row(rows, lo);
  const double gap = a.median_acc[0] - b.median_acc[0];
  const bool complete = a.runs == kAblationSeeds.size() && b.runs == kAblationSeeds.size();
  return {complete && gap >= margin, "median test top-1 " + hi + " " + fmt("%.4f", a.median_acc[0]) + " vs " + lo + " " +
                                         fmt("%.4f", b.median_acc[0]) + ", gap " + fmt("%+.4f", gap) + " (need >= " +
                                         fmt("%.2f", margin) + ")"};
}

Fixture fixture_a() {
  Fixture f;
  f.synth.semantic_strength = 0.9;
  f.synth.social_strength = 0.0;
  f.synth.geo_strength = 0.0;
  return f;
}

Fixture fixture_b() {
  Fixture f;
  f.synth.semantic_strength = 0.0;
  f.synth.social_strength = 0.0;
  f.synth.geo_strength = 0.9;
  return f;
}

// Copying a leader's latest visit only pays off once the social branch has
// seen enough leader/follower pairs, hence the larger corpus.
Fixture fixture_c() {
  Fixture f;
  f.synth.semantic_strength = 0.0;
  f.synth.social_strength = 0.9;
  f.synth.geo_strength = 0.0;
  f.synth.n_users = 60;
  f.synth.checkins_per_user = 60;
  f.synth.n_groups = 12;
  f.n = 10;
  return f;
}

std::optional<std::vector<train::VariantSummary>> g_fixture_b;

const std::vector<train::VariantSummary>& fixture_b_rows() {
  if (!g_fixture_b) g_fixture_b = ablate(fixture_b(), {"V2", "V3", "V5"}, "b");
  return *g_fixture_b;
}

Outcome ablation_a() { return ordering(ablate(fixture_a(), {"V0", "V1"}, "a"), "V1", "V0", 0.02); }
Outcome ablation_b() { return ordering(fixture_b_rows(), "V5", "V2", 0.01); }
Outcome ablation_c() { return ordering(ablate(fixture_c(), {"V5", "full"}, "c"), "full", "V5", 0.02); }

Outcome consistency() {
  const auto& rows = fixture_b_rows();
  const double v5 = row(rows, "V5").median_validation_consistency;
  const double v3 = row(rows, "V3").median_validation_consistency;
  return {v5 < v3, "median validation consistency distance V5 " + fmt("%.4f", v5) + " vs V3 " + fmt("%.4f", v3) +
                       " on fixture (b) (need V5 < V3)"};
}

// ------------------------------------------------------------- determinism

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int cli_run(std::vector<std::string> args, std::string* err = nullptr) {
  args.insert(args.begin(), "mobtcast");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, e;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, e);
  if (err) *err = e.str();
  return code;
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "mobtcast_acceptance_determinism";
  fs::remove_all(root);
  std::string err;
  if (cli_run({"synth", "--out", (root / "raw").string(), "--seed", "0"}, &err) != 0 ||
      cli_run({"ingest", "--data", (root / "raw" / "checkins.txt").string(), "--out", (root / "ds").string()}, &err) != 0) {
    return {false, "fixture setup failed: " + err};
  }
  const std::vector<std::string> common{"--dataset", (root / "ds").string(), "--variant", "full", "--seed", "3",
                                        "--d-model", "64", "--d-poi", "40", "--d-cat", "12", "--d-time", "12",
                                        "--heads", "4", "--ffn", "128", "--d-user", "20", "--batch-size", "32",
                                        "--micro-batch", "16", "--max-epochs", "3"};
  for (const char* run : {"a", "b"}) {
    auto args = common;
    args.insert(args.begin(), {"train", "--out", (root / run).string()});
    if (cli_run(args, &err) != 0) return {false, "train failed: " + err};
  }
  const auto a = slurp(root / "a" / "model.ckpt");
  const auto b = slurp(root / "b" / "model.ckpt");
  const bool same = !a.empty() && a == b && slurp(root / "a" / "metrics.jsonl") == slurp(root / "b" / "metrics.jsonl");
  return {same, "two train runs (full, 3 epochs): checkpoints of " + std::to_string(a.size()) + " bytes " +
                    (same ? "bit-identical" : "differ")};
}

// ----------------------------------------------------------- top-k order

Outcome topk_monotone() {
  // Random-init models of every variant add reports the training runs may not cover.
  const auto corpus = fixtures::tiny_corpus(3);
  for (const auto& v : model::variant_names()) {
    model::ModelConfig base = fixtures::tiny_config();
    auto config = train::bind_dataset(model::variant_config(v, base), corpus);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto p = model::init_params(config, seed);
      record("random/" + v, train::evaluate(config, p, corpus, corpus.split.train));
      record("random/" + v + "/test", train::evaluate(config, p, corpus, corpus.split.test));
    }
  }
  std::size_t bad = 0;
  std::string first;
  for (const auto& [where, acc] : g_reports) {
    if (!(acc[0] <= acc[1] && acc[1] <= acc[2] && acc[2] <= acc[3])) {
      if (bad++ == 0) first = where;
    }
  }
  return {bad == 0 && !g_reports.empty(), std::to_string(g_reports.size()) + " reports checked, " + std::to_string(bad) +
                                              " violations" + (bad ? " (first: " + first + ")" : std::string())};
}

struct Criterion {
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  // Top-k runs last so it sees every report emitted by the training criteria.
  const std::vector<Criterion> criteria{
      {"gradient_oracle", gradient_oracle},
      {"detachment", detachment},
      {"normalization", normalization},
      {"dtw_oracle", dtw_oracle},
      {"determinism", determinism},
      {"overfit", overfit},
      {"aux_collapse", aux_collapse},
      {"ablation_a_semantic", ablation_a},
      {"ablation_b_geographic", ablation_b},
      {"consistency_loss", consistency},
      {"ablation_c_social", ablation_c},
      {"topk_monotonicity", topk_monotone},
  };
  std::set<std::string> only(argv + 1, argv + argc);
  for (const auto& name : only) {
    if (std::none_of(criteria.begin(), criteria.end(), [&](const Criterion& c) { return name == c.name; })) {
      std::fprintf(stderr, "unknown criterion '%s'\n", name.c_str());
      return 2;
    }
  }

  int failures = 0;
  const auto suite_start = std::chrono::steady_clock::now();
  for (const auto& c : criteria) {
    if (!only.empty() && !only.contains(c.name)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - suite_start).count();
  std::printf("%d criteria failed, total %.0f s\n", failures, total);
  return failures == 0 ? 0 : 1;
}
