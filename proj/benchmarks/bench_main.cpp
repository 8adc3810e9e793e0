#include <benchmark/benchmark.h>

#include <vector>

#include "mobtcast/data/categories.hpp"
#include "mobtcast/diff/graph.hpp"
#include "mobtcast/diff/random.hpp"
#include "mobtcast/model/network.hpp"
#include "mobtcast/synth/analysis.hpp"
#include "mobtcast/synth/generator.hpp"
#include "mobtcast/train/trainer.hpp"

using namespace mobtcast;

namespace {

diff::Tensor random_tensor(diff::Shape shape, std::uint64_t seed) {
  diff::Tensor t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = 2.0 * diff::unit_interval(diff::derive_seed(seed, i)) - 1.0;
  return t;
}

void BM_MatMulForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  diff::ParameterSet params;
  params.add("w", random_tensor({n, n}, 1));
  diff::Graph g(params);
  const auto x = g.input("x", {n, n});
  g.set_output("out", g.sum(g.matmul(x, g.param("w"))));
  const diff::NamedTensors in{{"x", random_tensor({n, n}, 2)}};
  for (auto _ : state) {
    diff::forward(g, in);
    benchmark::DoNotOptimize(diff::backward(g, "out"));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_MatMulForwardBackward)->Arg(64)->Arg(128)->Arg(256);

/// The overfit-fixture corpus with the desk-scale model.
struct DeskSetup {
  train::Corpus corpus;
  model::ModelConfig config;
  diff::ParameterSet params;

  explicit DeskSetup(const char* variant) {
    const auto s = synth::generate(synth::SynthConfig{});
    corpus = train::prepare_corpus(s.log, data::CategoryScheme::foursquare());
    config = train::bind_dataset(model::variant_config(variant, model::desk_config()), corpus);
    params = model::init_params(config, 0);
  }
};

void BM_TrainStep(benchmark::State& state, const char* variant) {
  DeskSetup s(variant);
  const auto B = static_cast<std::size_t>(state.range(0));
  std::vector<const data::TrajectoryWindow*> windows;
  for (std::size_t i = 0; i < B; ++i) windows.push_back(&s.corpus.split.train[i % s.corpus.split.train.size()]);
  const auto batch = train::make_batch(s.config, s.corpus, windows);
  model::BuildOptions opts;
  opts.train = true;
  for (auto _ : state) {
    diff::Graph g(s.params);
    model::build_network(g, s.config, batch, s.corpus.sequences, s.corpus.poi_coords, opts);
    diff::EvalOptions eo;
    eo.train = true;
    diff::forward(g, {}, eo);
    benchmark::DoNotOptimize(diff::backward(g, "loss"));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(B));
}
BENCHMARK_CAPTURE(BM_TrainStep, V5, "V5")->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_TrainStep, full, "full")->Arg(32)->Unit(benchmark::kMillisecond);

void BM_Evaluate(benchmark::State& state) {
  DeskSetup s("full");
  for (auto _ : state) {
    benchmark::DoNotOptimize(train::evaluate(s.config, s.params, s.corpus, s.corpus.split.test));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.corpus.split.test.size()));
}
BENCHMARK(BM_Evaluate)->Unit(benchmark::kMillisecond);

void BM_Dtw(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<synth::Point> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = {diff::unit_interval(diff::derive_seed(1, i)), diff::unit_interval(diff::derive_seed(2, i))};
    b[i] = {diff::unit_interval(diff::derive_seed(3, i)), diff::unit_interval(diff::derive_seed(4, i))};
  }
  for (auto _ : state) benchmark::DoNotOptimize(synth::dtw_distance(a, b));
  state.SetComplexityN(static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Dtw)->RangeMultiplier(4)->Range(16, 1024)->Complexity(benchmark::oNSquared);

void BM_Generate(benchmark::State& state) {
  synth::SynthConfig c;
  c.n_users = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(synth::generate(c));
}
BENCHMARK(BM_Generate)->Arg(50)->Arg(500)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
