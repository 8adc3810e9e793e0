#include "mobtcast/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

#include "mobtcast/diff/adam.hpp"
#include "mobtcast/diff/random.hpp"

namespace mobtcast::train {

namespace {

/// Runs fn(i) for i in [0, count) on up to `threads` workers.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < count; i += threads) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::array<double, 2> row2(const diff::Tensor& t, std::size_t r) { return {t[r * 2], t[r * 2 + 1]}; }

std::vector<std::array<double, 2>> coord_list(const diff::Tensor& table) {
  std::vector<std::array<double, 2>> out(table.dim(0));
  for (std::size_t p = 0; p < out.size(); ++p) out[p] = row2(table, p);
  return out;
}

LossBreakdown read_losses(const diff::Graph& g, const model::NetworkNodes& nodes, const model::ModelConfig& c) {
  auto val = [&](const std::optional<model::NodeRef>& n) { return n ? g.value(*n).item() : 0.0; };
  return total_loss(val(nodes.l1), val(nodes.l2), val(nodes.l3), Theta{c.theta1, c.theta2, c.theta3}, nodes.batch);
}

/// Fisher-Yates driven by a counter-based stream, identical on every platform.
std::vector<std::size_t> shuffled(std::size_t count, std::uint64_t stream) {
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = count; i > 1; --i) {
    const double u = diff::unit_interval(diff::derive_seed(stream, static_cast<std::uint64_t>(i)));
    const auto j = std::min(i - 1, static_cast<std::size_t>(u * static_cast<double>(i)));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size == 0) throw Error("batch size must be at least 1");
  if (patience == 0) throw Error("patience must be at least 1");
  if (micro_batch == 0 || eval_batch == 0) throw Error("micro/eval batch sizes must be at least 1");
  if (!(learning_rate > 0.0)) throw Error("learning rate must be positive");
  if (n == 0) throw Error("observation length must be positive");
}

model::ModelConfig resolve_model(const model::ModelConfig& base, const TrainConfig& train, const Corpus& corpus) {
  if (train.n != corpus.n) {
    throw Error("observation length " + std::to_string(train.n) + " differs from the corpus windows (" +
                std::to_string(corpus.n) + ")");
  }
  auto config = bind_dataset(model::variant_config(train.variant, base), corpus);
  config.validate();
  return config;
}

std::vector<model::BatchItem> make_batch(const model::ModelConfig& config, const Corpus& corpus,
                                         std::span<const data::TrajectoryWindow* const> windows) {
  std::vector<model::BatchItem> items;
  items.reserve(windows.size());
  for (const auto* w : windows) {
    model::BatchItem item{w, {}};
    if (config.use_social && config.use_mobility) {
      item.neighbors = social::select_neighbor_windows(corpus.graph, corpus.sequences, w->user_id,
                                                       w->history_end_timestamp, config.n, config.k_max);
    }
    items.push_back(std::move(item));
  }
  return items;
}

EvalReport evaluate(const model::ModelConfig& config, const diff::ParameterSet& params, const Corpus& corpus,
                    std::span<const data::TrajectoryWindow> windows, std::size_t eval_batch, std::size_t threads) {
  EvalReport report;
  report.count = windows.size();
  if (windows.empty()) return report;
  eval_batch = std::max<std::size_t>(1, eval_batch);
  const auto coords = coord_list(corpus.poi_coords);
  const std::size_t chunks = (windows.size() + eval_batch - 1) / eval_batch;

  std::vector<std::size_t> ranks(windows.size());
  std::vector<double> aux_dist(windows.size()), cons_dist(windows.size());
  std::vector<LossBreakdown> losses(chunks);
  // Graph evaluation reads parameters only, so workers share one set.
  auto& shared = const_cast<diff::ParameterSet&>(params);

  parallel_for(chunks, threads, [&](std::size_t chunk) {
    const std::size_t lo = chunk * eval_batch;
    const std::size_t hi = std::min(windows.size(), lo + eval_batch);
    std::vector<const data::TrajectoryWindow*> ptrs;
    for (std::size_t i = lo; i < hi; ++i) ptrs.push_back(&windows[i]);
    const auto items = make_batch(config, corpus, ptrs);
    diff::Graph g(shared);
    model::BuildOptions opts;
    const bool any_loss = config.theta1 > 0 || config.theta2 > 0 || config.theta3 > 0;
    opts.losses = any_loss;
    const auto nodes = model::build_network(g, config, items, corpus.sequences, corpus.poi_coords, opts);
    diff::forward(g);
    if (any_loss) losses[chunk] = read_losses(g, nodes, config);

    const auto& probs = g.value(*nodes.probs);
    const auto& pred = g.value(*nodes.pred_coord);
    const auto& inferred = g.value(*nodes.inferred_coord);
    const std::size_t P = coords.size();
    for (std::size_t i = lo; i < hi; ++i) {
      const std::size_t r = i - lo;
      const auto p = row2(pred, r);
      if (config.use_mobility) {
        ranks[i] = target_rank(probs.values().subspan(r * P, P), windows[i].target_poi_id);
      } else {
        ranks[i] = target_rank(aux_only_scores(p, coords), windows[i].target_poi_id);
      }
      aux_dist[i] = std::sqrt(loss_traj(p, windows[i].target_coord));
      cons_dist[i] = std::sqrt(loss_traj(row2(inferred, r), p));
    }
  });

  report.acc = topk_from_ranks(ranks);
  report.mean_aux_dist = std::accumulate(aux_dist.begin(), aux_dist.end(), 0.0) / static_cast<double>(windows.size());
  report.mean_consistency_dist =
      std::accumulate(cons_dist.begin(), cons_dist.end(), 0.0) / static_cast<double>(windows.size());
  for (const auto& l : losses) accumulate(report.loss, l);
  return report;
}

TrainResult train_model(const model::ModelConfig& config, const TrainConfig& tc, const Corpus& corpus,
                        const MetricsSink& sink, const diff::ParameterSet* initial) {
  tc.validate();
  config.validate();
  if (config.n != corpus.n) throw Error("model observation length differs from the corpus windows");
  const auto& train_windows = corpus.split.train;
  if (train_windows.empty()) throw Error("no training windows (users need more than n check-ins)");

  diff::ParameterSet params = initial ? *initial : model::init_params(config, tc.seed);
  auto adam = diff::AdamState::for_parameters(params, diff::AdamConfig{tc.learning_rate, 0.9, 0.999, 1e-8});
  const std::uint64_t shuffle_root = diff::derive_seed(tc.seed, "shuffle");
  const std::uint64_t dropout_root = diff::derive_seed(tc.seed, "dropout");

  auto emit = [&](const MetricsRecord& r) {
    if (sink) sink(r);
  };
  auto eval_split = [&](const diff::ParameterSet& p, std::span<const data::TrajectoryWindow> w) {
    auto r = evaluate(config, p, corpus, w, tc.eval_batch, tc.threads);
    r.seed = tc.seed;
    return r;
  };

  TrainResult result;
  std::optional<diff::ParameterSet> best;
  std::size_t stale = 0;
  std::uint64_t step = 0;
  const std::size_t N = train_windows.size();

  for (std::size_t epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    EpochSummary summary;
    summary.epoch = epoch;
    const auto order = shuffled(N, diff::derive_seed(shuffle_root, static_cast<std::uint64_t>(epoch)));

    for (std::size_t start = 0, batch_no = 1; start < N; start += tc.batch_size, ++batch_no, ++step) {
      const std::size_t B = std::min(tc.batch_size, N - start);
      const std::size_t chunks = (B + tc.micro_batch - 1) / tc.micro_batch;
      std::vector<diff::ParameterSet> chunk_grads(chunks);
      std::vector<LossBreakdown> chunk_loss(chunks);

      try {
        parallel_for(chunks, tc.threads, [&](std::size_t c) {
          const std::size_t lo = start + c * tc.micro_batch;
          const std::size_t hi = std::min(start + B, lo + tc.micro_batch);
          std::vector<const data::TrajectoryWindow*> ptrs;
          for (std::size_t i = lo; i < hi; ++i) ptrs.push_back(&train_windows[order[i]]);
          const auto items = make_batch(config, corpus, ptrs);
          diff::Graph g(params);
          model::BuildOptions opts;
          opts.train = true;
          opts.poi_head = false;
          opts.geo_head = false;
          const auto nodes = model::build_network(g, config, items, corpus.sequences, corpus.poi_coords, opts);
          diff::EvalOptions eo;
          eo.train = true;
          eo.dropout_seed = diff::derive_seed(dropout_root, step * 4096 + c);
          diff::forward(g, {}, eo);
          chunk_loss[c] = read_losses(g, nodes, config);
          if (!std::isfinite(chunk_loss[c].total)) throw Error("non-finite loss");
          chunk_grads[c] = diff::backward(g, "loss");
        });
      } catch (const Error& e) {
        throw Error("training diverged at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_no) +
                    ": " + e.what());
      }

      // Chunk losses are chunk means; weight them back to the batch mean.
      diff::ParameterSet grads = params.zeros_like();
      for (std::size_t c = 0; c < chunks; ++c) {
        const double w = static_cast<double>(chunk_loss[c].batch) / static_cast<double>(B);
        for (std::size_t i = 0; i < grads.size(); ++i) {
          auto dst = grads.at(i).values();
          const auto src = chunk_grads[c].at(i).values();
          for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += w * src[j];
        }
        accumulate(summary.train_loss, chunk_loss[c]);
      }
      diff::adam_step(params, grads, adam);
    }

    MetricsRecord train_rec;
    train_rec.epoch = epoch;
    train_rec.split = "train";
    train_rec.loss = summary.train_loss;
    train_rec.seed = tc.seed;
    train_rec.variant = config.variant;
    const bool eval_train = tc.train_eval_every > 0 && epoch % tc.train_eval_every == 0;
    if (eval_train) {
      summary.train = eval_split(params, train_windows);
      train_rec.acc = summary.train->acc;
      train_rec.mean_aux_dist = summary.train->mean_aux_dist;
      train_rec.mean_consistency_dist = summary.train->mean_consistency_dist;
    }
    emit(train_rec);

    bool improved = true;
    if (!corpus.split.validation.empty()) {
      summary.validation = eval_split(params, corpus.split.validation);
      emit(to_record(*summary.validation, epoch, "validation", config.variant));
      improved = !best || summary.validation->acc1() > result.best_validation_acc1;
    }
    if (!tc.early_stopping) improved = true;
    if (improved) {
      best = params;
      result.best_epoch = epoch;
      if (summary.validation) result.best_validation_acc1 = summary.validation->acc1();
      stale = 0;
    } else {
      ++stale;
    }
    result.epochs.push_back(std::move(summary));

    if (tc.early_stopping && stale >= tc.patience) {
      result.early_stopped = true;
      break;
    }
    const auto& last = result.epochs.back();
    if (tc.target_train_acc > 0 && last.train && last.train->acc1() >= tc.target_train_acc) break;
  }

  result.params = std::move(*best);
  result.final_train = eval_split(result.params, train_windows);
  emit(to_record(result.final_train, result.best_epoch, "final_train", config.variant));
  return result;
}

}  // namespace mobtcast::train
