#include "mobtcast/model/network.hpp"

#include <cmath>
#include <unordered_map>

#include "mobtcast/data/time.hpp"
#include "mobtcast/diff/random.hpp"

namespace mobtcast::model {

using diff::Shape;
using diff::Tensor;

diff::Tensor positional_encoding(std::size_t n, std::size_t d) {
  if (n == 0 || d == 0 || d % 2 != 0) throw Error("positional_encoding needs n >= 1 and even d >= 2");
  Tensor pe({n, d}, 0.0);
  for (std::size_t pos = 0; pos < n; ++pos) {
    for (std::size_t i = 0; i < d; i += 2) {
      const double angle = static_cast<double>(pos) / std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d));
      pe[pos * d + i] = std::sin(angle);
      pe[pos * d + i + 1] = std::cos(angle);
    }
  }
  return pe;
}

namespace {

void add_encoder_shapes(std::vector<std::pair<std::string, Shape>>& out, const std::string& prefix,
                        const ModelConfig& c) {
  const std::size_t d = c.d_model;
  for (std::size_t l = 0; l < c.layers; ++l) {
    const std::string p = prefix + "l" + std::to_string(l) + ".";
    out.emplace_back(p + "ln1.g", Shape{d});
    out.emplace_back(p + "ln1.b", Shape{d});
    // No key bias: it shifts every score of a row equally and cancels in the softmax.
    for (const char* m : {"q", "k", "v", "o"}) {
      out.emplace_back(p + "attn.w" + m, Shape{d, d});
      if (*m != 'k') out.emplace_back(p + "attn.b" + m, Shape{d});
    }
    out.emplace_back(p + "ln2.g", Shape{d});
    out.emplace_back(p + "ln2.b", Shape{d});
    out.emplace_back(p + "ffn.w1", Shape{d, c.ffn});
    out.emplace_back(p + "ffn.b1", Shape{c.ffn});
    out.emplace_back(p + "ffn.w2", Shape{c.ffn, d});
    out.emplace_back(p + "ffn.b2", Shape{d});
  }
  out.emplace_back(prefix + "ln_f.g", Shape{d});
  out.emplace_back(prefix + "ln_f.b", Shape{d});
}

bool ends_with(const std::string& s, std::string_view suffix) { return s.ends_with(suffix); }

}  // namespace

std::vector<std::pair<std::string, Shape>> parameter_shapes(const ModelConfig& c) {
  const std::size_t d = c.d_model;
  std::vector<std::pair<std::string, Shape>> out;
  out.emplace_back("emb.poi", Shape{c.num_pois, c.d_poi});
  out.emplace_back("emb.cat", Shape{c.num_categories, c.d_cat});
  out.emplace_back("emb.time", Shape{static_cast<std::size_t>(data::kTimeSlots), c.d_time});
  out.emplace_back("emb.user", Shape{c.num_users, c.d_user});
  add_encoder_shapes(out, "enc.", c);
  for (const char* m : {"wq", "wk", "wv", "wo"}) out.emplace_back(std::string("social.") + m, Shape{d, d});
  out.emplace_back("geo.proj.w", Shape{2, d});
  out.emplace_back("geo.proj.b", Shape{d});
  add_encoder_shapes(out, "geo.", c);
  out.emplace_back("fuse.w", Shape{2 * d + c.d_user, d});
  out.emplace_back("fuse.b", Shape{d});
  out.emplace_back(std::string(kPoiHeadPrefix) + "w1", Shape{d, d});
  out.emplace_back(std::string(kPoiHeadPrefix) + "b1", Shape{d});
  out.emplace_back(std::string(kPoiHeadPrefix) + "w2", Shape{d, c.num_pois});
  out.emplace_back(std::string(kPoiHeadPrefix) + "b2", Shape{c.num_pois});
  out.emplace_back(std::string(kGeoHeadPrefix) + "w1", Shape{d, d});
  out.emplace_back(std::string(kGeoHeadPrefix) + "b1", Shape{d});
  out.emplace_back(std::string(kGeoHeadPrefix) + "w2", Shape{d, 2});
  out.emplace_back(std::string(kGeoHeadPrefix) + "b2", Shape{2});
  return out;
}

diff::ParameterSet init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  const std::uint64_t root = diff::derive_seed(seed, "init");
  diff::ParameterSet params;
  for (auto& [name, shape] : parameter_shapes(config)) {
    Tensor t(shape, 0.0);
    const bool is_gain = ends_with(name, ".g");
    const bool is_embedding = name.starts_with("emb.");
    const bool is_matrix = shape.size() == 2 && !is_embedding;
    if (is_gain) {
      t.fill(1.0);
    } else if (is_matrix || is_embedding) {
      const double bound = is_embedding ? 1.0 / std::sqrt(static_cast<double>(shape[1]))
                                        : std::sqrt(6.0 / static_cast<double>(shape[0] + shape[1]));
      const std::uint64_t stream = diff::derive_seed(root, name);
      for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = bound * (2.0 * diff::unit_interval(diff::derive_seed(stream, static_cast<std::uint64_t>(i))) - 1.0);
      }
    }
    params.add(name, std::move(t));
  }
  return params;
}

Network::Network(diff::Graph& graph, const ModelConfig& config, bool train)
    : g_(graph), c_(config), train_(train) {}

NodeRef Network::linear(NodeRef x, const std::string& w, const std::string& b) {
  return g_.add(g_.matmul(x, g_.param(w)), g_.param(b));
}

NodeRef Network::maybe_dropout(NodeRef x) {
  if (!train_ || c_.dropout <= 0.0) return x;
  return g_.dropout(x, c_.dropout, stream_++);
}

NodeRef Network::split_heads(NodeRef x, std::size_t S, std::size_t L) {
  const std::size_t H = c_.heads;
  const std::size_t dh = c_.head_dim();
  auto r = g_.reshape(x, {S, L, H, dh});
  auto p = g_.permute(r, {0, 2, 1, 3});
  return g_.reshape(p, {S * H, L, dh});
}

NodeRef Network::merge_heads(NodeRef x, std::size_t S, std::size_t L) {
  const std::size_t H = c_.heads;
  const std::size_t dh = c_.head_dim();
  auto r = g_.reshape(x, {S, H, L, dh});
  auto p = g_.permute(r, {0, 2, 1, 3});
  return g_.reshape(p, {S, L, H * dh});
}

NodeRef Network::embed_steps(const std::vector<std::int64_t>& pois, const std::vector<std::int64_t>& cats,
                             const std::vector<std::int64_t>& slots) {
  const std::size_t N = pois.size();
  if (cats.size() != N || slots.size() != N) throw Error("embed_steps: id lists differ in length");
  auto ep = g_.embedding(g_.param("emb.poi"), pois);
  auto ec = c_.use_semantic ? g_.embedding(g_.param("emb.cat"), cats) : g_.constant(Tensor({N, c_.d_cat}, 0.0));
  auto et = g_.embedding(g_.param("emb.time"), slots);
  return g_.concat({ep, ec, et});
}

NodeRef Network::encode(const std::string& prefix, NodeRef x, std::size_t S, std::size_t L) {
  const std::size_t d = c_.d_model;
  for (std::size_t l = 0; l < c_.layers; ++l) {
    const std::string p = prefix + "l" + std::to_string(l) + ".";
    const bool last = l + 1 == c_.layers;
    auto a = g_.layer_norm(x, g_.param(p + "ln1.g"), g_.param(p + "ln1.b"));
    auto k = split_heads(g_.matmul(a, g_.param(p + "attn.wk")), S, L);
    auto v = split_heads(linear(a, p + "attn.wv", p + "attn.bv"), S, L);
    if (!last) {
      auto q = split_heads(linear(a, p + "attn.wq", p + "attn.bq"), S, L);
      auto att = diff::scaled_dot_product_attention(g_, q, k, v);
      attention_.push_back(att.weights);
      auto o = linear(merge_heads(att.output, S, L), p + "attn.wo", p + "attn.bo");
      x = g_.add(x, maybe_dropout(o));
      auto b = g_.layer_norm(x, g_.param(p + "ln2.g"), g_.param(p + "ln2.b"));
      auto hdn = g_.relu(linear(b, p + "ffn.w1", p + "ffn.b1"));
      x = g_.add(x, maybe_dropout(linear(hdn, p + "ffn.w2", p + "ffn.b2")));
    } else {
      // Only the final position feeds h, so the last layer queries that row alone.
      auto a_last = g_.select(a, 1, L - 1);  // [S, d]
      auto q = g_.reshape(linear(a_last, p + "attn.wq", p + "attn.bq"), {S * c_.heads, 1, c_.head_dim()});
      auto att = diff::scaled_dot_product_attention(g_, q, k, v);
      attention_.push_back(att.weights);
      auto o = linear(g_.reshape(att.output, {S, d}), p + "attn.wo", p + "attn.bo");
      auto y = g_.add(g_.select(x, 1, L - 1), maybe_dropout(o));
      auto b = g_.layer_norm(y, g_.param(p + "ln2.g"), g_.param(p + "ln2.b"));
      auto hdn = g_.relu(linear(b, p + "ffn.w1", p + "ffn.b1"));
      x = g_.add(y, maybe_dropout(linear(hdn, p + "ffn.w2", p + "ffn.b2")));
    }
  }
  return g_.layer_norm(x, g_.param(prefix + "ln_f.g"), g_.param(prefix + "ln_f.b"));
}

NodeRef Network::mobility_features(const std::vector<std::int64_t>& pois, const std::vector<std::int64_t>& cats,
                                   const std::vector<std::int64_t>& slots, std::size_t S) {
  if (S == 0 || pois.size() % S != 0) throw Error("mobility_features: ids do not split into S sequences");
  const std::size_t L = pois.size() / S;
  auto e = g_.reshape(embed_steps(pois, cats, slots), {S, L, c_.d_model});
  auto x = g_.add(e, g_.constant(positional_encoding(L, c_.d_model), "pe"));
  return encode("enc.", maybe_dropout(x), S, L);
}

Network::Social Network::social_aggregate(NodeRef h_self, NodeRef features, const std::vector<std::int64_t>& rows,
                                          std::size_t k) {
  const std::size_t slots = k + 1;
  const auto& hs = g_.shape(h_self);
  const std::size_t B = hs.at(0);
  const std::size_t d = c_.d_model;
  const std::size_t H = c_.heads;
  if (rows.size() != B * slots) throw Error("social_aggregate: expected " + std::to_string(B * slots) + " rows");

  std::vector<std::uint8_t> take(B, 0);
  std::vector<std::uint8_t> mask(B * H * slots, 0);
  bool any = false;
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t s = 0; s < slots; ++s) {
      const bool present = rows[b * slots + s] >= 0;
      if (s > 0 && present) take[b] = 1;
      for (std::size_t h = 0; h < H; ++h) mask[(b * H + h) * slots + s] = present;
    }
    any = any || take[b];
  }
  if (!any) return {h_self, std::nullopt};

  auto stack = g_.reshape(g_.embedding(features, rows), {B, slots, d});
  auto q = g_.reshape(g_.matmul(h_self, g_.param("social.wq")), {B * H, 1, c_.head_dim()});
  auto kk = split_heads(g_.matmul(stack, g_.param("social.wk")), B, slots);
  auto vv = split_heads(g_.matmul(stack, g_.param("social.wv")), B, slots);
  auto att = diff::scaled_dot_product_attention(g_, q, kk, vv, std::move(mask));
  auto out = g_.matmul(g_.reshape(att.output, {B, d}), g_.param("social.wo"));
  return {g_.blend_rows(out, h_self, std::move(take)), att.weights};
}

NodeRef Network::aux_geo_features(const Tensor& coords) {
  if (coords.rank() != 3 || coords.dim(2) != 2) throw Error("aux_geo_features expects [B, L, 2] coordinates");
  const std::size_t B = coords.dim(0);
  const std::size_t L = coords.dim(1);
  auto e = linear(g_.constant(coords, "coords"), "geo.proj.w", "geo.proj.b");
  auto x = g_.add(e, g_.constant(positional_encoding(L, c_.d_model), "pe"));
  return encode("geo.", maybe_dropout(x), B, L);
}

NodeRef Network::user_embedding(const std::vector<std::int64_t>& users) {
  return g_.embedding(g_.param("emb.user"), users);
}

NodeRef Network::fuse(NodeRef context, std::optional<NodeRef> g, NodeRef user) {
  const std::size_t B = g_.shape(context).at(0);
  auto geo = g ? *g : g_.constant(Tensor({B, c_.d_model}, 0.0));
  return g_.relu(linear(g_.concat({context, geo, user}), "fuse.w", "fuse.b"));
}

NodeRef Network::poi_logits(NodeRef f) {
  const std::string p(kPoiHeadPrefix);
  return linear(g_.relu(linear(f, p + "w1", p + "b1")), p + "w2", p + "b2");
}

NodeRef Network::location(NodeRef f) {
  const std::string p(kGeoHeadPrefix);
  return linear(g_.relu(linear(f, p + "w1", p + "b1")), p + "w2", p + "b2");
}

NetworkNodes build_network(diff::Graph& graph, const ModelConfig& c, const std::vector<BatchItem>& batch,
                           const data::UserSequences& sequences, const Tensor& poi_coords,
                           const BuildOptions& options) {
  if (batch.empty()) throw Error("build_network: empty batch");
  const std::size_t B = batch.size();
  const std::size_t n = c.n;
  const std::size_t d = c.d_model;
  Network net(graph, c, options.train);
  NetworkNodes out;
  out.batch = B;

  std::vector<std::int64_t> users(B);
  for (std::size_t b = 0; b < B; ++b) {
    const auto* w = batch[b].window;
    if (w == nullptr || w->length() != n) throw Error("build_network: window length differs from n");
    users[b] = w->user_id;
  }

  if (c.use_mobility) {
    // Self windows first, then each distinct neighbor history once.
    std::vector<std::int64_t> pois, cats, slots;
    pois.reserve(B * n);
    for (const auto& item : batch) {
      const auto& w = *item.window;
      pois.insert(pois.end(), w.poi_ids.begin(), w.poi_ids.end());
      for (std::size_t i = 0; i < n; ++i) {
        cats.push_back(w.category_ids[i]);
        slots.push_back(w.time_slots[i]);
      }
    }
    std::size_t S = B;
    std::vector<std::int64_t> rows;
    std::size_t k = 0;
    if (c.use_social) {
      for (const auto& item : batch) k = std::max(k, std::min(item.neighbors.size(), c.k_max));
      rows.assign(B * (k + 1), -1);
      std::unordered_map<std::uint64_t, std::size_t> seen;
      for (std::size_t b = 0; b < B; ++b) {
        rows[b * (k + 1)] = static_cast<std::int64_t>(b);
        const auto& nbs = batch[b].neighbors;
        out.neighbor_counts.push_back(std::min(nbs.size(), c.k_max));
        for (std::size_t j = 0; j < nbs.size() && j < c.k_max; ++j) {
          const auto& span = nbs[j];
          if (span.end - span.begin != n) throw Error("build_network: neighbor history length differs from n");
          const std::uint64_t key = (static_cast<std::uint64_t>(span.user) << 32) ^ span.end;
          auto [it, inserted] = seen.try_emplace(key, S);
          if (inserted) {
            const auto& seq = sequences.users.at(static_cast<std::size_t>(span.user));
            for (std::size_t i = span.begin; i < span.end; ++i) {
              pois.push_back(seq[i].poi);
              cats.push_back(seq[i].category);
              slots.push_back(seq[i].slot);
            }
            ++S;
          }
          rows[b * (k + 1) + 1 + j] = static_cast<std::int64_t>(it->second);
        }
      }
    }
    auto h_all = net.mobility_features(pois, cats, slots, S);
    out.h = S == B ? h_all : graph.embedding(h_all, [&] {
      std::vector<std::int64_t> idx(B);
      for (std::size_t b = 0; b < B; ++b) idx[b] = static_cast<std::int64_t>(b);
      return idx;
    }());
    out.context = out.h;
    if (c.use_social && k > 0) {
      auto social = net.social_aggregate(out.h, h_all, rows, k);
      out.context = social.H;
      out.social_weights = social.weights;
      out.social_slots = k + 1;
    }
  } else {
    out.h = graph.constant(Tensor({B, d}, 0.0));
    out.context = out.h;
  }

  if (c.use_aux) {
    const std::size_t L = c.aux_input_len;
    Tensor coords({B, L, 2}, 0.0);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t i = 0; i < L; ++i) {
        coords[(b * L + i) * 2] = batch[b].window->coords[i][0];
        coords[(b * L + i) * 2 + 1] = batch[b].window->coords[i][1];
      }
    }
    out.g = net.aux_geo_features(coords);
  }

  out.user = net.user_embedding(users);
  out.f = net.fuse(out.context, out.g, out.user);
  out.encoder_attention = net.attention_nodes();

  const bool want_poi = options.poi_head || (options.losses && (c.theta1 > 0 || c.theta3 > 0));
  const bool want_geo = options.geo_head || (options.losses && (c.theta2 > 0 || c.theta3 > 0));
  if (want_poi) {
    out.logits = net.poi_logits(out.f);
    out.probs = graph.softmax(*out.logits);
    out.inferred_coord = graph.argmax_lookup(*out.logits, graph.constant(poi_coords, "poi_coords"));
  }
  if (want_geo) out.pred_coord = net.location(out.f);

  if (options.losses) {
    std::vector<std::int64_t> targets(B);
    Tensor target_coords({B, 2}, 0.0);
    for (std::size_t b = 0; b < B; ++b) {
      targets[b] = batch[b].window->target_poi_id;
      target_coords[b * 2] = batch[b].window->target_coord[0];
      target_coords[b * 2 + 1] = batch[b].window->target_coord[1];
    }
    std::optional<NodeRef> total;
    auto accumulate = [&](NodeRef term, double theta) {
      auto weighted = theta == 1.0 ? term : graph.scale(term, theta);
      total = total ? graph.add(*total, weighted) : weighted;
    };
    if (c.theta1 > 0) {
      out.l1 = graph.scale(graph.mean(graph.pick(graph.log_softmax(*out.logits), targets)), -1.0);
      accumulate(*out.l1, c.theta1);
    }
    if (c.theta2 > 0) {
      out.l2 = graph.mean(graph.squared_error(*out.pred_coord, graph.constant(target_coords, "target_coords")));
      accumulate(*out.l2, c.theta2);
    }
    if (c.theta3 > 0) {
      out.l3 = graph.mean(graph.squared_error(*out.inferred_coord, *out.pred_coord));
      accumulate(*out.l3, c.theta3);
    }
    if (!total) throw Error("build_network: all loss weights are zero");
    out.total = *total;
    graph.set_output("loss", *total);
  }
  return out;
}

Tensor coordinate_table(const data::PoiRegistry& registry) {
  Tensor t({registry.size(), 2}, 0.0);
  for (std::size_t p = 0; p < registry.size(); ++p) {
    t[p * 2] = registry.pois[p].x;
    t[p * 2 + 1] = registry.pois[p].y;
  }
  return t;
}

std::vector<double> social_alpha(const diff::Graph& graph, const NetworkNodes& nodes, const ModelConfig& c,
                                 std::size_t b) {
  const std::size_t m = nodes.neighbor_counts.empty() ? 0 : nodes.neighbor_counts.at(b);
  std::vector<double> alpha(1 + m, 0.0);
  if (!nodes.social_weights || m == 0) {
    alpha[0] = 1.0;
    return alpha;
  }
  const auto& w = graph.value(*nodes.social_weights);
  const std::size_t slots = nodes.social_slots;
  for (std::size_t h = 0; h < c.heads; ++h) {
    for (std::size_t s = 0; s <= m; ++s) alpha[s] += w[(b * c.heads + h) * slots + s] / static_cast<double>(c.heads);
  }
  return alpha;
}

}  // namespace mobtcast::model
