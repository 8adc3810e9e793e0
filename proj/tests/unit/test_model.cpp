#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "mobtcast/diff/gradcheck.hpp"
#include "mobtcast/model/network.hpp"
#include "tiny_instance.hpp"

using namespace mobtcast;
using namespace mobtcast::model;
using diff::Graph;
using diff::ParameterSet;
using diff::Tensor;
using fixtures::make_tiny;
using fixtures::tiny_config;

namespace {

std::vector<double> row(const Tensor& t, std::size_t r) {
  const std::size_t d = t.dim(t.rank() - 1);
  return {t.data() + r * d, t.data() + (r + 1) * d};
}

double l2_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

// Encodes one custom length-n sequence and returns h.
std::vector<double> encode_one(const ModelConfig& c, ParameterSet& p, const std::vector<std::int64_t>& pois,
                               const std::vector<std::int64_t>& cats, const std::vector<std::int64_t>& slots) {
  Graph g(p);
  Network net(g, c, false);
  auto h = net.mobility_features(pois, cats, slots, 1);
  g.set_output("h", h);
  auto out = diff::forward(g);
  return {out.at("h").values().begin(), out.at("h").values().end()};
}

}  // namespace

TEST(PositionalEncoding, Values) {
  auto pe = positional_encoding(20, 4);
  EXPECT_EQ(pe[0], 0.0);
  EXPECT_EQ(pe[1], 1.0);
  EXPECT_EQ(pe[2], 0.0);
  EXPECT_EQ(pe[3], 1.0);
  EXPECT_NEAR(pe[4], 0.84147, 1e-5);
  EXPECT_NEAR(pe[5], 0.54030, 1e-5);
  EXPECT_NEAR(pe[6], 0.01000, 1e-5);
  EXPECT_NEAR(pe[7], 0.99995, 1e-5);
  auto big = positional_encoding(20, 128);
  for (std::size_t a = 0; a < 20; ++a) {
    for (std::size_t b = a + 1; b < 20; ++b) EXPECT_NE(row(big, a), row(big, b));
  }
}

TEST(Config, Variants) {
  auto v0 = variant_config("V0");
  EXPECT_FALSE(v0.use_semantic);
  EXPECT_FALSE(v0.use_social);
  EXPECT_FALSE(v0.use_aux);
  EXPECT_EQ(v0.theta1, 1.0);
  EXPECT_EQ(v0.theta2, 0.0);
  EXPECT_EQ(v0.theta3, 0.0);
  auto v4 = variant_config("V4");
  EXPECT_EQ(v4.theta2, 0.0);
  EXPECT_EQ(v4.theta3, 1.0);
  auto full = variant_config("full");
  EXPECT_TRUE(full.use_social && full.use_aux && full.use_semantic);
  EXPECT_EQ(full.theta1 + full.theta2 + full.theta3, 3.0);
  EXPECT_THROW(variant_config("V9"), Error);
  ModelConfig c;
  c.num_pois = c.num_users = c.num_categories = 1;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.d_poi + c.d_cat + c.d_time, 128u);
  c.d_cat = 20;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Config, ManifestRoundTrip) {
  auto c = tiny_config("V3");
  DatasetFingerprint f{20, 3, 4, {-74.1, -73.2, 40.1, 40.9}};
  ModelConfig c2;
  DatasetFingerprint f2;
  read_manifest(write_manifest(c, f), c2, f2);
  EXPECT_EQ(f, f2);
  EXPECT_EQ(write_manifest(c, f), write_manifest(c2, f2));
}

TEST(Embed, BlockStructure) {
  auto c = tiny_config();
  auto p = init_params(c, 3);
  Graph g(p);
  Network net(g, c, false);
  auto e = net.embed_steps({4, 4, 4}, {1, 1, 2}, {7, 7, 7});
  g.set_output("e", e);
  auto out = diff::forward(g).at("e");
  EXPECT_EQ(out.dim(1), c.d_model);
  EXPECT_EQ(row(out, 0), row(out, 1));
  auto a = row(out, 0);
  auto b = row(out, 2);
  for (std::size_t j = 0; j < c.d_model; ++j) {
    const bool middle = j >= c.d_poi && j < c.d_poi + c.d_cat;
    if (middle) {
      EXPECT_NE(a[j], b[j]);
    } else {
      EXPECT_EQ(a[j], b[j]);
    }
  }
}

TEST(Embed, NoSemanticZeroesCategoryBlock) {
  auto c = tiny_config("V0");
  auto p = init_params(c, 3);
  Graph g(p);
  Network net(g, c, false);
  g.set_output("e", net.embed_steps({4}, {2}, {7}));
  auto e = diff::forward(g).at("e");
  for (std::size_t j = c.d_poi; j < c.d_poi + c.d_cat; ++j) EXPECT_EQ(e[j], 0.0);
}

TEST(Embed, OutOfRangeIdRejected) {
  auto c = tiny_config();
  auto p = init_params(c, 3);
  Graph g(p);
  Network net(g, c, false);
  EXPECT_THROW(net.embed_steps({20}, {0}, {0}), Error);
  EXPECT_THROW(net.embed_steps({0}, {0}, {168}), Error);
}

TEST(Mobility, DimensionDeterminismAndOrder) {
  auto c = tiny_config();
  auto p = init_params(c, 5);
  const std::vector<std::int64_t> pois{1, 2, 3, 4, 9}, cats{1, 2, 3, 0, 1}, slots{5, 6, 7, 8, 9};
  auto h1 = encode_one(c, p, pois, cats, slots);
  auto h2 = encode_one(c, p, pois, cats, slots);
  EXPECT_EQ(h1.size(), c.d_model);
  EXPECT_EQ(h1, h2);
  auto swapped = pois;
  std::swap(swapped.front(), swapped.back());
  EXPECT_GT(l2_diff(h1, encode_one(c, p, swapped, cats, slots)), 0.0);
}

TEST(Mobility, FinalPositionDependsOnEveryPosition) {
  auto c = tiny_config();
  auto p = init_params(c, 6);
  const std::vector<std::int64_t> pois{1, 2, 3, 4, 9}, cats{1, 2, 3, 0, 1}, slots{5, 6, 7, 8, 9};
  auto base = encode_one(c, p, pois, cats, slots);
  for (std::size_t i = 0; i < pois.size(); ++i) {
    auto changed = pois;
    changed[i] = 17;
    EXPECT_GT(l2_diff(base, encode_one(c, p, changed, cats, slots)), 1e-9) << "position " << i;
  }
}

TEST(Social, HandEvaluatedAttention) {
  ModelConfig c = tiny_config();
  c.d_model = 2;
  c.d_poi = 1;
  c.d_cat = 0;
  c.d_time = 1;
  c.heads = 1;
  ParameterSet p;
  Tensor eye({2, 2}, std::vector<double>{1, 0, 0, 1});
  for (const char* m : {"social.wq", "social.wk", "social.wv", "social.wo"}) p.add(m, eye);
  Graph g(p);
  Network net(g, c, false);
  auto feats = g.constant(Tensor({2, 2}, std::vector<double>{1, 0, 0, 1}));
  auto self = g.constant(Tensor({1, 2}, std::vector<double>{1, 0}));
  auto s = net.social_aggregate(self, feats, {0, 1}, 1);
  g.set_output("H", s.H);
  g.set_output("w", *s.weights);
  auto out = diff::forward(g);
  EXPECT_NEAR(out.at("w")[0], 0.66985, 1e-4);
  EXPECT_NEAR(out.at("w")[1], 0.33015, 1e-4);
  EXPECT_NEAR(out.at("H")[0], 0.66985, 1e-4);
  EXPECT_NEAR(out.at("H")[1], 0.33015, 1e-4);
}

TEST(Social, NoNeighborsKeepsSelfExactlyAndPadsAreZero) {
  auto t = make_tiny(2);
  auto p = init_params(t.config, 7);
  // Window of user 2 (no neighbors) next to windows of user 0 (one neighbor).
  std::vector<BatchItem> batch = t.batch(2, 1);
  batch.push_back({&t.windows.back(), {}});
  Graph g(p);
  auto nodes = build_network(g, t.config, batch, t.sequences, t.poi_coords, {});
  diff::forward(g);
  ASSERT_TRUE(nodes.social_weights);
  EXPECT_EQ(row(g.value(nodes.context), 2), row(g.value(nodes.h), 2));
  EXPECT_NE(row(g.value(nodes.context), 0), row(g.value(nodes.h), 0));
  const auto& w = g.value(*nodes.social_weights);
  const std::size_t slots = nodes.social_slots;
  for (std::size_t h = 0; h < t.config.heads; ++h) EXPECT_EQ(w[(2 * t.config.heads + h) * slots + 1], 0.0);
  auto alpha = social_alpha(g, nodes, t.config, 0);
  ASSERT_EQ(alpha.size(), 2u);
  EXPECT_NEAR(alpha[0] + alpha[1], 1.0, 1e-12);
}

TEST(Social, DisabledPathIgnoresNeighbors) {
  auto t = make_tiny(3, "V5");
  auto p = init_params(t.config, 8);
  auto batch = t.batch(4);
  auto with = batch;
  for (auto& item : with) item.neighbors.push_back({1, 0, 5});
  Graph g1(p), g2(p);
  auto n1 = build_network(g1, t.config, batch, t.sequences, t.poi_coords, {});
  auto n2 = build_network(g2, t.config, with, t.sequences, t.poi_coords, {});
  auto o1 = diff::forward(g1);
  auto o2 = diff::forward(g2);
  EXPECT_EQ(g1.value(*n1.logits), g2.value(*n2.logits));
  EXPECT_EQ(o1.at("loss"), o2.at("loss"));
}

TEST(Geo, FiniteAndTranslationSensitive) {
  auto c = tiny_config();
  auto p = init_params(c, 9);
  auto run = [&](double shift, bool constant) {
    Tensor coords({1, 5, 2}, 0.3);
    for (std::size_t i = 0; i < 10 && !constant; ++i) coords[i] = 0.1 * static_cast<double>(i) - 0.4;
    for (auto& v : coords.values()) v += shift;
    Graph g(p);
    Network net(g, c, false);
    g.set_output("g", net.aux_geo_features(coords));
    auto out = diff::forward(g).at("g");
    return std::vector<double>(out.values().begin(), out.values().end());
  };
  auto flat = run(0.0, true);
  EXPECT_EQ(flat.size(), c.d_model);
  for (double v : flat) EXPECT_TRUE(std::isfinite(v));
  EXPECT_GT(l2_diff(run(0.0, false), run(0.1, false)), 0.0);
}

TEST(Fuse, ZeroWeightsGiveBiasAndUserMatters) {
  auto c = tiny_config();
  auto p = init_params(c, 10);
  auto run = [&](std::int64_t user) {
    Graph g(p);
    Network net(g, c, false);
    auto ctx = g.constant(Tensor({1, c.d_model}, 0.2));
    auto geo = g.constant(Tensor({1, c.d_model}, -0.1));
    g.set_output("f", net.fuse(ctx, geo, net.user_embedding({user})));
    auto f = diff::forward(g).at("f");
    return std::vector<double>(f.values().begin(), f.values().end());
  };
  EXPECT_GT(l2_diff(run(0), run(1)), 0.0);
  p.at("fuse.w").fill(0.0);
  for (std::size_t j = 0; j < c.d_model; ++j) p.at("fuse.b")[j] = 0.01 * static_cast<double>(j + 1);
  auto f = run(2);
  for (std::size_t j = 0; j < c.d_model; ++j) EXPECT_EQ(f[j], p.at("fuse.b")[j]);
}

TEST(Heads, ProbabilitiesAndDegenerateWeights) {
  auto t = make_tiny(4);
  auto p = init_params(t.config, 11);
  auto batch = t.batch(6);
  {
    Graph g(p);
    auto nodes = build_network(g, t.config, batch, t.sequences, t.poi_coords, {});
    diff::forward(g);
    const auto& probs = g.value(*nodes.probs);
    for (std::size_t b = 0; b < 6; ++b) {
      double s = 0;
      for (double v : row(probs, b)) {
        EXPECT_GT(v, 0.0);
        s += v;
      }
      EXPECT_NEAR(s, 1.0, 1e-6);
      for (double v : row(g.value(*nodes.pred_coord), b)) EXPECT_TRUE(std::isfinite(v));
    }
  }
  p.at("poi_head.w2").fill(0.0);
  p.at("poi_head.b2").fill(0.0);
  p.at("geo_head.w2").fill(0.0);
  p.at("geo_head.b2")[0] = 0.25;
  p.at("geo_head.b2")[1] = -0.5;
  Graph g(p);
  auto nodes = build_network(g, t.config, batch, t.sequences, t.poi_coords, {});
  diff::forward(g);
  for (double v : g.value(*nodes.probs).values()) EXPECT_NEAR(v, 1.0 / 20.0, 1e-15);
  EXPECT_EQ(row(g.value(*nodes.pred_coord), 3), (std::vector<double>{0.25, -0.5}));
  // Uniform logits: argmax ties resolve to POI 0.
  EXPECT_EQ(row(g.value(*nodes.inferred_coord), 0), row(t.poi_coords, 0));
}

TEST(Heads, InferredCoordinateIsArgmaxPoi) {
  auto t = make_tiny(5);
  auto p = init_params(t.config, 12);
  Graph g(p);
  auto nodes = build_network(g, t.config, t.batch(8), t.sequences, t.poi_coords, {});
  diff::forward(g);
  const auto& probs = g.value(*nodes.probs);
  for (std::size_t b = 0; b < 8; ++b) {
    auto r = row(probs, b);
    const auto best = static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
    EXPECT_EQ(row(g.value(*nodes.inferred_coord), b), row(t.poi_coords, best));
  }
}

TEST(Network, GradientOracleEachThetaPattern) {
  const std::vector<std::array<double, 3>> patterns{{1, 0, 0}, {1, 1, 0}, {1, 0, 1}, {1, 1, 1}};
  for (const auto& th : patterns) {
    auto t = make_tiny(6);
    t.config.theta1 = th[0];
    t.config.theta2 = th[1];
    t.config.theta3 = th[2];
    auto p = init_params(t.config, 13);
    Graph g(p);
    build_network(g, t.config, t.batch(3), t.sequences, t.poi_coords, {});
    // Composite losses carry ~1e-10 evaluation noise; h = 1e-4 keeps it below
    // the tolerance for gradients near 1e-7 without reaching ReLU/argmax kinks.
    auto r = diff::finite_diff_check(g, {}, 1e-4);
    EXPECT_LT(r.max_relative_error, 1e-4) << "theta (" << th[0] << "," << th[1] << "," << th[2] << ") worst "
                                          << r.worst_parameter << "[" << r.worst_index << "] a=" << r.worst_analytic
                                          << " n=" << r.worst_numeric;
  }
}

TEST(Network, ConsistencyLossDetachedFromPoiHead) {
  auto t = make_tiny(7);
  t.config.theta1 = 0;
  t.config.theta2 = 0;
  t.config.theta3 = 1;
  auto p = init_params(t.config, 14);
  Graph g(p);
  build_network(g, t.config, t.batch(4), t.sequences, t.poi_coords, {});
  diff::forward(g);
  auto grads = diff::backward(g, "loss");
  double geo_norm = 0;
  for (std::size_t i = 0; i < grads.size(); ++i) {
    const auto& name = grads.name(i);
    for (double v : grads.at(i).values()) {
      if (name.starts_with(kPoiHeadPrefix)) EXPECT_EQ(v, 0.0) << name;
      if (name.starts_with(kGeoHeadPrefix)) geo_norm += std::abs(v);
    }
  }
  EXPECT_GT(geo_norm, 0.0);
}

TEST(Network, GatedLossesAreAbsent) {
  auto t = make_tiny(8, "V0");
  auto p = init_params(t.config, 15);
  Graph g(p);
  auto nodes = build_network(g, t.config, t.batch(3), t.sequences, t.poi_coords, {});
  EXPECT_TRUE(nodes.l1);
  EXPECT_FALSE(nodes.l2);
  EXPECT_FALSE(nodes.l3);
  auto out = diff::forward(g);
  EXPECT_EQ(out.at("loss")[0], g.value(*nodes.l1)[0]);
}
