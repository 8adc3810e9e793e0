#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <numeric>
#include <random>

#include "mobtcast/diff/adam.hpp"
#include "mobtcast/diff/checkpoint.hpp"
#include "mobtcast/diff/gradcheck.hpp"
#include "mobtcast/diff/graph.hpp"
#include "mobtcast/diff/random.hpp"

using namespace mobtcast::diff;
using mobtcast::Error;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, double scale = 1.0) {
  Tensor t(shape, 0.0);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = scale * (2.0 * unit_interval(derive_seed(seed, i)) - 1.0);
  return t;
}

}  // namespace

TEST(Forward, IdentityGraph) {
  Graph g;
  auto x = g.input("x", {1});
  g.set_output("y", x);
  auto out = forward(g, {{"x", Tensor::vector({3.0})}});
  EXPECT_EQ(out.at("y")[0], 3.0);
}

TEST(Forward, SoftmaxUniformAndHandValues) {
  Graph g;
  auto a = g.input("a", {4});
  auto b = g.input("b", {3});
  g.set_output("sa", g.softmax(a));
  g.set_output("sb", g.softmax(b));
  auto out = forward(g, {{"a", Tensor({4}, 0.0)}, {"b", Tensor::vector({1, 2, 3})}});
  for (double v : out.at("sa").values()) EXPECT_DOUBLE_EQ(v, 0.25);
  const auto& sb = out.at("sb");
  EXPECT_NEAR(sb[0], 0.0900, 1e-4);
  EXPECT_NEAR(sb[1], 0.2447, 1e-4);
  EXPECT_NEAR(sb[2], 0.6652, 1e-4);
}

TEST(Forward, SoftmaxRowsSumToOne) {
  Graph g;
  auto a = g.input("a", {7, 13});
  g.set_output("s", g.softmax(a));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto s = forward(g, {{"a", random_tensor({7, 13}, seed, 30.0)}}).at("s");
    for (std::size_t r = 0; r < 7; ++r) {
      double total = 0;
      for (std::size_t c = 0; c < 13; ++c) {
        const double v = s[r * 13 + c];
        EXPECT_GT(v, 0.0);
        EXPECT_LT(v, 1.0);
        total += v;
      }
      EXPECT_NEAR(total, 1.0, 1e-9);
    }
  }
}

TEST(Forward, MaskedSoftmaxZeroesMaskedEntries) {
  Graph g;
  auto a = g.input("a", {1, 4});
  g.set_output("s", g.softmax(a, {1, 0, 1, 0}));
  auto s = forward(g, {{"a", Tensor({1, 4}, std::vector<double>{0.0, 5.0, 0.0, 9.0})}}).at("s");
  EXPECT_EQ(s[1], 0.0);
  EXPECT_EQ(s[3], 0.0);
  EXPECT_DOUBLE_EQ(s[0], 0.5);
}

TEST(Forward, ShapeMismatchNamesNode) {
  Graph g;
  auto a = g.input("lhs", {2, 3});
  auto b = g.input("rhs", {4, 2});
  try {
    g.matmul(a, b);
    FAIL() << "expected shape error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("matmul"), std::string::npos) << e.what();
  }
}

TEST(Forward, NonFiniteRaises) {
  Graph g;
  auto a = g.input("a", {2});
  g.set_output("y", g.log(a));
  EXPECT_THROW(forward(g, {{"a", Tensor::vector({1.0, 0.0})}}), Error);
}

TEST(Backward, IdentityAndConstant) {
  ParameterSet ps;
  ps.add("x", Tensor::vector({2.5}));
  ps.add("unused", Tensor::vector({1.0, 2.0}));
  Graph g(ps);
  g.set_output("y", g.sum(g.param("x")));
  g.set_output("c", g.sum(g.constant(Tensor::vector({7.0}))));
  forward(g);
  auto gy = backward(g, "y");
  EXPECT_EQ(gy.at("x")[0], 1.0);
  EXPECT_EQ(gy.at("unused")[0], 0.0);
  auto gc = backward(g, "c");
  EXPECT_EQ(gc.at("x")[0], 0.0);
}

TEST(Backward, NonScalarNeedsExplicitGrad) {
  ParameterSet ps;
  ps.add("w", Tensor({3}, 1.0));
  Graph g(ps);
  g.set_output("v", g.relu(g.param("w")));
  forward(g);
  EXPECT_THROW(backward(g, "v"), Error);
  Tensor seed({3}, 2.0);
  auto grads = backward(g, "v", &seed);
  EXPECT_EQ(grads.at("w")[1], 2.0);
}

TEST(GradCheck, Quadratic) {
  ParameterSet ps;
  ps.add("x", Tensor::vector({3.0}));
  Graph g(ps);
  auto x = g.param("x");
  g.set_output("loss", g.sum(g.mul(x, x)));
  forward(g);
  EXPECT_EQ(backward(g, "loss").at("x")[0], 6.0);
  auto r = finite_diff_check(g, {}, 1e-5);
  EXPECT_LE(r.max_relative_error, 1e-8);
}

TEST(GradCheck, DeadParameterIsZero) {
  ParameterSet ps;
  ps.add("x", Tensor::vector({3.0}));
  ps.add("dead", Tensor::vector({1.0, -1.0}));
  Graph g(ps);
  auto x = g.param("x");
  g.set_output("loss", g.sum(g.mul(x, x)));
  auto r = finite_diff_check(g, {}, 1e-5);
  EXPECT_LE(r.max_relative_error, 1e-8);
  EXPECT_EQ(r.entries_checked, 3u);
}

TEST(GradCheck, NonScalarOutputRejected) {
  ParameterSet ps;
  ps.add("x", Tensor({2}, 1.0));
  Graph g(ps);
  g.set_output("loss", g.relu(g.param("x")));
  EXPECT_THROW(finite_diff_check(g, {}, 1e-5), Error);
}

TEST(GradCheck, SumSoftmaxComposite) {
  ParameterSet ps;
  ps.add("W", random_tensor({4, 4}, 11));
  Graph g(ps);
  auto x = g.input("x", {1, 4});
  // Weighted sum keeps the gradient non-trivial (plain sum(softmax) is constant).
  auto s = g.softmax(g.matmul(x, g.param("W")));
  auto w = g.constant(Tensor({1, 4}, std::vector<double>{0.3, -1.2, 2.0, 0.7}));
  g.set_output("loss", g.sum(g.mul(s, w)));
  NamedTensors point{{"x", random_tensor({1, 4}, 12)}};
  auto r = finite_diff_check(g, point, 1e-5);
  EXPECT_LT(r.max_relative_error, 1e-6) << r.worst_parameter << "[" << r.worst_index << "]";
}

TEST(GradCheck, SumSoftmaxIsFlat) {
  ParameterSet ps;
  ps.add("W", random_tensor({4, 4}, 21));
  Graph g(ps);
  auto x = g.input("x", {1, 4});
  g.set_output("loss", g.sum(g.softmax(g.matmul(x, g.param("W")))));
  forward(g, {{"x", random_tensor({1, 4}, 22)}});
  auto grads = backward(g, "loss");
  for (double v : grads.at("W").values()) EXPECT_NEAR(v, 0.0, 1e-12);
}

// One scalar loss exercising every differentiable primitive.
TEST(GradCheck, PrimitiveCatalog) {
  ParameterSet ps;
  ps.add("emb", random_tensor({6, 4}, 1));
  ps.add("W", random_tensor({4, 4}, 2));
  ps.add("Wq", random_tensor({4, 4}, 3));
  ps.add("gain", random_tensor({8}, 4));
  ps.add("bias", random_tensor({8}, 5));
  ps.add("target", random_tensor({2, 8}, 6));
  ps.add("other", random_tensor({2, 3, 4}, 7));
  Graph g(ps);
  auto e = g.embedding(g.param("emb"), {0, 3, -1, 5, 3, 1});  // [6,4]
  auto e3 = g.reshape(e, {2, 3, 4});
  auto h = g.relu(g.add(g.matmul(e3, g.param("W")), g.param("other")));
  auto q = g.matmul(h, g.param("Wq"));
  auto att = scaled_dot_product_attention(g, q, h, h, {1, 1, 0, 1, 1, 1, 1, 0, 1, 1, 1, 1, 1, 1, 1, 0, 1, 1});
  auto mixed = g.sub(att.output, g.scale(h, 0.5));
  auto cat = g.concat({g.select(mixed, 1, 2), g.select(h, 1, 0)});  // [2,8]
  auto ln = g.layer_norm(cat, g.param("gain"), g.param("bias"));
  auto sq = g.squared_error(ln, g.param("target"));
  auto perm = g.permute(e3, {1, 0, 2});
  auto lsm = g.log_softmax(g.reshape(perm, {3, 8}));
  auto picked = g.pick(lsm, {1, 7, 4});
  auto logv = g.log(g.add(g.softmax(ln), g.constant(Tensor({8}, 1.0))));
  auto loss = g.add(g.add(g.mean(sq), g.sum(picked)), g.mean(logv));
  g.set_output("loss", loss);
  auto r = finite_diff_check(g, {}, 1e-5);
  EXPECT_LT(r.max_relative_error, 1e-4) << r.worst_parameter << "[" << r.worst_index << "] a=" << r.worst_analytic
                                        << " n=" << r.worst_numeric;
}

TEST(GradCheck, EmbeddingMatchesOneHotMatmul) {
  ParameterSet ps;
  ps.add("emb", random_tensor({5, 3}, 31));
  Graph g(ps);
  std::vector<std::int64_t> rows{4, 0, 4, 2};
  g.set_output("a", g.sum(g.mul(g.embedding(g.param("emb"), rows), g.constant(random_tensor({4, 3}, 32)))));
  Tensor onehot({4, 5}, 0.0);
  for (std::size_t r = 0; r < rows.size(); ++r) onehot[r * 5 + rows[r]] = 1.0;
  g.set_output("b", g.sum(g.mul(g.matmul(g.constant(onehot), g.param("emb")), g.constant(random_tensor({4, 3}, 32)))));
  forward(g);
  auto ga = backward(g, "a");
  auto gb = backward(g, "b");
  for (std::size_t i = 0; i < 15; ++i) EXPECT_NEAR(ga.at("emb")[i], gb.at("emb")[i], 1e-12);
}

TEST(Dropout, SeededAndIdentityInEval) {
  ParameterSet ps;
  ps.add("w", Tensor({200}, 1.0));
  Graph g(ps);
  g.set_output("d", g.dropout(g.param("w"), 0.5, 9));
  auto eval = forward(g, {}, {}).at("d");
  for (double v : eval.values()) EXPECT_EQ(v, 1.0);
  EvalOptions train{.train = true, .check_finite = true, .dropout_seed = 42};
  auto a = forward(g, {}, train).at("d");
  auto b = forward(g, {}, train).at("d");
  EXPECT_EQ(a, b);
  std::size_t zeros = std::count(a.values().begin(), a.values().end(), 0.0);
  EXPECT_GT(zeros, 60u);
  EXPECT_LT(zeros, 140u);
}

TEST(Determinism, ForwardBackwardBitIdentical) {
  auto run = [] {
    ParameterSet ps;
    ps.add("W", random_tensor({4, 4}, 5));
    Graph g(ps);
    auto x = g.input("x", {3, 4});
    g.set_output("loss", g.mean(g.log_softmax(g.matmul(x, g.param("W")))));
    forward(g, {{"x", random_tensor({3, 4}, 6)}});
    return backward(g, "loss");
  };
  EXPECT_EQ(run(), run());
}

TEST(Adam, ZeroGradientIsNoOp) {
  ParameterSet ps;
  ps.add("w", random_tensor({3, 2}, 8));
  const ParameterSet before = ps;
  auto state = AdamState::for_parameters(ps);
  adam_step(ps, ps.zeros_like(), state);
  EXPECT_EQ(ps, before);
  EXPECT_EQ(state.step, 1u);
}

TEST(Adam, FirstStepClosedForm) {
  for (double grad : {2.0, -0.5}) {
    ParameterSet ps;
    ps.add("w", Tensor::vector({1.0}));
    ParameterSet g;
    g.add("w", Tensor::vector({grad}));
    auto state = AdamState::for_parameters(ps);
    adam_step(ps, g, state);
    EXPECT_NEAR(ps.at("w")[0] - 1.0, grad > 0 ? -1e-3 : 1e-3, 1e-10);
    EXPECT_EQ(state.m.at("w").shape(), ps.at("w").shape());
  }
}

TEST(Adam, ShapeMismatchRaises) {
  ParameterSet ps;
  ps.add("w", Tensor({2}, 0.0));
  ParameterSet g;
  g.add("w", Tensor({3}, 0.0));
  auto state = AdamState::for_parameters(ps);
  EXPECT_THROW(adam_step(ps, g, state), Error);
}

TEST(Checkpoint, RoundTripBitExact) {
  ParameterSet ps;
  ps.add("a.weight", random_tensor({3, 5}, 1, 1e3));
  ps.add("b", Tensor::vector({std::nextafter(0.0, 1.0), -0.0, 1.0 / 3.0}));
  const auto path = std::filesystem::temp_directory_path() / "mobtcast_ckpt_test.tar";
  save_checkpoint(path, ps, {{"model.txt", "d_model 8\n"}});
  auto ck = load_checkpoint(path);
  ASSERT_EQ(ck.params.size(), 2u);
  for (std::size_t p = 0; p < 2; ++p) {
    EXPECT_EQ(ck.params.name(p), ps.name(p));
    EXPECT_EQ(ck.params.at(p).shape(), ps.at(p).shape());
    EXPECT_EQ(std::memcmp(ck.params.at(p).data(), ps.at(p).data(), 8 * ps.at(p).size()), 0);
  }
  EXPECT_EQ(ck.text.at("model.txt"), "d_model 8\n");
  std::filesystem::remove(path);
}

TEST(GradCheck, BlendRowsAndDetachedPaths) {
  ParameterSet ps;
  ps.add("a", random_tensor({3, 4}, 41));
  ps.add("b", random_tensor({3, 4}, 42));
  ps.add("scores", random_tensor({3, 5}, 43));
  Graph g(ps);
  auto blended = g.blend_rows(g.param("a"), g.param("b"), {1, 0, 1});
  auto table = g.constant(random_tensor({5, 4}, 44));
  auto looked = g.argmax_lookup(g.param("scores"), table);
  auto frozen = g.stop_gradient(g.param("a"));
  auto loss = g.add(g.sum(g.mul(blended, blended)), g.mean(g.mul(looked, frozen)));
  g.set_output("loss", loss);
  forward(g);
  auto grads = backward(g, "loss");
  for (double v : grads.at("scores").values()) EXPECT_EQ(v, 0.0);
  for (std::size_t c = 0; c < 4; ++c) {
    EXPECT_EQ(grads.at("b")[c], 0.0);           // row 0 comes from a
    EXPECT_EQ(grads.at("a")[4 + c], 0.0);       // row 1 comes from b
  }
}
