#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mobtcast/diff/parameters.hpp"
#include "mobtcast/diff/tensor.hpp"

namespace mobtcast::diff {

enum class Op : std::uint8_t {
  Input,
  Parameter,
  Constant,
  Add,
  Sub,
  Mul,
  Scale,
  MatMul,
  BatchMatMul,
  Concat,
  Embedding,
  Softmax,
  LogSoftmax,
  Log,
  Relu,
  LayerNorm,
  Dropout,
  Reshape,
  Permute,
  Select,
  Sum,
  Mean,
  SquaredError,
  Pick,
  StopGradient,
  ArgmaxLookup,
  BlendRows,
};

std::string_view op_name(Op op);

struct NodeRef {
  std::size_t index = 0;
};

struct EvalOptions {
  /// Enables dropout.
  bool train = false;
  /// Raise on NaN/Inf in any node output.
  bool check_finite = true;
  std::uint64_t dropout_seed = 0;
};

/// Define-then-run computation graph over a ParameterSet.
///
/// Builder methods validate shapes immediately and append one node each, so
/// the node list is topologically ordered by construction. Parameters are
/// read from the bound ParameterSet at forward time; mutating the set between
/// passes (optimizer steps, finite differences) is the supported way to
/// change them.
class Graph {
 public:
  Graph() = default;
  explicit Graph(ParameterSet& params) : params_(&params) {}

  NodeRef input(std::string name, Shape shape);
  /// Repeated calls with the same name return the same node.
  NodeRef param(std::string_view name);
  NodeRef constant(Tensor value, std::string label = {});

  /// `b` must have the same shape as `a` or a suffix of it (row broadcast).
  NodeRef add(NodeRef a, NodeRef b);
  NodeRef sub(NodeRef a, NodeRef b);
  NodeRef mul(NodeRef a, NodeRef b);
  NodeRef scale(NodeRef a, double factor);
  /// [..., k] x [k, n] -> [..., n]
  NodeRef matmul(NodeRef a, NodeRef w);
  /// [B, m, k] x [B, k, n] -> [B, m, n]; with transpose_b, b is [B, n, k].
  NodeRef batch_matmul(NodeRef a, NodeRef b, bool transpose_b = false);
  /// Negative axis counts from the end.
  NodeRef concat(const std::vector<NodeRef>& parts, int axis = -1);
  /// Row lookup into a [rows, d] table; index -1 yields a zero row.
  NodeRef embedding(NodeRef table, std::vector<std::int64_t> rows);
  /// Softmax over the last axis. A non-empty mask (same element count as the
  /// input, 1 = keep) forces masked entries to exactly zero.
  NodeRef softmax(NodeRef a, std::vector<std::uint8_t> mask = {});
  NodeRef log_softmax(NodeRef a);
  NodeRef log(NodeRef a);
  NodeRef relu(NodeRef a);
  /// Normalizes over the last axis, then applies gain and bias of width d.
  NodeRef layer_norm(NodeRef x, NodeRef gain, NodeRef bias, double eps = 1e-5);
  NodeRef dropout(NodeRef a, double rate, std::uint64_t stream);
  NodeRef reshape(NodeRef a, Shape shape);
  NodeRef permute(NodeRef a, std::vector<std::size_t> axes);
  /// Removes `axis` by taking one index along it.
  NodeRef select(NodeRef a, std::size_t axis, std::size_t index);
  NodeRef sum(NodeRef a);
  NodeRef mean(NodeRef a);
  /// Row-wise sum over the last axis of (a - b)^2 -> [rows].
  NodeRef squared_error(NodeRef a, NodeRef b);
  /// [R, C] -> [R], taking column cols[r] of row r.
  NodeRef pick(NodeRef a, std::vector<std::int64_t> cols);
  NodeRef stop_gradient(NodeRef a);
  /// [R, C] scores and a [C, k] table -> [R, k] table rows at each row's
  /// argmax (lowest index on ties). Never propagates gradient.
  NodeRef argmax_lookup(NodeRef scores, NodeRef table);
  /// Row r of the result is row r of `a` where take_a[r] is set, else of `b`.
  NodeRef blend_rows(NodeRef a, NodeRef b, std::vector<std::uint8_t> take_a);

  void set_output(std::string name, NodeRef node);
  NodeRef output(std::string_view name) const;

  const Shape& shape(NodeRef node) const { return nodes_.at(node.index).shape; }
  /// Value computed by the most recent forward pass.
  const Tensor& value(NodeRef node) const;
  std::size_t node_count() const noexcept { return nodes_.size(); }
  bool has_parameters() const noexcept { return params_ != nullptr; }
  ParameterSet& parameters();
  const ParameterSet& parameters() const;
  std::string describe(NodeRef node) const;

  friend NamedTensors forward(Graph& graph, const NamedTensors& bindings, const EvalOptions& options);
  friend ParameterSet backward(Graph& graph, std::string_view output, const Tensor* output_grad);

 private:
  struct Node {
    Op op = Op::Constant;
    std::vector<std::size_t> inputs;
    Shape shape;
    std::string label;
    std::vector<std::int64_t> ints;
    std::vector<std::uint8_t> mask;
    double real = 0.0;
    std::uint64_t stream = 0;
    bool flag = false;
    std::size_t param_index = 0;
    bool requires_grad = false;
    Tensor constant;
  };

  NodeRef push(Node node);
  const Node& node(NodeRef ref) const;
  [[noreturn]] void fail(const Node& node, const std::string& message) const;

  const Tensor& stored_value(std::size_t i) const;
  void eval_node(std::size_t i, const EvalOptions& options);
  void backprop_node(std::size_t i, std::vector<Tensor>& grads);

  ParameterSet* params_ = nullptr;
  std::vector<Node> nodes_;
  std::vector<Tensor> values_;
  std::vector<Tensor> caches_;
  std::vector<std::pair<std::string, std::size_t>> outputs_;
  std::vector<std::pair<std::string, std::size_t>> param_nodes_;
  bool evaluated_ = false;
};

/// Evaluates every node. Bindings must cover all Input nodes.
NamedTensors forward(Graph& graph, const NamedTensors& bindings = {}, const EvalOptions& options = {});

/// Reverse-mode sweep from a named output. Returns d(output)/d(parameter) for
/// every entry of the bound ParameterSet (zeros where unreached). A non-scalar
/// output requires an explicit output gradient of the same shape.
ParameterSet backward(Graph& graph, std::string_view output, const Tensor* output_grad = nullptr);

/// softmax(q k^T / sqrt(d)) v over [B, m, d] / [B, n, d] operands. The mask,
/// if given, has B*m*n entries. Returns the output and the attention weights.
struct AttentionNodes {
  NodeRef output;
  NodeRef weights;
};
AttentionNodes scaled_dot_product_attention(Graph& graph, NodeRef q, NodeRef k, NodeRef v,
                                            std::vector<std::uint8_t> mask = {});

}  // namespace mobtcast::diff
