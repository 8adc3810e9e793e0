#include "mobtcast/diff/graph.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <functional>
#include <cmath>
#include <limits>
#include <numeric>

#include "mobtcast/diff/random.hpp"

namespace mobtcast::diff {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

std::size_t last_dim(const Shape& s) { return s.empty() ? 1 : s.back(); }

bool is_suffix(const Shape& full, const Shape& tail) {
  if (tail.size() > full.size()) return false;
  return std::equal(tail.rbegin(), tail.rend(), full.rbegin());
}

Tensor& ensure(Tensor& t, const Shape& shape) {
  if (t.shape() != shape) t = Tensor(shape);
  return t;
}

}  // namespace

std::string_view op_name(Op op) {
  switch (op) {
    case Op::Input: return "input";
    case Op::Parameter: return "parameter";
    case Op::Constant: return "constant";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Scale: return "scale";
    case Op::MatMul: return "matmul";
    case Op::BatchMatMul: return "batch_matmul";
    case Op::Concat: return "concat";
    case Op::Embedding: return "embedding";
    case Op::Softmax: return "softmax";
    case Op::LogSoftmax: return "log_softmax";
    case Op::Log: return "log";
    case Op::Relu: return "relu";
    case Op::LayerNorm: return "layer_norm";
    case Op::Dropout: return "dropout";
    case Op::Reshape: return "reshape";
    case Op::Permute: return "permute";
    case Op::Select: return "select";
    case Op::Sum: return "sum";
    case Op::Mean: return "mean";
    case Op::SquaredError: return "squared_error";
    case Op::Pick: return "pick";
    case Op::StopGradient: return "stop_gradient";
    case Op::ArgmaxLookup: return "argmax_lookup";
    case Op::BlendRows: return "blend_rows";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Construction

NodeRef Graph::push(Node n) {
  if (n.op != Op::Parameter && n.op != Op::Input && n.op != Op::Constant) {
    for (auto in : n.inputs) {
      if (in >= nodes_.size()) throw Error("node input out of range");
    }
  }
  if (n.op == Op::Parameter) {
    n.requires_grad = true;
  } else if (n.op == Op::StopGradient || n.op == Op::ArgmaxLookup) {
    n.requires_grad = false;
  } else {
    n.requires_grad = std::any_of(n.inputs.begin(), n.inputs.end(),
                                  [&](std::size_t in) { return nodes_[in].requires_grad; });
  }
  nodes_.push_back(std::move(n));
  values_.emplace_back();
  caches_.emplace_back();
  evaluated_ = false;
  return NodeRef{nodes_.size() - 1};
}

const Graph::Node& Graph::node(NodeRef ref) const {
  if (ref.index >= nodes_.size()) throw Error("invalid node reference");
  return nodes_[ref.index];
}

std::string Graph::describe(NodeRef ref) const {
  const auto& n = node(ref);
  std::string s = "node #" + std::to_string(ref.index) + " (" + std::string(op_name(n.op));
  if (!n.label.empty()) s += " '" + n.label + "'";
  return s + ")";
}

void Graph::fail(const Node& n, const std::string& message) const {
  const Node* first = nodes_.data();
  const Node* last = first + nodes_.size();
  const bool stored = !std::less<const Node*>{}(&n, first) && std::less<const Node*>{}(&n, last);
  std::string where = stored ? describe(NodeRef{static_cast<std::size_t>(&n - first)})
                             : "node #" + std::to_string(nodes_.size()) + " (" + std::string(op_name(n.op)) + ")";
  throw Error(where + ": " + message);
}

const Tensor& Graph::stored_value(std::size_t i) const {
  const Node& n = nodes_[i];
  return n.op == Op::Parameter ? params_->at(n.param_index) : values_[i];
}

ParameterSet& Graph::parameters() {
  if (!params_) throw Error("graph has no parameter set");
  return *params_;
}

const ParameterSet& Graph::parameters() const {
  if (!params_) throw Error("graph has no parameter set");
  return *params_;
}

NodeRef Graph::input(std::string name, Shape shape) {
  Node n;
  n.op = Op::Input;
  n.label = std::move(name);
  n.shape = std::move(shape);
  return push(std::move(n));
}

NodeRef Graph::param(std::string_view name) {
  for (const auto& [pname, idx] : param_nodes_) {
    if (pname == name) return NodeRef{idx};
  }
  Node n;
  n.op = Op::Parameter;
  n.label = std::string(name);
  n.param_index = parameters().index_of(name);
  n.shape = parameters().at(n.param_index).shape();
  auto ref = push(std::move(n));
  param_nodes_.emplace_back(std::string(name), ref.index);
  return ref;
}

NodeRef Graph::constant(Tensor value, std::string label) {
  Node n;
  n.op = Op::Constant;
  n.shape = value.shape();
  n.constant = std::move(value);
  n.label = std::move(label);
  return push(std::move(n));
}

NodeRef Graph::add(NodeRef a, NodeRef b) {
  Node n;
  n.op = Op::Add;
  n.inputs = {a.index, b.index};
  n.shape = shape(a);
  if (!is_suffix(shape(a), shape(b))) {
    fail(n, "cannot broadcast " + shape_string(shape(b)) + " onto " + shape_string(shape(a)));
  }
  return push(std::move(n));
}

NodeRef Graph::sub(NodeRef a, NodeRef b) {
  Node n;
  n.op = Op::Sub;
  n.inputs = {a.index, b.index};
  n.shape = shape(a);
  if (shape(a) != shape(b)) {
    fail(n, "shape mismatch " + shape_string(shape(a)) + " vs " + shape_string(shape(b)));
  }
  return push(std::move(n));
}

NodeRef Graph::mul(NodeRef a, NodeRef b) {
  Node n;
  n.op = Op::Mul;
  n.inputs = {a.index, b.index};
  n.shape = shape(a);
  if (!is_suffix(shape(a), shape(b))) {
    fail(n, "cannot broadcast " + shape_string(shape(b)) + " onto " + shape_string(shape(a)));
  }
  return push(std::move(n));
}

NodeRef Graph::scale(NodeRef a, double factor) {
  Node n;
  n.op = Op::Scale;
  n.inputs = {a.index};
  n.shape = shape(a);
  n.real = factor;
  return push(std::move(n));
}

NodeRef Graph::matmul(NodeRef a, NodeRef w) {
  Node n;
  n.op = Op::MatMul;
  n.inputs = {a.index, w.index};
  const auto& sa = shape(a);
  const auto& sw = shape(w);
  if (sw.size() != 2 || sa.empty() || sa.back() != sw[0]) {
    fail(n, "cannot multiply " + shape_string(sa) + " by " + shape_string(sw));
  }
  n.shape = sa;
  n.shape.back() = sw[1];
  return push(std::move(n));
}

NodeRef Graph::batch_matmul(NodeRef a, NodeRef b, bool transpose_b) {
  Node n;
  n.op = Op::BatchMatMul;
  n.inputs = {a.index, b.index};
  n.flag = transpose_b;
  const auto& sa = shape(a);
  const auto& sb = shape(b);
  if (sa.size() != 3 || sb.size() != 3 || sa[0] != sb[0]) {
    fail(n, "batch_matmul needs matching rank-3 operands, got " + shape_string(sa) + " and " +
                shape_string(sb));
  }
  std::size_t inner = transpose_b ? sb[2] : sb[1];
  std::size_t cols = transpose_b ? sb[1] : sb[2];
  if (inner != sa[2]) {
    fail(n, "inner dimension mismatch " + shape_string(sa) + " vs " + shape_string(sb));
  }
  n.shape = {sa[0], sa[1], cols};
  return push(std::move(n));
}

NodeRef Graph::concat(const std::vector<NodeRef>& parts, int axis) {
  Node n;
  n.op = Op::Concat;
  if (parts.empty()) fail(n, "concat of nothing");
  const auto& first = shape(parts.front());
  const int rank = static_cast<int>(first.size());
  const int ax = axis < 0 ? rank + axis : axis;
  if (ax < 0 || ax >= rank) fail(n, "concat axis out of range");
  n.shape = first;
  n.shape[ax] = 0;
  for (auto p : parts) {
    const auto& s = shape(p);
    if (static_cast<int>(s.size()) != rank) fail(n, "concat rank mismatch");
    for (int d = 0; d < rank; ++d) {
      if (d != ax && s[d] != first[d]) {
        fail(n, "concat shape mismatch " + shape_string(first) + " vs " + shape_string(s));
      }
    }
    n.shape[ax] += s[ax];
    n.inputs.push_back(p.index);
  }
  n.ints = {ax};
  return push(std::move(n));
}

NodeRef Graph::embedding(NodeRef table, std::vector<std::int64_t> rows) {
  Node n;
  n.op = Op::Embedding;
  n.inputs = {table.index};
  const auto& st = shape(table);
  if (st.size() != 2) fail(n, "embedding table must be rank 2, got " + shape_string(st));
  for (auto r : rows) {
    if (r < -1 || r >= static_cast<std::int64_t>(st[0])) {
      fail(n, "row id " + std::to_string(r) + " outside table of " + std::to_string(st[0]) + " rows");
    }
  }
  if (rows.empty()) fail(n, "embedding lookup with no rows");
  n.shape = {rows.size(), st[1]};
  n.ints = std::move(rows);
  return push(std::move(n));
}

NodeRef Graph::softmax(NodeRef a, std::vector<std::uint8_t> mask) {
  Node n;
  n.op = Op::Softmax;
  n.inputs = {a.index};
  n.shape = shape(a);
  if (!mask.empty() && mask.size() != shape_size(n.shape)) {
    fail(n, "mask has " + std::to_string(mask.size()) + " entries for input " + shape_string(n.shape));
  }
  n.mask = std::move(mask);
  return push(std::move(n));
}

NodeRef Graph::log_softmax(NodeRef a) {
  Node n;
  n.op = Op::LogSoftmax;
  n.inputs = {a.index};
  n.shape = shape(a);
  return push(std::move(n));
}

NodeRef Graph::log(NodeRef a) {
  Node n;
  n.op = Op::Log;
  n.inputs = {a.index};
  n.shape = shape(a);
  return push(std::move(n));
}

NodeRef Graph::relu(NodeRef a) {
  Node n;
  n.op = Op::Relu;
  n.inputs = {a.index};
  n.shape = shape(a);
  return push(std::move(n));
}

NodeRef Graph::layer_norm(NodeRef x, NodeRef gain, NodeRef bias, double eps) {
  Node n;
  n.op = Op::LayerNorm;
  n.inputs = {x.index, gain.index, bias.index};
  n.shape = shape(x);
  n.real = eps;
  Shape width{last_dim(n.shape)};
  if (shape(gain) != width || shape(bias) != width) {
    fail(n, "layer_norm gain/bias must be " + shape_string(width));
  }
  return push(std::move(n));
}

NodeRef Graph::dropout(NodeRef a, double rate, std::uint64_t stream) {
  Node n;
  n.op = Op::Dropout;
  n.inputs = {a.index};
  n.shape = shape(a);
  if (rate < 0.0 || rate >= 1.0) fail(n, "dropout rate must be in [0, 1)");
  n.real = rate;
  n.stream = stream;
  return push(std::move(n));
}

NodeRef Graph::reshape(NodeRef a, Shape s) {
  Node n;
  n.op = Op::Reshape;
  n.inputs = {a.index};
  if (shape_size(s) != shape_size(shape(a))) {
    fail(n, "cannot reshape " + shape_string(shape(a)) + " to " + shape_string(s));
  }
  n.shape = std::move(s);
  return push(std::move(n));
}

NodeRef Graph::permute(NodeRef a, std::vector<std::size_t> axes) {
  Node n;
  n.op = Op::Permute;
  n.inputs = {a.index};
  const auto& sa = shape(a);
  if (axes.size() != sa.size() || sa.size() > 4) fail(n, "permute supports rank <= 4 with a full axis list");
  std::vector<std::size_t> sorted = axes;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i] != i) fail(n, "permute axes are not a permutation");
  }
  for (auto ax : axes) {
    n.shape.push_back(sa[ax]);
    n.ints.push_back(static_cast<std::int64_t>(ax));
  }
  return push(std::move(n));
}

NodeRef Graph::select(NodeRef a, std::size_t axis, std::size_t index) {
  Node n;
  n.op = Op::Select;
  n.inputs = {a.index};
  const auto& sa = shape(a);
  if (axis >= sa.size() || index >= sa[axis] || sa.size() < 2) {
    fail(n, "select(" + std::to_string(axis) + ", " + std::to_string(index) + ") out of range for " +
                shape_string(sa));
  }
  n.shape = sa;
  n.shape.erase(n.shape.begin() + static_cast<std::ptrdiff_t>(axis));
  n.ints = {static_cast<std::int64_t>(axis), static_cast<std::int64_t>(index)};
  return push(std::move(n));
}

NodeRef Graph::sum(NodeRef a) {
  Node n;
  n.op = Op::Sum;
  n.inputs = {a.index};
  n.shape = {1};
  return push(std::move(n));
}

NodeRef Graph::mean(NodeRef a) {
  Node n;
  n.op = Op::Mean;
  n.inputs = {a.index};
  n.shape = {1};
  return push(std::move(n));
}

NodeRef Graph::squared_error(NodeRef a, NodeRef b) {
  Node n;
  n.op = Op::SquaredError;
  n.inputs = {a.index, b.index};
  if (shape(a) != shape(b)) {
    fail(n, "shape mismatch " + shape_string(shape(a)) + " vs " + shape_string(shape(b)));
  }
  n.shape = {shape_size(shape(a)) / last_dim(shape(a))};
  return push(std::move(n));
}

NodeRef Graph::pick(NodeRef a, std::vector<std::int64_t> cols) {
  Node n;
  n.op = Op::Pick;
  n.inputs = {a.index};
  const auto& sa = shape(a);
  if (sa.size() != 2 || cols.size() != sa[0]) fail(n, "pick needs [R, C] input and R column ids");
  for (auto c : cols) {
    if (c < 0 || c >= static_cast<std::int64_t>(sa[1])) fail(n, "pick column out of range");
  }
  n.shape = {sa[0]};
  n.ints = std::move(cols);
  return push(std::move(n));
}

NodeRef Graph::stop_gradient(NodeRef a) {
  Node n;
  n.op = Op::StopGradient;
  n.inputs = {a.index};
  n.shape = shape(a);
  return push(std::move(n));
}

NodeRef Graph::argmax_lookup(NodeRef scores, NodeRef table) {
  Node n;
  n.op = Op::ArgmaxLookup;
  n.inputs = {scores.index, table.index};
  const auto& ss = shape(scores);
  const auto& st = shape(table);
  if (ss.size() != 2 || st.size() != 2 || ss[1] != st[0]) {
    fail(n, "argmax_lookup needs [R, C] scores and a [C, k] table, got " + shape_string(ss) + " and " +
                shape_string(st));
  }
  n.shape = {ss[0], st[1]};
  return push(std::move(n));
}

NodeRef Graph::blend_rows(NodeRef a, NodeRef b, std::vector<std::uint8_t> take_a) {
  Node n;
  n.op = Op::BlendRows;
  n.inputs = {a.index, b.index};
  n.shape = shape(a);
  if (shape(a) != shape(b) || n.shape.empty() || take_a.size() != n.shape[0]) {
    fail(n, "blend_rows needs equal shapes and one flag per row");
  }
  n.mask = std::move(take_a);
  return push(std::move(n));
}

void Graph::set_output(std::string name, NodeRef ref) {
  node(ref);
  for (auto& [oname, idx] : outputs_) {
    if (oname == name) {
      idx = ref.index;
      return;
    }
  }
  outputs_.emplace_back(std::move(name), ref.index);
}

NodeRef Graph::output(std::string_view name) const {
  for (const auto& [oname, idx] : outputs_) {
    if (oname == name) return NodeRef{idx};
  }
  throw Error("graph has no output '" + std::string(name) + "'");
}

const Tensor& Graph::value(NodeRef ref) const {
  node(ref);
  if (!evaluated_) throw Error("graph has not been evaluated");
  return stored_value(ref.index);
}

// ---------------------------------------------------------------------------
// Forward

void Graph::eval_node(std::size_t i, const EvalOptions& options) {
  Node& n = nodes_[i];
  Tensor& out = values_[i];
  auto in = [&](std::size_t k) -> const Tensor& { return stored_value(n.inputs[k]); };

  switch (n.op) {
    case Op::Input:
    case Op::Parameter:
      break;  // handled by forward()
    case Op::Constant:
      out = n.constant;
      break;
    case Op::Add:
    case Op::Mul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      ensure(out, n.shape);
      const std::size_t inner = b.size();
      const double* pa = a.data();
      const double* pb = b.data();
      double* po = out.data();
      for (std::size_t base = 0; base < a.size(); base += inner) {
        if (n.op == Op::Add) {
          for (std::size_t j = 0; j < inner; ++j) po[base + j] = pa[base + j] + pb[j];
        } else {
          for (std::size_t j = 0; j < inner; ++j) po[base + j] = pa[base + j] * pb[j];
        }
      }
      break;
    }
    case Op::Sub: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      ensure(out, n.shape);
      for (std::size_t j = 0; j < a.size(); ++j) out[j] = a[j] - b[j];
      break;
    }
    case Op::Scale: {
      const Tensor& a = in(0);
      ensure(out, n.shape);
      for (std::size_t j = 0; j < a.size(); ++j) out[j] = a[j] * n.real;
      break;
    }
    case Op::MatMul: {
      const Tensor& a = in(0);
      const Tensor& w = in(1);
      ensure(out, n.shape);
      const auto k = w.dim(0);
      const auto cols = w.dim(1);
      const auto rows = a.size() / k;
      MapMat(out.data(), rows, cols).noalias() = ConstMapMat(a.data(), rows, k) * ConstMapMat(w.data(), k, cols);
      break;
    }
    case Op::BatchMatMul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      ensure(out, n.shape);
      const auto batch = a.dim(0), m = a.dim(1), k = a.dim(2), cols = n.shape[2];
      for (std::size_t s = 0; s < batch; ++s) {
        ConstMapMat A(a.data() + s * m * k, m, k);
        MapMat C(out.data() + s * m * cols, m, cols);
        if (n.flag) {
          C.noalias() = A * ConstMapMat(b.data() + s * cols * k, cols, k).transpose();
        } else {
          C.noalias() = A * ConstMapMat(b.data() + s * k * cols, k, cols);
        }
      }
      break;
    }
    case Op::Concat: {
      ensure(out, n.shape);
      const auto ax = static_cast<std::size_t>(n.ints[0]);
      std::size_t outer = 1;
      for (std::size_t d = 0; d < ax; ++d) outer *= n.shape[d];
      const std::size_t out_inner = out.size() / outer;
      std::size_t offset = 0;
      for (std::size_t p = 0; p < n.inputs.size(); ++p) {
        const Tensor& part = in(p);
        const std::size_t inner = part.size() / outer;
        for (std::size_t o = 0; o < outer; ++o) {
          std::copy_n(part.data() + o * inner, inner, out.data() + o * out_inner + offset);
        }
        offset += inner;
      }
      break;
    }
    case Op::Embedding: {
      const Tensor& table = in(0);
      ensure(out, n.shape);
      const std::size_t d = n.shape[1];
      for (std::size_t r = 0; r < n.ints.size(); ++r) {
        const auto row = n.ints[r];
        if (row < 0) {
          std::fill_n(out.data() + r * d, d, 0.0);
        } else {
          std::copy_n(table.data() + static_cast<std::size_t>(row) * d, d, out.data() + r * d);
        }
      }
      break;
    }
    case Op::Softmax: {
      const Tensor& a = in(0);
      ensure(out, n.shape);
      const std::size_t d = last_dim(n.shape);
      const bool masked = !n.mask.empty();
      for (std::size_t base = 0; base < a.size(); base += d) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < d; ++j) {
          if (!masked || n.mask[base + j]) mx = std::max(mx, a[base + j]);
        }
        double total = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          double e = (!masked || n.mask[base + j]) ? std::exp(a[base + j] - mx) : 0.0;
          out[base + j] = e;
          total += e;
        }
        const double inv = total > 0.0 ? 1.0 / total : 0.0;
        for (std::size_t j = 0; j < d; ++j) out[base + j] *= inv;
      }
      break;
    }
    case Op::LogSoftmax: {
      const Tensor& a = in(0);
      ensure(out, n.shape);
      const std::size_t d = last_dim(n.shape);
      for (std::size_t base = 0; base < a.size(); base += d) {
        double mx = *std::max_element(a.data() + base, a.data() + base + d);
        double total = 0.0;
        for (std::size_t j = 0; j < d; ++j) total += std::exp(a[base + j] - mx);
        const double lse = mx + std::log(total);
        for (std::size_t j = 0; j < d; ++j) out[base + j] = a[base + j] - lse;
      }
      break;
    }
    case Op::Log: {
      const Tensor& a = in(0);
      ensure(out, n.shape);
      for (std::size_t j = 0; j < a.size(); ++j) out[j] = std::log(a[j]);
      break;
    }
    case Op::Relu: {
      const Tensor& a = in(0);
      ensure(out, n.shape);
      for (std::size_t j = 0; j < a.size(); ++j) out[j] = a[j] > 0.0 ? a[j] : 0.0;
      break;
    }
    case Op::LayerNorm: {
      const Tensor& x = in(0);
      const Tensor& gain = in(1);
      const Tensor& bias = in(2);
      ensure(out, n.shape);
      const std::size_t d = last_dim(n.shape);
      const std::size_t rows = x.size() / d;
      Tensor& stats = ensure(caches_[i], Shape{rows, 2});
      for (std::size_t r = 0; r < rows; ++r) {
        const double* px = x.data() + r * d;
        double mu = 0.0;
        for (std::size_t j = 0; j < d; ++j) mu += px[j];
        mu /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) var += (px[j] - mu) * (px[j] - mu);
        var /= static_cast<double>(d);
        const double rstd = 1.0 / std::sqrt(var + n.real);
        stats[2 * r] = mu;
        stats[2 * r + 1] = rstd;
        double* po = out.data() + r * d;
        for (std::size_t j = 0; j < d; ++j) po[j] = (px[j] - mu) * rstd * gain[j] + bias[j];
      }
      break;
    }
    case Op::Dropout: {
      const Tensor& a = in(0);
      ensure(out, n.shape);
      if (!options.train || n.real == 0.0) {
        std::copy_n(a.data(), a.size(), out.data());
        caches_[i] = Tensor();
        break;
      }
      Tensor& keep = ensure(caches_[i], n.shape);
      const double scale = 1.0 / (1.0 - n.real);
      const std::uint64_t seed = derive_seed(options.dropout_seed, n.stream);
      for (std::size_t j = 0; j < a.size(); ++j) {
        const bool kept = unit_interval(mix64(seed + j)) >= n.real;
        keep[j] = kept ? scale : 0.0;
        out[j] = a[j] * keep[j];
      }
      break;
    }
    case Op::Reshape:
    case Op::StopGradient: {
      const Tensor& a = in(0);
      ensure(out, n.shape);
      std::copy_n(a.data(), a.size(), out.data());
      break;
    }
    case Op::Permute: {
      const Tensor& a = in(0);
      ensure(out, n.shape);
      std::array<std::size_t, 4> in_dims{1, 1, 1, 1};
      std::array<std::size_t, 4> perm{0, 1, 2, 3};
      const std::size_t rank = n.shape.size();
      const std::size_t pad = 4 - rank;
      for (std::size_t d = 0; d < rank; ++d) {
        in_dims[pad + d] = a.dim(d);
        perm[pad + d] = pad + static_cast<std::size_t>(n.ints[d]);
      }
      std::array<std::size_t, 4> in_stride{};
      in_stride[3] = 1;
      for (int d = 2; d >= 0; --d) in_stride[d] = in_stride[d + 1] * in_dims[d + 1];
      std::array<std::size_t, 4> out_dims{}, stride{};
      for (std::size_t d = 0; d < 4; ++d) {
        out_dims[d] = in_dims[perm[d]];
        stride[d] = in_stride[perm[d]];
      }
      std::size_t o = 0;
      for (std::size_t i0 = 0; i0 < out_dims[0]; ++i0)
        for (std::size_t i1 = 0; i1 < out_dims[1]; ++i1)
          for (std::size_t i2 = 0; i2 < out_dims[2]; ++i2) {
            const std::size_t base = i0 * stride[0] + i1 * stride[1] + i2 * stride[2];
            for (std::size_t i3 = 0; i3 < out_dims[3]; ++i3) out[o++] = a[base + i3 * stride[3]];
          }
      break;
    }
    case Op::Select: {
      const Tensor& a = in(0);
      ensure(out, n.shape);
      const auto ax = static_cast<std::size_t>(n.ints[0]);
      const auto idx = static_cast<std::size_t>(n.ints[1]);
      std::size_t outer = 1;
      for (std::size_t d = 0; d < ax; ++d) outer *= a.dim(d);
      const std::size_t len = a.dim(ax);
      const std::size_t inner = a.size() / (outer * len);
      for (std::size_t o = 0; o < outer; ++o) {
        std::copy_n(a.data() + (o * len + idx) * inner, inner, out.data() + o * inner);
      }
      break;
    }
    case Op::Sum:
    case Op::Mean: {
      const Tensor& a = in(0);
      ensure(out, n.shape);
      double total = std::accumulate(a.data(), a.data() + a.size(), 0.0);
      out[0] = n.op == Op::Sum ? total : total / static_cast<double>(a.size());
      break;
    }
    case Op::SquaredError: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      ensure(out, n.shape);
      const std::size_t d = last_dim(a.shape());
      for (std::size_t r = 0; r < n.shape[0]; ++r) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          const double diff = a[r * d + j] - b[r * d + j];
          s += diff * diff;
        }
        out[r] = s;
      }
      break;
    }
    case Op::Pick: {
      const Tensor& a = in(0);
      ensure(out, n.shape);
      const std::size_t cols = a.dim(1);
      for (std::size_t r = 0; r < n.ints.size(); ++r) {
        out[r] = a[r * cols + static_cast<std::size_t>(n.ints[r])];
      }
      break;
    }
    case Op::ArgmaxLookup: {
      const Tensor& scores = in(0);
      const Tensor& table = in(1);
      ensure(out, n.shape);
      const std::size_t cols = scores.dim(1);
      const std::size_t k = table.dim(1);
      for (std::size_t r = 0; r < n.shape[0]; ++r) {
        const double* row = scores.data() + r * cols;
        const std::size_t best = static_cast<std::size_t>(std::max_element(row, row + cols) - row);
        std::copy_n(table.data() + best * k, k, out.data() + r * k);
      }
      break;
    }
    case Op::BlendRows: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      ensure(out, n.shape);
      const std::size_t width = a.size() / n.shape[0];
      for (std::size_t r = 0; r < n.shape[0]; ++r) {
        const Tensor& src = n.mask[r] ? a : b;
        std::copy_n(src.data() + r * width, width, out.data() + r * width);
      }
      break;
    }
  }
}

NamedTensors forward(Graph& graph, const NamedTensors& bindings, const EvalOptions& options) {
  for (std::size_t i = 0; i < graph.nodes_.size(); ++i) {
    auto& n = graph.nodes_[i];
    if (n.op == Op::Input) {
      auto it = bindings.find(n.label);
      if (it == bindings.end()) graph.fail(n, "no binding supplied for input '" + n.label + "'");
      if (it->second.shape() != n.shape) {
        graph.fail(n, "binding shape " + shape_string(it->second.shape()) + " does not match declared " +
                          shape_string(n.shape));
      }
      graph.values_[i] = it->second;
    } else if (n.op == Op::Parameter) {
      // read in place through stored_value()
    } else {
      graph.eval_node(i, options);
    }
    if (options.check_finite && !graph.stored_value(i).all_finite()) {
      graph.fail(n, "non-finite value in output");
    }
  }
  graph.evaluated_ = true;
  NamedTensors result;
  for (const auto& [name, idx] : graph.outputs_) result.emplace(name, graph.stored_value(idx));
  return result;
}

// ---------------------------------------------------------------------------
// Backward

void Graph::backprop_node(std::size_t i, std::vector<Tensor>& grads) {
  const Node& n = nodes_[i];
  const Tensor& g = grads[i];
  const Tensor& out = values_[i];
  auto needs = [&](std::size_t k) { return nodes_[n.inputs[k]].requires_grad; };
  auto in = [&](std::size_t k) -> const Tensor& { return stored_value(n.inputs[k]); };
  auto grad_in = [&](std::size_t k) -> Tensor& {
    Tensor& t = grads[n.inputs[k]];
    if (t.empty()) t = Tensor(nodes_[n.inputs[k]].shape, 0.0);
    return t;
  };

  switch (n.op) {
    case Op::Input:
    case Op::Parameter:
    case Op::Constant:
    case Op::StopGradient:
    case Op::ArgmaxLookup:
      break;
    case Op::Add:
    case Op::Mul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      const std::size_t inner = b.size();
      if (needs(0)) {
        Tensor& ga = grad_in(0);
        for (std::size_t base = 0; base < g.size(); base += inner)
          for (std::size_t j = 0; j < inner; ++j)
            ga[base + j] += n.op == Op::Add ? g[base + j] : g[base + j] * b[j];
      }
      if (needs(1)) {
        Tensor& gb = grad_in(1);
        for (std::size_t base = 0; base < g.size(); base += inner)
          for (std::size_t j = 0; j < inner; ++j)
            gb[j] += n.op == Op::Add ? g[base + j] : g[base + j] * a[base + j];
      }
      break;
    }
    case Op::Sub:
      if (needs(0)) {
        Tensor& ga = grad_in(0);
        for (std::size_t j = 0; j < g.size(); ++j) ga[j] += g[j];
      }
      if (needs(1)) {
        Tensor& gb = grad_in(1);
        for (std::size_t j = 0; j < g.size(); ++j) gb[j] -= g[j];
      }
      break;
    case Op::Scale:
      if (needs(0)) {
        Tensor& ga = grad_in(0);
        for (std::size_t j = 0; j < g.size(); ++j) ga[j] += g[j] * n.real;
      }
      break;
    case Op::MatMul: {
      const Tensor& a = in(0);
      const Tensor& w = in(1);
      const auto k = w.dim(0);
      const auto cols = w.dim(1);
      const auto rows = a.size() / k;
      ConstMapMat G(g.data(), rows, cols);
      if (needs(0)) MapMat(grad_in(0).data(), rows, k).noalias() += G * ConstMapMat(w.data(), k, cols).transpose();
      if (needs(1)) MapMat(grad_in(1).data(), k, cols).noalias() += ConstMapMat(a.data(), rows, k).transpose() * G;
      break;
    }
    case Op::BatchMatMul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      const auto batch = a.dim(0), m = a.dim(1), k = a.dim(2), cols = n.shape[2];
      Tensor* ga = needs(0) ? &grad_in(0) : nullptr;
      Tensor* gb = needs(1) ? &grad_in(1) : nullptr;
      for (std::size_t s = 0; s < batch; ++s) {
        ConstMapMat G(g.data() + s * m * cols, m, cols);
        ConstMapMat A(a.data() + s * m * k, m, k);
        if (n.flag) {
          ConstMapMat B(b.data() + s * cols * k, cols, k);
          if (ga) MapMat(ga->data() + s * m * k, m, k).noalias() += G * B;
          if (gb) MapMat(gb->data() + s * cols * k, cols, k).noalias() += G.transpose() * A;
        } else {
          ConstMapMat B(b.data() + s * k * cols, k, cols);
          if (ga) MapMat(ga->data() + s * m * k, m, k).noalias() += G * B.transpose();
          if (gb) MapMat(gb->data() + s * k * cols, k, cols).noalias() += A.transpose() * G;
        }
      }
      break;
    }
    case Op::Concat: {
      const auto ax = static_cast<std::size_t>(n.ints[0]);
      std::size_t outer = 1;
      for (std::size_t d = 0; d < ax; ++d) outer *= n.shape[d];
      const std::size_t out_inner = g.size() / outer;
      std::size_t offset = 0;
      for (std::size_t p = 0; p < n.inputs.size(); ++p) {
        const std::size_t inner = shape_size(nodes_[n.inputs[p]].shape) / outer;
        if (needs(p)) {
          Tensor& gp = grad_in(p);
          for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t j = 0; j < inner; ++j) gp[o * inner + j] += g[o * out_inner + offset + j];
        }
        offset += inner;
      }
      break;
    }
    case Op::Embedding: {
      if (!needs(0)) break;
      Tensor& gt = grad_in(0);
      const std::size_t d = n.shape[1];
      for (std::size_t r = 0; r < n.ints.size(); ++r) {
        const auto row = n.ints[r];
        if (row < 0) continue;
        double* dst = gt.data() + static_cast<std::size_t>(row) * d;
        for (std::size_t j = 0; j < d; ++j) dst[j] += g[r * d + j];
      }
      break;
    }
    case Op::Softmax: {
      if (!needs(0)) break;
      Tensor& ga = grad_in(0);
      const std::size_t d = last_dim(n.shape);
      for (std::size_t base = 0; base < g.size(); base += d) {
        double dot = 0.0;
        for (std::size_t j = 0; j < d; ++j) dot += g[base + j] * out[base + j];
        for (std::size_t j = 0; j < d; ++j) ga[base + j] += out[base + j] * (g[base + j] - dot);
      }
      break;
    }
    case Op::LogSoftmax: {
      if (!needs(0)) break;
      Tensor& ga = grad_in(0);
      const std::size_t d = last_dim(n.shape);
      for (std::size_t base = 0; base < g.size(); base += d) {
        double total = 0.0;
        for (std::size_t j = 0; j < d; ++j) total += g[base + j];
        for (std::size_t j = 0; j < d; ++j) ga[base + j] += g[base + j] - std::exp(out[base + j]) * total;
      }
      break;
    }
    case Op::Log: {
      if (!needs(0)) break;
      Tensor& ga = grad_in(0);
      const Tensor& a = in(0);
      for (std::size_t j = 0; j < g.size(); ++j) ga[j] += g[j] / a[j];
      break;
    }
    case Op::Relu: {
      if (!needs(0)) break;
      Tensor& ga = grad_in(0);
      const Tensor& a = in(0);
      for (std::size_t j = 0; j < g.size(); ++j) {
        if (a[j] > 0.0) ga[j] += g[j];
      }
      break;
    }
    case Op::LayerNorm: {
      const Tensor& x = in(0);
      const Tensor& gain = in(1);
      const Tensor& stats = caches_[i];
      const std::size_t d = last_dim(n.shape);
      const std::size_t rows = x.size() / d;
      Tensor* gx = needs(0) ? &grad_in(0) : nullptr;
      Tensor* gg = needs(1) ? &grad_in(1) : nullptr;
      Tensor* gbias = needs(2) ? &grad_in(2) : nullptr;
      std::vector<double> xhat(d), dxhat(d);
      for (std::size_t r = 0; r < rows; ++r) {
        const double mu = stats[2 * r];
        const double rstd = stats[2 * r + 1];
        const double* px = x.data() + r * d;
        const double* pg = g.data() + r * d;
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          xhat[j] = (px[j] - mu) * rstd;
          dxhat[j] = pg[j] * gain[j];
          sum_dxhat += dxhat[j];
          sum_dxhat_xhat += dxhat[j] * xhat[j];
          if (gg) (*gg)[j] += pg[j] * xhat[j];
          if (gbias) (*gbias)[j] += pg[j];
        }
        if (gx) {
          const double inv_d = 1.0 / static_cast<double>(d);
          double* dst = gx->data() + r * d;
          for (std::size_t j = 0; j < d; ++j) {
            dst[j] += rstd * (dxhat[j] - inv_d * sum_dxhat - xhat[j] * inv_d * sum_dxhat_xhat);
          }
        }
      }
      break;
    }
    case Op::Dropout: {
      if (!needs(0)) break;
      Tensor& ga = grad_in(0);
      const Tensor& keep = caches_[i];
      if (keep.empty()) {
        for (std::size_t j = 0; j < g.size(); ++j) ga[j] += g[j];
      } else {
        for (std::size_t j = 0; j < g.size(); ++j) ga[j] += g[j] * keep[j];
      }
      break;
    }
    case Op::Reshape: {
      if (!needs(0)) break;
      Tensor& ga = grad_in(0);
      for (std::size_t j = 0; j < g.size(); ++j) ga[j] += g[j];
      break;
    }
    case Op::Permute: {
      if (!needs(0)) break;
      Tensor& ga = grad_in(0);
      const Shape& sa = nodes_[n.inputs[0]].shape;
      std::array<std::size_t, 4> in_dims{1, 1, 1, 1};
      std::array<std::size_t, 4> perm{0, 1, 2, 3};
      const std::size_t rank = n.shape.size();
      const std::size_t pad = 4 - rank;
      for (std::size_t d = 0; d < rank; ++d) {
        in_dims[pad + d] = sa[d];
        perm[pad + d] = pad + static_cast<std::size_t>(n.ints[d]);
      }
      std::array<std::size_t, 4> in_stride{};
      in_stride[3] = 1;
      for (int d = 2; d >= 0; --d) in_stride[d] = in_stride[d + 1] * in_dims[d + 1];
      std::array<std::size_t, 4> out_dims{}, stride{};
      for (std::size_t d = 0; d < 4; ++d) {
        out_dims[d] = in_dims[perm[d]];
        stride[d] = in_stride[perm[d]];
      }
      std::size_t o = 0;
      for (std::size_t i0 = 0; i0 < out_dims[0]; ++i0)
        for (std::size_t i1 = 0; i1 < out_dims[1]; ++i1)
          for (std::size_t i2 = 0; i2 < out_dims[2]; ++i2) {
            const std::size_t base = i0 * stride[0] + i1 * stride[1] + i2 * stride[2];
            for (std::size_t i3 = 0; i3 < out_dims[3]; ++i3) ga[base + i3 * stride[3]] += g[o++];
          }
      break;
    }
    case Op::Select: {
      if (!needs(0)) break;
      Tensor& ga = grad_in(0);
      const Shape& sa = nodes_[n.inputs[0]].shape;
      const auto ax = static_cast<std::size_t>(n.ints[0]);
      const auto idx = static_cast<std::size_t>(n.ints[1]);
      std::size_t outer = 1;
      for (std::size_t d = 0; d < ax; ++d) outer *= sa[d];
      const std::size_t len = sa[ax];
      const std::size_t inner = shape_size(sa) / (outer * len);
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t j = 0; j < inner; ++j) ga[(o * len + idx) * inner + j] += g[o * inner + j];
      break;
    }
    case Op::Sum:
    case Op::Mean: {
      if (!needs(0)) break;
      Tensor& ga = grad_in(0);
      const double v = n.op == Op::Sum ? g[0] : g[0] / static_cast<double>(ga.size());
      for (std::size_t j = 0; j < ga.size(); ++j) ga[j] += v;
      break;
    }
    case Op::SquaredError: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      const std::size_t d = last_dim(a.shape());
      Tensor* ga = needs(0) ? &grad_in(0) : nullptr;
      Tensor* gb = needs(1) ? &grad_in(1) : nullptr;
      for (std::size_t r = 0; r < n.shape[0]; ++r)
        for (std::size_t j = 0; j < d; ++j) {
          const double v = 2.0 * (a[r * d + j] - b[r * d + j]) * g[r];
          if (ga) (*ga)[r * d + j] += v;
          if (gb) (*gb)[r * d + j] -= v;
        }
      break;
    }
    case Op::Pick: {
      if (!needs(0)) break;
      Tensor& ga = grad_in(0);
      const std::size_t cols = ga.dim(1);
      for (std::size_t r = 0; r < n.ints.size(); ++r) ga[r * cols + static_cast<std::size_t>(n.ints[r])] += g[r];
      break;
    }
    case Op::BlendRows: {
      const std::size_t width = g.size() / n.shape[0];
      for (std::size_t k = 0; k < 2; ++k) {
        if (!needs(k)) continue;
        Tensor& gk = grad_in(k);
        for (std::size_t r = 0; r < n.shape[0]; ++r) {
          if ((n.mask[r] != 0) != (k == 0)) continue;
          for (std::size_t j = 0; j < width; ++j) gk[r * width + j] += g[r * width + j];
        }
      }
      break;
    }
  }
}

ParameterSet backward(Graph& graph, std::string_view output, const Tensor* output_grad) {
  if (!graph.evaluated_) throw Error("backward called before forward");
  const NodeRef out = graph.output(output);
  const auto& out_shape = graph.nodes_[out.index].shape;
  std::vector<Tensor> grads(graph.nodes_.size());
  if (output_grad) {
    if (output_grad->shape() != out_shape) {
      throw Error("output gradient shape " + shape_string(output_grad->shape()) + " does not match output " +
                  shape_string(out_shape));
    }
    grads[out.index] = *output_grad;
  } else {
    if (shape_size(out_shape) != 1) {
      throw Error("backward on non-scalar output '" + std::string(output) + "' of shape " +
                  shape_string(out_shape) + " requires an explicit output gradient");
    }
    grads[out.index] = Tensor(out_shape, 1.0);
  }

  for (std::size_t i = out.index + 1; i-- > 0;) {
    if (grads[i].empty() || !graph.nodes_[i].requires_grad) continue;
    graph.backprop_node(i, grads);
  }

  ParameterSet result = graph.has_parameters() ? graph.parameters().zeros_like() : ParameterSet{};
  for (const auto& [name, idx] : graph.param_nodes_) {
    if (grads[idx].empty()) continue;
    Tensor& dst = result.at(graph.nodes_[idx].param_index);
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += grads[idx][j];
  }
  return result;
}

AttentionNodes scaled_dot_product_attention(Graph& graph, NodeRef q, NodeRef k, NodeRef v,
                                            std::vector<std::uint8_t> mask) {
  const auto& sq = graph.shape(q);
  if (sq.size() != 3) throw Error("attention expects rank-3 [B, m, d] queries");
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(sq[2]));
  auto scores = graph.scale(graph.batch_matmul(q, k, /*transpose_b=*/true), inv_sqrt_d);
  auto weights = graph.softmax(scores, std::move(mask));
  return {graph.batch_matmul(weights, v), weights};
}

}  // namespace mobtcast::diff
