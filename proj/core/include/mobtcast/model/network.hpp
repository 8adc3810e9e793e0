#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mobtcast/data/windows.hpp"
#include "mobtcast/diff/graph.hpp"
#include "mobtcast/model/config.hpp"
#include "mobtcast/social/social.hpp"

namespace mobtcast::model {

using diff::NodeRef;

/// PE(pos, 2i) = sin(pos / 10000^(2i/d)), PE(pos, 2i+1) = cos(same).
diff::Tensor positional_encoding(std::size_t n, std::size_t d);

std::vector<std::pair<std::string, diff::Shape>> parameter_shapes(const ModelConfig& config);

/// Xavier-uniform matrices, unit gains, zero biases, small uniform embeddings.
/// Each tensor draws from its own stream derived from (seed, "init", name).
diff::ParameterSet init_params(const ModelConfig& config, std::uint64_t seed);

/// Parameter-name prefixes of the two heads.
inline constexpr std::string_view kPoiHeadPrefix = "poi_head.";
inline constexpr std::string_view kGeoHeadPrefix = "geo_head.";

/// One prediction instance and the neighbor histories it may attend to.
struct BatchItem {
  const data::TrajectoryWindow* window = nullptr;
  std::vector<social::HistorySpan> neighbors;
};

struct BuildOptions {
  bool train = false;
  bool poi_head = true;
  bool geo_head = true;
  bool losses = true;
};

struct NetworkNodes {
  std::size_t batch = 0;
  NodeRef h;        // [B, d] self mobility feature
  NodeRef context;  // [B, d] H when the social path is on, else h
  std::optional<NodeRef> social_weights;  // [B * heads, 1, slots]
  std::size_t social_slots = 0;
  std::vector<std::size_t> neighbor_counts;
  std::optional<NodeRef> g;  // [B, d]
  NodeRef user;              // [B, d_user]
  NodeRef f;                 // [B, d]
  std::optional<NodeRef> logits;
  std::optional<NodeRef> probs;
  std::optional<NodeRef> pred_coord;      // [B, 2]
  std::optional<NodeRef> inferred_coord;  // [B, 2]
  std::optional<NodeRef> l1, l2, l3, total;
  std::vector<NodeRef> encoder_attention;
};

/// Graph-building pieces of the network. Each call appends nodes to `graph`,
/// which must be bound to a ParameterSet shaped by parameter_shapes().
class Network {
 public:
  Network(diff::Graph& graph, const ModelConfig& config, bool train);

  /// e_p ⊕ e_c ⊕ e_t per step -> [N, d_model]; the category block is zero without semantics.
  NodeRef embed_steps(const std::vector<std::int64_t>& pois, const std::vector<std::int64_t>& cats,
                      const std::vector<std::int64_t>& slots);
  /// Pre-norm Transformer over [S, L, d]; returns the final-position output [S, d].
  NodeRef encode(const std::string& prefix, NodeRef x, std::size_t S, std::size_t L);
  /// Embedding, positional encoding and encoder over S flattened length-n sequences.
  NodeRef mobility_features(const std::vector<std::int64_t>& pois, const std::vector<std::int64_t>& cats,
                            const std::vector<std::int64_t>& slots, std::size_t S);

  struct Social {
    NodeRef H;
    std::optional<NodeRef> weights;
  };
  /// Attention from each h_self row over [self, neighbors...]. `rows` holds
  /// B * (1 + k) indices into `features` (-1 pads); slot 0 must be the self row.
  /// Rows without neighbors keep h_self exactly.
  Social social_aggregate(NodeRef h_self, NodeRef features, const std::vector<std::int64_t>& rows, std::size_t k);

  /// coords: [B, L, 2] normalized pairs -> g [B, d].
  NodeRef aux_geo_features(const diff::Tensor& coords);
  /// ReLU(FC(ctx ⊕ g ⊕ e_u)); a missing g becomes a zero block.
  NodeRef fuse(NodeRef context, std::optional<NodeRef> g, NodeRef user_embedding);
  NodeRef user_embedding(const std::vector<std::int64_t>& users);
  NodeRef poi_logits(NodeRef f);
  NodeRef location(NodeRef f);

  const std::vector<NodeRef>& attention_nodes() const noexcept { return attention_; }

 private:
  NodeRef linear(NodeRef x, const std::string& w, const std::string& b);
  NodeRef maybe_dropout(NodeRef x);
  NodeRef split_heads(NodeRef x, std::size_t S, std::size_t L);
  NodeRef merge_heads(NodeRef x, std::size_t S, std::size_t L);

  diff::Graph& g_;
  const ModelConfig& c_;
  bool train_;
  std::uint64_t stream_ = 0;
  std::vector<NodeRef> attention_;
};

/// Full forward graph for a batch: features, heads and (optionally) the
/// weighted losses. `poi_coords` is the [|P|, 2] registry coordinate table.
NetworkNodes build_network(diff::Graph& graph, const ModelConfig& config, const std::vector<BatchItem>& batch,
                           const data::UserSequences& sequences, const diff::Tensor& poi_coords,
                           const BuildOptions& options = {});

/// Registry coordinates as a [|P|, 2] tensor (x, y).
diff::Tensor coordinate_table(const data::PoiRegistry& registry);

/// Head-averaged social attention row for instance b: 1 + m entries.
std::vector<double> social_alpha(const diff::Graph& graph, const NetworkNodes& nodes, const ModelConfig& config,
                                 std::size_t b);

}  // namespace mobtcast::model
