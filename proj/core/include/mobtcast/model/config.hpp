#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mobtcast/data/registry.hpp"

namespace mobtcast::model {

struct ModelConfig {
  std::size_t d_model = 128;
  std::size_t d_poi = 80;
  std::size_t d_cat = 24;
  std::size_t d_time = 24;
  std::size_t layers = 2;
  std::size_t heads = 8;
  std::size_t ffn = 256;
  double dropout = 0.1;
  std::size_t d_user = 40;
  std::size_t k_max = 8;
  std::size_t n = 20;
  /// Steps fed to the geographic encoder: n or n - 1.
  std::size_t aux_input_len = 20;

  bool use_semantic = true;
  bool use_social = true;
  bool use_aux = true;
  /// Off only for the coordinate-only baseline.
  bool use_mobility = true;
  double theta1 = 1.0;
  double theta2 = 1.0;
  double theta3 = 1.0;

  std::size_t num_pois = 0;
  std::size_t num_users = 0;
  std::size_t num_categories = 0;

  std::string variant = "full";

  /// Throws mobtcast::Error describing the first violated constraint.
  void validate() const;
  std::size_t head_dim() const { return d_model / heads; }
};

/// Dimensional defaults used by the desk-scale fixtures.
ModelConfig desk_config();

/// Known names: V0..V5, full, aux-tra. Dimensions come from `base`.
ModelConfig variant_config(std::string_view name, const ModelConfig& base = {});
const std::vector<std::string>& variant_names();

/// Dataset facts a checkpoint must agree with.
struct DatasetFingerprint {
  std::size_t num_pois = 0;
  std::size_t num_users = 0;
  std::size_t num_categories = 0;
  data::NormalizationBounds bounds;

  bool operator==(const DatasetFingerprint&) const = default;
  std::string to_string() const;
};

/// "key value" lines for the checkpoint manifest, and the inverse.
std::string write_manifest(const ModelConfig& config, const DatasetFingerprint& fingerprint);
void read_manifest(const std::string& text, ModelConfig& config, DatasetFingerprint& fingerprint);

}  // namespace mobtcast::model
