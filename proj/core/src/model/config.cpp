#include "mobtcast/model/config.hpp"

#include <charconv>
#include <map>
#include <sstream>

#include "mobtcast/diff/tensor.hpp"

namespace mobtcast::model {
namespace {

std::string num(double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, r.ptr};
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw Error("manifest: bad value for " + key + ": " + v);
  return out;
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw Error("manifest: bad value for " + key + ": " + v);
  return out;
}

}  // namespace

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error("invalid model config: " + m); };
  if (d_poi + d_cat + d_time != d_model) {
    fail("d_poi + d_cat + d_time = " + std::to_string(d_poi + d_cat + d_time) + " but d_model = " +
         std::to_string(d_model));
  }
  if (heads == 0 || d_model % heads != 0) fail("d_model must be divisible by heads");
  if (d_model % 2 != 0) fail("d_model must be even for positional encoding");
  if (layers == 0 || ffn == 0 || d_user == 0) fail("layers, ffn and d_user must be positive");
  if (n == 0) fail("n must be >= 1");
  if (aux_input_len != n && aux_input_len + 1 != n) fail("aux_input_len must be n or n - 1");
  if (aux_input_len == 0 && use_aux) fail("aux_input_len is 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
  if (theta1 < 0 || theta2 < 0 || theta3 < 0) fail("loss weights must be non-negative");
  if (num_pois == 0 || num_users == 0 || num_categories == 0) fail("dataset dimensions not set");
}

ModelConfig desk_config() {
  ModelConfig c;
  c.d_model = 64;
  c.d_poi = 40;
  c.d_cat = 12;
  c.d_time = 12;
  c.d_user = 20;
  c.heads = 4;
  c.ffn = 128;
  c.layers = 2;
  return c;
}

const std::vector<std::string>& variant_names() {
  static const std::vector<std::string> names{"V0", "V1", "V2", "V3", "V4", "V5", "full", "aux-tra"};
  return names;
}

ModelConfig variant_config(std::string_view name, const ModelConfig& base) {
  ModelConfig c = base;
  c.variant = std::string(name);
  c.use_mobility = true;
  c.use_social = false;
  struct Row {
    bool semantic, aux;
    double t1, t2, t3;
  };
  static const std::map<std::string, Row, std::less<>> table{
      {"V0", {false, false, 1, 0, 0}}, {"V1", {true, false, 1, 0, 0}}, {"V2", {true, true, 1, 0, 0}},
      {"V3", {true, true, 1, 1, 0}},   {"V4", {true, true, 1, 0, 1}},  {"V5", {true, true, 1, 1, 1}},
      {"full", {true, true, 1, 1, 1}},
  };
  if (name == "aux-tra") {
    c.use_mobility = false;
    c.use_semantic = false;
    c.use_aux = true;
    c.theta1 = 0;
    c.theta2 = 1;
    c.theta3 = 0;
    return c;
  }
  auto it = table.find(name);
  if (it == table.end()) {
    std::string known;
    for (const auto& v : variant_names()) known += (known.empty() ? "" : ", ") + v;
    throw Error("unknown variant '" + std::string(name) + "' (known: " + known + ")");
  }
  c.use_semantic = it->second.semantic;
  c.use_aux = it->second.aux;
  c.use_social = name == "full";
  c.theta1 = it->second.t1;
  c.theta2 = it->second.t2;
  c.theta3 = it->second.t3;
  return c;
}

std::string DatasetFingerprint::to_string() const {
  std::ostringstream s;
  s << "pois=" << num_pois << " users=" << num_users << " categories=" << num_categories << " lon=[" << num(bounds.lon_min)
    << "," << num(bounds.lon_max) << "] lat=[" << num(bounds.lat_min) << "," << num(bounds.lat_max) << "]";
  return s.str();
}

std::string write_manifest(const ModelConfig& c, const DatasetFingerprint& f) {
  std::ostringstream s;
  s << "variant " << c.variant << '\n'
    << "d_model " << c.d_model << '\n'
    << "d_poi " << c.d_poi << '\n'
    << "d_cat " << c.d_cat << '\n'
    << "d_time " << c.d_time << '\n'
    << "layers " << c.layers << '\n'
    << "heads " << c.heads << '\n'
    << "ffn " << c.ffn << '\n'
    << "dropout " << num(c.dropout) << '\n'
    << "d_user " << c.d_user << '\n'
    << "k_max " << c.k_max << '\n'
    << "n " << c.n << '\n'
    << "aux_input_len " << c.aux_input_len << '\n'
    << "use_semantic " << c.use_semantic << '\n'
    << "use_social " << c.use_social << '\n'
    << "use_aux " << c.use_aux << '\n'
    << "use_mobility " << c.use_mobility << '\n'
    << "theta1 " << num(c.theta1) << '\n'
    << "theta2 " << num(c.theta2) << '\n'
    << "theta3 " << num(c.theta3) << '\n'
    << "num_pois " << c.num_pois << '\n'
    << "num_users " << c.num_users << '\n'
    << "num_categories " << c.num_categories << '\n'
    << "data.num_pois " << f.num_pois << '\n'
    << "data.num_users " << f.num_users << '\n'
    << "data.num_categories " << f.num_categories << '\n'
    << "data.lon_min " << num(f.bounds.lon_min) << '\n'
    << "data.lon_max " << num(f.bounds.lon_max) << '\n'
    << "data.lat_min " << num(f.bounds.lat_min) << '\n'
    << "data.lat_max " << num(f.bounds.lat_max) << '\n';
  return s.str();
}

void read_manifest(const std::string& text, ModelConfig& c, DatasetFingerprint& f) {
  std::map<std::string, std::string> kv;
  std::istringstream s(text);
  std::string line;
  while (std::getline(s, line)) {
    const auto sp = line.find(' ');
    if (line.empty() || sp == std::string::npos) continue;
    kv[line.substr(0, sp)] = line.substr(sp + 1);
  }
  auto get = [&](const std::string& k) -> const std::string& {
    auto it = kv.find(k);
    if (it == kv.end()) throw Error("model manifest lacks key '" + k + "'");
    return it->second;
  };
  auto size = [&](const char* k) { return parse_size(k, get(k)); };
  auto real = [&](const char* k) { return parse_real(k, get(k)); };
  auto flag = [&](const char* k) { return size(k) != 0; };
  c.variant = get("variant");
  c.d_model = size("d_model");
  c.d_poi = size("d_poi");
  c.d_cat = size("d_cat");
  c.d_time = size("d_time");
  c.layers = size("layers");
  c.heads = size("heads");
  c.ffn = size("ffn");
  c.dropout = real("dropout");
  c.d_user = size("d_user");
  c.k_max = size("k_max");
  c.n = size("n");
  c.aux_input_len = size("aux_input_len");
  c.use_semantic = flag("use_semantic");
  c.use_social = flag("use_social");
  c.use_aux = flag("use_aux");
  c.use_mobility = flag("use_mobility");
  c.theta1 = real("theta1");
  c.theta2 = real("theta2");
  c.theta3 = real("theta3");
  c.num_pois = size("num_pois");
  c.num_users = size("num_users");
  c.num_categories = size("num_categories");
  f.num_pois = size("data.num_pois");
  f.num_users = size("data.num_users");
  f.num_categories = size("data.num_categories");
  f.bounds.lon_min = real("data.lon_min");
  f.bounds.lon_max = real("data.lon_max");
  f.bounds.lat_min = real("data.lat_min");
  f.bounds.lat_max = real("data.lat_max");
}

}  // namespace mobtcast::model
