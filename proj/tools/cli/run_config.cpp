#include "run_config.hpp"

#include <algorithm>
#include <charconv>
#include <json.hpp>
#include <sstream>
#include <type_traits>

namespace mobtcast::cli {


namespace {

using json = nlohmann::ordered_json;

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end) throw Error("--" + kebab(key) + ": cannot parse '" + text + "'");
  return v;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
void assign_text(T& field, const std::string& key, const std::string& text) {
  if constexpr (std::is_same_v<T, std::string>) {
    field = text;
  } else if constexpr (std::is_same_v<T, bool>) {
    if (text == "true" || text == "1" || text == "on") field = true;
    else if (text == "false" || text == "0" || text == "off") field = false;
    else throw Error("--" + kebab(key) + ": expected true or false, got '" + text + "'");
  } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
    field = split_list(text);
  } else if constexpr (std::is_same_v<T, std::vector<std::uint64_t>>) {
    field.clear();
    for (const auto& s : split_list(text)) field.push_back(parse_number<std::uint64_t>(key, s));
  } else {
    field = parse_number<T>(key, text);
  }
}

}  // namespace

std::string kebab(const std::string& key) {
  std::string s = key;
  std::replace(s.begin(), s.end(), '_', '-');
  return s;
}

std::vector<std::string> field_keys() {
  RunConfig c;
  std::vector<std::string> keys;
  visit_fields(c, [&](const char* key, auto&, const char*) { keys.emplace_back(key); });
  return keys;
}

std::string to_json(const RunConfig& config) {
  RunConfig c = config;
  json j = json::object();
  visit_fields(c, [&](const char* key, auto& field, const char*) { j[key] = field; });
  return j.dump(2);
}

void apply_json(RunConfig& config, const std::string& text, const std::string& source) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw Error(source + ": invalid JSON: " + e.what());
  }
  if (!j.is_object()) throw Error(source + ": expected a JSON object");
  const auto keys = field_keys();
  for (const auto& [key, _] : j.items()) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) throw Error(source + ": unknown key '" + key + "'");
  }
  visit_fields(config, [&](const char* key, auto& field, const char*) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(field);
    } catch (const std::exception& e) {
      throw Error(source + ": bad value for '" + key + "': " + e.what());
    }
  });
}

void apply_flag(RunConfig& config, const std::string& key, const std::string& value) {
  bool found = false;
  visit_fields(config, [&](const char* k, auto& field, const char*) {
    if (key != k) return;
    assign_text(field, key, value);
    found = true;
  });
  if (!found) throw Error("unknown option '" + key + "'");
}

model::ModelConfig model_base(const RunConfig& c) {
  model::ModelConfig m;
  m.d_model = c.d_model;
  m.d_poi = c.d_poi;
  m.d_cat = c.d_cat;
  m.d_time = c.d_time;
  m.layers = c.layers;
  m.heads = c.heads;
  m.ffn = c.ffn;
  m.dropout = c.dropout;
  m.d_user = c.d_user;
  m.k_max = c.k_max;
  m.n = c.n;
  m.aux_input_len = c.aux_input_len == 0 ? c.n : c.aux_input_len;
  return m;
}

model::ModelConfig variant_model(const RunConfig& c, const std::string& variant) {
  auto m = model::variant_config(variant, model_base(c));
  if (c.theta1 >= 0) m.theta1 = c.theta1;
  if (c.theta2 >= 0) m.theta2 = c.theta2;
  if (c.theta3 >= 0) m.theta3 = c.theta3;
  return m;
}

train::TrainConfig train_config(const RunConfig& c) {
  train::TrainConfig t;
  t.learning_rate = c.learning_rate;
  t.batch_size = c.batch_size;
  t.max_epochs = c.max_epochs;
  t.patience = c.patience;
  t.seed = c.seed;
  t.variant = c.variant;
  t.n = c.n;
  t.micro_batch = c.micro_batch;
  t.eval_batch = c.eval_batch;
  t.threads = c.threads;
  t.train_eval_every = c.train_eval_every;
  t.target_train_acc = c.target_train_acc;
  t.early_stopping = c.early_stopping;
  return t;
}

synth::SynthConfig synth_config(const RunConfig& c, std::uint64_t seed) {
  synth::SynthConfig s;
  s.n_users = c.n_users;
  s.n_pois = c.n_pois;
  s.n_categories = c.n_categories;
  s.n_groups = c.n_groups;
  s.checkins_per_user = c.checkins_per_user;
  s.favourites = c.favourites;
  s.semantic_strength = c.semantic_strength;
  s.social_strength = c.social_strength;
  s.geo_strength = c.geo_strength;
  s.geo_radius = c.geo_radius;
  s.seed = seed;
  return s;
}

train::CorpusOptions corpus_options(const RunConfig& c) {
  train::CorpusOptions o;
  o.n = c.n;
  o.tau = c.tau;
  o.train_frac = c.train_frac;
  o.val_frac_of_train = c.val_frac;
  o.edges = c.edges;
  return o;
}

}  // namespace mobtcast::cli
