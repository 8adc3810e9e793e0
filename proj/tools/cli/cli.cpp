#include "cli.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <type_traits>
#include <map>
#include <ostream>
#include <sstream>

#include "commands.hpp"

namespace mobtcast::cli {

namespace {

using Command = void (*)(const RunConfig&, std::ostream&, std::ostream&);

struct CommandInfo {
  const char* name;
  const char* help;
  Command fn;
};

constexpr CommandInfo kCommands[] = {
    {"ingest", "Parse a raw check-in file into a dataset directory", cmd_ingest},
    {"neighbors", "Discover (or load) the social neighbor graph", cmd_neighbors},
    {"synth", "Generate a synthetic corpus with planted signals", cmd_synth},
    {"train", "Train one variant and write a checkpoint plus metrics", cmd_train},
    {"eval", "Score a checkpoint (or a random init) on one split", cmd_eval},
    {"ablate", "Train every variant for every seed and tabulate test accuracy", cmd_ablate},
    {"analyze", "Hourly category histogram, clip distances, friend DTW", cmd_analyze},
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read config file " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

template <typename T>
std::string default_text(const T& v) {
  if constexpr (std::is_same_v<T, std::string>) {
    return v;
  } else if constexpr (std::is_same_v<T, bool>) {
    return v ? "true" : "false";
  } else if constexpr (std::is_same_v<T, double>) {
    std::ostringstream s;
    s << v;
    return s.str();
  } else if constexpr (std::is_arithmetic_v<T>) {
    return std::to_string(v);
  } else {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ",") + default_text(x);
    return s;
  }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Next-POI forecasting with semantic, social and geographic context"};
  app.require_subcommand(1);

  // Raw flag text per key; applied after the config file so flags win.
  std::map<std::string, std::string> given;
  std::string config_path;
  const RunConfig defaults;

  std::vector<std::pair<CLI::App*, Command>> subs;
  for (const auto& info : kCommands) {
    auto* sub = app.add_subcommand(info.name, info.help);
    sub->add_option("--config", config_path, "JSON object of flat RunConfig keys");
    RunConfig shown = defaults;
    visit_fields(shown, [&](const char* key, auto& field, const char* help) {
      sub->add_option_function<std::string>(
             "--" + kebab(key), [&given, k = std::string(key)](const std::string& v) { given[k] = v; }, help)
          ->default_str(default_text(field));
    });
    subs.emplace_back(sub, info.fn);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, er;
    const int code = app.exit(e, o, er);
    out << o.str();
    err << er.str();
    return code == 0 ? kExitOk : kExitUsage;
  }

  RunConfig config;
  try {
    if (!config_path.empty()) apply_json(config, read_file(config_path), config_path);
    for (const auto& [k, v] : given) apply_flag(config, k, v);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  for (const auto& [sub, fn] : subs) {
    if (!sub->parsed()) continue;
    try {
      fn(config, out, err);
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return kExitFailure;
    }
    return kExitOk;
  }
  return kExitUsage;
}

}  // namespace mobtcast::cli
