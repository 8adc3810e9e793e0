#pragma once

#include <iosfwd>

#include "run_config.hpp"

namespace mobtcast::cli {

// Each command throws mobtcast::Error on failure.
void cmd_ingest(const RunConfig& c, std::ostream& out, std::ostream& err);
void cmd_neighbors(const RunConfig& c, std::ostream& out, std::ostream& err);
void cmd_synth(const RunConfig& c, std::ostream& out, std::ostream& err);
void cmd_train(const RunConfig& c, std::ostream& out, std::ostream& err);
void cmd_eval(const RunConfig& c, std::ostream& out, std::ostream& err);
void cmd_ablate(const RunConfig& c, std::ostream& out, std::ostream& err);
void cmd_analyze(const RunConfig& c, std::ostream& out, std::ostream& err);

}  // namespace mobtcast::cli
