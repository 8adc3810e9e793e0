#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "mobtcast/diff/parameters.hpp"

namespace mobtcast::diff {

/// Extra text members stored next to the parameters (e.g. a model manifest).
using TextEntries = std::map<std::string, std::string>;

struct Checkpoint {
  ParameterSet params;
  TextEntries text;
};

/// Writes a POSIX ustar archive holding `manifest.txt` (one line per array:
/// name, element type, comma-separated shape), one `params/<name>.bin` blob of
/// little-endian f64 per parameter, and each text entry verbatim. Member
/// timestamps are zero so identical parameters give identical bytes.
void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params, const TextEntries& text = {});

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mobtcast::diff
