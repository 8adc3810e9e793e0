#pragma once

#include <iosfwd>

namespace mobtcast::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Parses argv and runs one command. Data goes to files or `out`; every
/// diagnostic goes to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mobtcast::cli
