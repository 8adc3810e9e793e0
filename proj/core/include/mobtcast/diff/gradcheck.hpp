#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "mobtcast/diff/graph.hpp"

namespace mobtcast::diff {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t entries_checked = 0;
};

/// Compares the reverse-mode gradient of a scalar output against central
/// differences (f(p+h) - f(p-h)) / 2h for every entry of every parameter.
/// Relative error per entry is |a - n| / max(|a|, |n|, 1e-8), so an unused
/// parameter (both zero) contributes 0. Dropout must be off in `options`.
GradCheckResult finite_diff_check(Graph& graph, const NamedTensors& point, double h,
                                  std::string_view output = "loss", const EvalOptions& options = {});

}  // namespace mobtcast::diff
