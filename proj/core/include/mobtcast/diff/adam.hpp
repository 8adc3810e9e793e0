#pragma once

#include <cstdint>

#include "mobtcast/diff/parameters.hpp"

namespace mobtcast::diff {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second moment estimates shaped like the parameters they track.
struct AdamState {
  AdamConfig config;
  ParameterSet m;
  ParameterSet v;
  std::uint64_t step = 0;

  static AdamState for_parameters(const ParameterSet& params, AdamConfig config = {});
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(ParameterSet& params, const ParameterSet& grads, AdamState& state);

}  // namespace mobtcast::diff
