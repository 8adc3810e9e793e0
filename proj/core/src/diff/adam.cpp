#include "mobtcast/diff/adam.hpp"

#include <cmath>

namespace mobtcast::diff {

AdamState AdamState::for_parameters(const ParameterSet& params, AdamConfig config) {
  AdamState state;
  state.config = config;
  state.m = params.zeros_like();
  state.v = params.zeros_like();
  return state;
}

void adam_step(ParameterSet& params, const ParameterSet& grads, AdamState& state) {
  if (grads.size() != params.size() || state.m.size() != params.size()) {
    throw Error("adam_step: parameter, gradient and state sets differ in size");
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (params.at(p).shape() != grads.at(p).shape() || params.at(p).shape() != state.m.at(p).shape()) {
      throw Error("adam_step: shape mismatch for '" + params.name(p) + "': parameter " +
                  shape_string(params.at(p).shape()) + ", gradient " + shape_string(grads.at(p).shape()));
    }
  }

  ++state.step;
  const auto& c = state.config;
  const double t = static_cast<double>(state.step);
  const double m_correction = 1.0 - std::pow(c.beta1, t);
  const double v_correction = 1.0 - std::pow(c.beta2, t);

  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& theta = params.at(p);
    const Tensor& g = grads.at(p);
    Tensor& m = state.m.at(p);
    Tensor& v = state.v.at(p);
    for (std::size_t k = 0; k < theta.size(); ++k) {
      m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g[k];
      v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g[k] * g[k];
      const double m_hat = m[k] / m_correction;
      const double v_hat = v[k] / v_correction;
      theta[k] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

}  // namespace mobtcast::diff
