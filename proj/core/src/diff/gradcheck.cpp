#include "mobtcast/diff/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace mobtcast::diff {

GradCheckResult finite_diff_check(Graph& graph, const NamedTensors& point, double h, std::string_view output,
                                  const EvalOptions& options) {
  if (!(h > 0.0)) throw Error("finite_diff_check needs h > 0");
  if (options.train) throw Error("finite_diff_check requires dropout disabled");
  const auto out_node = graph.output(output);
  if (shape_size(graph.shape(out_node)) != 1) {
    throw Error("finite_diff_check on non-scalar output '" + std::string(output) + "'");
  }

  auto evaluate = [&] { return forward(graph, point, options).at(std::string(output)).item(); };
  evaluate();
  const ParameterSet analytic = backward(graph, output);

  GradCheckResult result;
  ParameterSet& params = graph.parameters();
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& theta = params.at(p);
    const Tensor& grad = analytic.at(p);
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const double saved = theta[k];
      theta[k] = saved + h;
      const double plus = evaluate();
      theta[k] = saved - h;
      const double minus = evaluate();
      theta[k] = saved;
      const double numeric = (plus - minus) / (2.0 * h);
      const double a = grad[k];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double err = std::abs(a - numeric) / denom;
      ++result.entries_checked;
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_parameter = params.name(p);
        result.worst_index = k;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  evaluate();
  return result;
}

}  // namespace mobtcast::diff
