#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "cwan/tape.hpp"

namespace cwan {

/// Builds a scalar loss on `tape` from leaf parameters.
using ScalarFn = std::function<Var(Tape& tape, std::span<const Var> params)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
};

/// Relative error |a - b| / max(|a|, |b|, floor). The floor keeps
/// near-zero gradients from turning rounding noise into large ratios.
inline double relative_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Compares reverse-mode gradients of `fn` at `point` against central differences.
inline GradCheckResult grad_check(const ScalarFn& fn, std::vector<Tensor> point, double h = 1e-5) {
  auto evaluate = [&](const std::vector<Tensor>& at) {
    Tape tape;
    std::vector<Var> vars;
    for (const Tensor& t : at) vars.push_back(tape.parameter(t));
    return fn(tape, vars).value().item();
  };

  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const Tensor& t : point) vars.push_back(tape.parameter(t));
    const Var loss = fn(tape, vars);
    const Gradients g = backward(tape, loss);
    for (const Var& v : vars) analytic.push_back(g[v]);
  }

  GradCheckResult result;
  for (std::size_t t = 0; t < point.size(); ++t) {
    for (std::size_t i = 0; i < point[t].numel(); ++i) {
      const double orig = point[t][i];
      point[t][i] = orig + h;
      const double up = evaluate(point);
      point[t][i] = orig - h;
      const double down = evaluate(point);
      point[t][i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double err = relative_error(analytic[t][i], numeric);
      if (err > result.max_relative_error) result = {err, t, i};
    }
  }
  return result;
}

}  // namespace cwan
