#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "cwan/tensor.hpp"

namespace cwan {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment accumulators for one group of parameter tensors.
struct AdamState {
  AdamOptions options;
  std::size_t step = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;

  AdamState() = default;

  AdamState(AdamOptions opts, std::span<const Tensor* const> params) : options(opts) {
    if (!(opts.learning_rate > 0.0) || !(opts.beta1 > 0.0 && opts.beta1 < 1.0) ||
        !(opts.beta2 > 0.0 && opts.beta2 < 1.0) || !(opts.epsilon > 0.0)) {
      throw ConfigError("invalid Adam hyperparameters");
    }
    for (const Tensor* p : params) {
      first_moment.push_back(Tensor::zeros(p->shape()));
      second_moment.push_back(Tensor::zeros(p->shape()));
    }
  }
};

/// One bias-corrected Adam update, in place.
inline void adam_step(AdamState& state, std::span<Tensor* const> params,
                      std::span<const Tensor> grads) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
    throw DimensionError("adam_step: " + std::to_string(params.size()) + " params, " +
                         std::to_string(grads.size()) + " grads, " +
                         std::to_string(state.first_moment.size()) + " accumulators");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->same_shape(grads[i]) || !params[i]->same_shape(state.first_moment[i])) {
      throw DimensionError("adam_step: parameter " + std::to_string(i) + " has shape " +
                           params[i]->shape_string() + " but gradient " +
                           grads[i].shape_string());
    }
  }
  const auto& o = state.options;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->mat().array();
    auto g = grads[i].mat().array();
    auto m = state.first_moment[i].mat().array();
    auto v = state.second_moment[i].mat().array();
    m = o.beta1 * m + (1.0 - o.beta1) * g;
    v = o.beta2 * v + (1.0 - o.beta2) * g.square();
    p -= o.learning_rate * (m / c1) / ((v / c2).sqrt() + o.epsilon);
  }
}

}  // namespace cwan
