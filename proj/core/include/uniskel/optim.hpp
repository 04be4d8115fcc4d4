#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "uniskel/params.hpp"
#include "uniskel/tensor.hpp"

namespace uniskel {

/// Adam accumulators keyed by parameter name. Moment tensors are created
/// lazily with the shape of their parameter; the step counter advances once
/// per adam_step call.
struct OptimizerState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::unordered_map<std::string, Tensor> first_moment;
  std::unordered_map<std::string, Tensor> second_moment;
};

/// One bias-corrected Adam update over the given (name, gradient) pairs.
/// Throws if any gradient is non-finite, naming the offending parameter.
void adam_step(ParamStore& params,
               const std::vector<std::pair<std::string, const Tensor*>>& grads,
               OptimizerState& state);

}  // namespace uniskel
