#include "uniskel/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace uniskel {

void adam_step(ParamStore& params,
               const std::vector<std::pair<std::string, const Tensor*>>& grads,
               OptimizerState& state) {
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (const auto& [name, grad] : grads) {
    Tensor& p = params.get(name);
    if (grad->size() != p.size()) {
      throw std::invalid_argument("adam_step: gradient shape mismatch for '" + name + "'");
    }
    if (!grad->all_finite()) {
      throw std::runtime_error("adam_step: non-finite gradient for parameter '" + name + "'");
    }
    Tensor& m = state.first_moment.try_emplace(name, Tensor(p.shape())).first->second;
    Tensor& v = state.second_moment.try_emplace(name, Tensor(p.shape())).first->second;
    for (std::int64_t i = 0; i < p.size(); ++i) {
      const double g = (*grad)[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

}  // namespace uniskel
