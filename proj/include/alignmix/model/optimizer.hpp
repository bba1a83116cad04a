#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "alignmix/model/params.hpp"

namespace alignmix::model {

/// Momentum buffers, one per parameter tensor.
template <typename T>
struct SgdState {
  std::vector<std::vector<T>> velocity;

  SgdState() = default;
  explicit SgdState(const ParamStore<T>& params) {
    for (const auto& p : params) velocity.emplace_back(p.value.size(), T{0});
  }
};

/// v <- momentum * v + grad + weight_decay * param;  param <- param - lr * v
/// Throws numeric_error naming the first parameter that becomes non-finite.
template <typename T>
void sgd_update(ParamStore<T>& params, const Gradients<T>& grads, SgdState<T>& state, double lr, double momentum,
                double weight_decay) {
  if (grads.values.size() != params.size() || state.velocity.size() != params.size())
    throw dimension_error("sgd_update: parameter, gradient and state counts differ");
  const T m = static_cast<T>(momentum);
  const T wd = static_cast<T>(weight_decay);
  const T step = static_cast<T>(lr);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[static_cast<int>(i)];
    const auto& g = grads.values[i];
    auto& v = state.velocity[i];
    if (g.size() != p.value.size() || v.size() != p.value.size())
      throw dimension_error("sgd_update: shape mismatch for " + p.name);
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      v[k] = m * v[k] + g[k] + wd * p.value[k];
      p.value[k] -= step * v[k];
      if (!std::isfinite(p.value[k])) throw numeric_error("non-finite parameter after update: " + p.name);
    }
  }
}

/// Step decay: initial * decay^floor(epoch / period).
struct LrSchedule {
  double initial = 0.1;
  double decay = 0.1;
  int period = 500;

  [[nodiscard]] double at(int epoch) const {
    return initial * std::pow(decay, static_cast<double>(epoch / period));
  }
};

}  // namespace alignmix::model
