#pragma once

#include "mcdn/tensor.hpp"

namespace mcdn {

/// Classical momentum: v <- mu * v + g; p <- p - lr * v.
/// Velocity entries are created on first use with the parameter's dims.
template <typename Scalar>
void sgd_step(const ParameterRefs<Scalar>& params, const GradientStore<Scalar>& grads, double learning_rate,
              double momentum, GradientStore<Scalar>& velocity) {
  require(learning_rate > 0, "sgd_step: learning rate must be positive");
  require(momentum >= 0 && momentum < 1, "sgd_step: momentum must lie in [0,1)");
  require(grads.size() == params.size(), "sgd_step: gradient store has " + std::to_string(grads.size()) +
                                             " entries for " + std::to_string(params.size()) + " parameters");
  for (const auto& [name, param] : params) {
    const auto g = grads.find(name);
    if (g == grads.end()) throw ContractError("sgd_step: no gradient for parameter '" + name + "'");
    if (g->second.dims() != param->dims())
      throw ContractError("sgd_step: gradient for '" + name + "' has dims " + shape_string(g->second.dims()) +
                          ", parameter has " + shape_string(param->dims()));
  }
  const auto lr = static_cast<Scalar>(learning_rate);
  const auto mu = static_cast<Scalar>(momentum);
  for (const auto& [name, param] : params) {
    const auto& grad = grads.at(name);
    auto [it, inserted] = velocity.try_emplace(name, Tensor<Scalar>(param->dims()));
    auto& v = it->second;
    if (v.dims() != param->dims()) throw ContractError("sgd_step: velocity for '" + name + "' has wrong dims");
    v.values() = mu * v.values() + grad.values();
    param->values() -= lr * v.values();
  }
}

}  // namespace mcdn
