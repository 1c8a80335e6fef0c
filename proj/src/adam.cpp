#include "loadsynth/adam.hpp"

#include <cmath>

#include "loadsynth/errors.hpp"

namespace loadsynth::ad {

Adam::Adam(AdamOptions options, const ParameterSet& params) : options_(options) {
  if (!(options.learning_rate >= 0.0) || !(options.beta1 >= 0.0 && options.beta1 < 1.0) ||
      !(options.beta2 >= 0.0 && options.beta2 < 1.0) || !(options.epsilon > 0.0)) {
    throw ValidationError("invalid Adam hyperparameters");
  }
  for (const auto& p : params.items()) {
    m_.emplace_back(p.var.shape(), 0.0);
    v_.emplace_back(p.var.shape(), 0.0);
  }
}

void Adam::step(ParameterSet& params, std::span<const Tensor> grads) {
  const auto items = params.items();
  if (items.size() != grads.size() || items.size() != m_.size()) {
    throw ShapeError("Adam::step: " + std::to_string(grads.size()) + " gradients for " +
                     std::to_string(items.size()) + " parameters");
  }
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (grads[i].shape() != items[i].var.shape()) {
      throw ShapeError("Adam::step: gradient shape " + to_string(grads[i].shape()) + " for parameter '" +
                       items[i].name + "' of shape " + to_string(items[i].var.shape()));
    }
    if (!grads[i].all_finite()) {
      throw NumericalError("Adam::step: non-finite gradient for parameter '" + items[i].name + "' at step " +
                           std::to_string(steps_ + 1));
    }
  }

  ++steps_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < items.size(); ++i) {
    // Parameters are leaves; ParameterSet hands out shared handles.
    Var handle = items[i].var;
    Tensor& p = handle.mutable_value();
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    const Tensor& g = grads[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = b1 * m[k] + (1.0 - b1) * g[k];
      v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      p[k] -= options_.learning_rate * m_hat / (std::sqrt(v_hat) + options_.epsilon);
    }
  }
}

}  // namespace loadsynth::ad
