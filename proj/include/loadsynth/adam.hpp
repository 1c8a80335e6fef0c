#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "loadsynth/autodiff.hpp"

namespace loadsynth::ad {

struct AdamOptions {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected Adam over a fixed ParameterSet.
class Adam {
 public:
  Adam(AdamOptions options, const ParameterSet& params);

  // grads[i] pairs with params.items()[i]. A non-finite gradient throws
  // NumericalError before any parameter or moment is touched.
  void step(ParameterSet& params, std::span<const Tensor> grads);

  std::uint64_t step_count() const { return steps_; }
  const AdamOptions& options() const { return options_; }
  std::span<const Tensor> first_moments() const { return m_; }
  std::span<const Tensor> second_moments() const { return v_; }

 private:
  AdamOptions options_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::uint64_t steps_ = 0;
};

}  // namespace loadsynth::ad
