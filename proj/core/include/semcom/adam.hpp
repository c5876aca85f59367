#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "semcom/parameter.hpp"

namespace semcom::tensor {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second moment buffers, sized lazily on the first step.
struct AdamState {
  AdamOptions options;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step = 0;
};

/// Bias-corrected Adam update, then zeroes every gradient and advances the
/// step counter. Throws ConfigError if the parameter list changes between steps.
void adam_step(std::span<Parameter> params, AdamState& state);

}  // namespace semcom::tensor
