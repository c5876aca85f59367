#pragma once

#include <string>
#include <utility>

#include "semcom/tensor.hpp"

namespace semcom::tensor {

/// Trainable tensor with its accumulated gradient.
struct Parameter {
  Parameter(std::string name, Tensor value)
      : name(std::move(name)), value(std::move(value)), grad(this->value.shape()) {}

  std::string name;
  Tensor value;
  Tensor grad;

  void zero_grad() { grad.fill(0.0f); }
};

}  // namespace semcom::tensor
