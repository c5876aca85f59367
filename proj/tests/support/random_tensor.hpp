#pragma once

#include <cstdint>

#include "semcom/rng.hpp"
#include "semcom/tensor.hpp"

namespace semcom::testing {

inline tensor::Tensor random_tensor(tensor::Shape shape, RngStream& rng, double lo = -1.0, double hi = 1.0) {
  tensor::Tensor t(shape);
  for (float& v : t.data()) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

inline tensor::Tensor random_tensor(tensor::Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  RngStream rng(seed);
  return random_tensor(shape, rng, lo, hi);
}

}  // namespace semcom::testing
