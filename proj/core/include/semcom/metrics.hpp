#pragma once

#include <cstdint>

#include "semcom/codec.hpp"
#include "semcom/segmentation.hpp"
#include "semcom/tensor.hpp"

namespace semcom::metrics {

using tensor::Tensor;

struct PsnrResult {
  double value_db = 0.0;  // +infinity when mse == 0
  double mse = 0.0;
  double max_val = 1.0;

  [[nodiscard]] bool is_infinite() const;
};

/// 10 log10(max_val^2 / mse) over all elements.
PsnrResult psnr(const Tensor& a, const Tensor& b, double max_val = 1.0);

/// PSNR with the MSE averaged over ROI pixels only (all channels). `a` and
/// `b` are [1, C, H, W]. Throws DegenerateMaskError for an empty mask.
PsnrResult psnr_masked(const Tensor& a, const Tensor& b, const segmentation::Mask& mask,
                       double max_val = 1.0);

/// Exact reduced fraction.
struct Rational {
  std::uint64_t numerator = 0;
  std::uint64_t denominator = 1;

  [[nodiscard]] double value() const {
    return static_cast<double>(numerator) / static_cast<double>(denominator);
  }
  friend constexpr bool operator==(const Rational&, const Rational&) = default;
};

/// (C_o H_o W_o) / (C_in H_in W_in), reduced.
Rational compression_ratio(const codec::ItemShape& input, const codec::ItemShape& output);

}  // namespace semcom::metrics
