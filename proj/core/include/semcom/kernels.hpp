#pragma once

#include <cstddef>

#include "semcom/tensor.hpp"

// Forward and adjoint numerics for the differentiable layer set. These run
// without a tape; Tape wraps them to record gradients.
namespace semcom::tensor {

struct ConvGeometry {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

/// Cross-correlation with zero padding.
/// input [N, Cin, H, W], weight [Cout, Cin, K, K], bias [1, Cout, 1, 1].
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, ConvGeometry geometry);

/// Output spatial extent of conv2d, or 0 when the configuration is degenerate.
std::size_t conv2d_output_extent(std::size_t extent, std::size_t kernel, ConvGeometry geometry);

/// Transposed convolution (adjoint of conv2d with respect to its input).
/// input [N, Cin, H, W], weight [Cin, Cout, K, K], bias [1, Cout, 1, 1].
/// Output extent is (H - 1) * stride - 2 * padding + K.
Tensor conv_transpose2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
                        ConvGeometry geometry);

std::size_t conv_transpose2d_output_extent(std::size_t extent, std::size_t kernel,
                                           ConvGeometry geometry);

struct ConvGradients {
  Tensor input;
  Tensor weight;
  Tensor bias;
};

ConvGradients conv2d_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_output,
                              ConvGeometry geometry);
ConvGradients conv_transpose2d_backward(const Tensor& input, const Tensor& weight,
                                        const Tensor& grad_output, ConvGeometry geometry);

enum class ActivationKind { relu, leaky_relu, sigmoid };

struct Activation {
  ActivationKind kind = ActivationKind::relu;
  float slope = 0.0f;  // leaky_relu only

  static constexpr Activation relu() { return {ActivationKind::relu, 0.0f}; }
  static constexpr Activation leaky_relu(float slope) { return {ActivationKind::leaky_relu, slope}; }
  static constexpr Activation sigmoid() { return {ActivationKind::sigmoid, 0.0f}; }

  friend constexpr bool operator==(const Activation&, const Activation&) = default;
};

/// Sigmoid output is clamped into the open interval (0, 1).
Tensor activate(const Tensor& input, Activation activation);
Tensor activate_backward(const Tensor& input, const Tensor& output, const Tensor& grad_output,
                         Activation activation);

/// Mean of squared differences, accumulated in double.
double mse(const Tensor& pred, const Tensor& target);

}  // namespace semcom::tensor
