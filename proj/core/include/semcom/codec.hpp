#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "semcom/adam.hpp"
#include "semcom/kernels.hpp"
#include "semcom/parameter.hpp"
#include "semcom/tape.hpp"
#include "semcom/tensor.hpp"

namespace semcom::codec {

using tensor::Activation;
using tensor::Tape;
using tensor::Tensor;
using tensor::Value;

/// Per-item extent [C, H, W].
struct ItemShape {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  [[nodiscard]] constexpr std::size_t numel() const { return channels * height * width; }
  [[nodiscard]] tensor::Shape batched(std::size_t n) const { return {n, channels, height, width}; }

  friend constexpr bool operator==(const ItemShape&, const ItemShape&) = default;
};

/// One strided convolution stage of the encoder. The decoder mirrors every
/// stage with a transposed convolution of the same kernel/stride/padding.
struct StageSpec {
  std::size_t out_channels = 0;
  std::size_t kernel = 4;
  std::size_t stride = 2;
  std::size_t padding = 1;

  friend constexpr bool operator==(const StageSpec&, const StageSpec&) = default;
};

struct CodecConfig {
  ItemShape input{3, 512, 512};
  ItemShape features{128, 32, 32};
  std::vector<StageSpec> stages{{32}, {64}, {128}, {128}};
  Activation hidden = Activation::leaky_relu(0.2f);
  Activation output = Activation::sigmoid();

  /// 3x512x512 -> 128x32x32 stack.
  static CodecConfig full_scale();
  /// The default four-stage stack applied to a square RGB input of `size`
  /// pixels, with the feature shape it implies.
  static CodecConfig for_square_input(std::size_t size);

  /// Throws ConfigError unless the stage arithmetic maps `input` onto
  /// `features` and the mirrored decoder maps it back.
  void validate() const;

  /// Feature shape implied by running the encoder stages on `input`.
  [[nodiscard]] ItemShape derived_features() const;

  friend bool operator==(const CodecConfig&, const CodecConfig&) = default;
};

/// F_enc / F_dec pair with its parameters and optimizer state.
class CodecModel {
 public:
  CodecModel(CodecConfig config, std::vector<tensor::Parameter> parameters);

  [[nodiscard]] const CodecConfig& config() const { return config_; }

  /// Semantic features x_s for a batch of inputs in [0, 1].
  [[nodiscard]] Tensor encode(const Tensor& x_in) const;
  /// Reconstruction in [0, 1] from (possibly noisy) features.
  [[nodiscard]] Tensor decode(const Tensor& y) const;

  Value encode(Tape& tape, Value x_in);
  Value decode(Tape& tape, Value y);

  [[nodiscard]] std::span<tensor::Parameter> parameters() { return parameters_; }
  [[nodiscard]] std::span<const tensor::Parameter> parameters() const { return parameters_; }
  /// Total scalar parameter count.
  [[nodiscard]] std::size_t parameter_count() const;

  [[nodiscard]] tensor::AdamState& optimizer() { return optimizer_; }
  [[nodiscard]] const tensor::AdamState& optimizer() const { return optimizer_; }

 private:
  void require_input(const tensor::Shape& shape) const;
  void require_features(const tensor::Shape& shape) const;

  CodecConfig config_;
  std::vector<tensor::Parameter> parameters_;
  tensor::AdamState optimizer_;
};

/// Seeded fan-in uniform initialisation, bound sqrt(1 / (Cin * K * K)).
CodecModel build_codec(const CodecConfig& config, std::uint64_t seed);

/// Names and shapes of every parameter `config` implies, in model order.
std::vector<std::pair<std::string, tensor::Shape>> parameter_layout(const CodecConfig& config);

/// Scales every batch item to unit average power: x * sqrt(K / sum(x^2)).
/// Throws DegenerateSignalError when an item is identically zero.
Tensor power_normalize(const Tensor& x);
Value power_normalize(Tape& tape, Value x);

}  // namespace semcom::codec
