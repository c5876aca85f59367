#include "semcom/codec.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "semcom/errors.hpp"
#include "semcom/rng.hpp"

namespace semcom::codec {

namespace {

using tensor::ConvGeometry;
using tensor::Parameter;
using tensor::Shape;

std::string describe(const ItemShape& s) {
  return std::to_string(s.channels) + "x" + std::to_string(s.height) + "x" + std::to_string(s.width);
}

// Channel widths along the encoder: C_in, stage0.out, stage1.out, ...
std::vector<std::size_t> channel_chain(const CodecConfig& config) {
  std::vector<std::size_t> chain{config.input.channels};
  for (const StageSpec& stage : config.stages) {
    chain.push_back(stage.out_channels);
  }
  return chain;
}

ConvGeometry geometry_of(const StageSpec& stage) { return {stage.stride, stage.padding}; }

}  // namespace

CodecConfig CodecConfig::full_scale() { return CodecConfig{}; }

CodecConfig CodecConfig::for_square_input(std::size_t size) {
  CodecConfig config;
  config.input = {3, size, size};
  config.features = config.derived_features();
  return config;
}

ItemShape CodecConfig::derived_features() const {
  std::size_t h = input.height;
  std::size_t w = input.width;
  for (const StageSpec& stage : stages) {
    h = tensor::conv2d_output_extent(h, stage.kernel, geometry_of(stage));
    w = tensor::conv2d_output_extent(w, stage.kernel, geometry_of(stage));
    if (h == 0 || w == 0) {
      return {stages.empty() ? input.channels : stages.back().out_channels, 0, 0};
    }
  }
  return {stages.empty() ? input.channels : stages.back().out_channels, h, w};
}

void CodecConfig::validate() const {
  if (input.numel() == 0) {
    throw ConfigError("codec input shape must be positive, got " + describe(input));
  }
  if (stages.empty()) {
    throw ConfigError("codec needs at least one encoder stage");
  }
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const StageSpec& s = stages[i];
    if (s.out_channels == 0 || s.kernel == 0 || s.stride == 0) {
      throw ConfigError("codec stage " + std::to_string(i) +
                        " needs positive out_channels, kernel and stride");
    }
  }

  std::vector<std::pair<std::size_t, std::size_t>> extents{{input.height, input.width}};
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const auto [h, w] = extents.back();
    const std::size_t oh = tensor::conv2d_output_extent(h, stages[i].kernel, geometry_of(stages[i]));
    const std::size_t ow = tensor::conv2d_output_extent(w, stages[i].kernel, geometry_of(stages[i]));
    if (oh == 0 || ow == 0) {
      throw ConfigError("codec stage " + std::to_string(i) + " has non-positive output extent for " +
                        std::to_string(h) + "x" + std::to_string(w) + " input");
    }
    extents.emplace_back(oh, ow);
  }
  const ItemShape derived{stages.back().out_channels, extents.back().first, extents.back().second};
  if (derived != features) {
    throw ConfigError("codec stages map " + describe(input) + " to " + describe(derived) +
                      ", but the configured feature shape is " + describe(features));
  }

  // The mirrored decoder must land back on each encoder extent.
  for (std::size_t i = stages.size(); i-- > 0;) {
    const auto [h, w] = extents[i + 1];
    const std::size_t uh = tensor::conv_transpose2d_output_extent(h, stages[i].kernel, geometry_of(stages[i]));
    const std::size_t uw = tensor::conv_transpose2d_output_extent(w, stages[i].kernel, geometry_of(stages[i]));
    if (uh != extents[i].first || uw != extents[i].second) {
      throw ConfigError("decoder stage mirroring encoder stage " + std::to_string(i) + " yields " +
                        std::to_string(uh) + "x" + std::to_string(uw) + " instead of " +
                        std::to_string(extents[i].first) + "x" + std::to_string(extents[i].second));
    }
  }
}

std::vector<std::pair<std::string, Shape>> parameter_layout(const CodecConfig& config) {
  const std::vector<std::size_t> chain = channel_chain(config);
  const std::size_t count = config.stages.size();
  std::vector<std::pair<std::string, Shape>> layout;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t k = config.stages[i].kernel;
    const std::string prefix = "encoder." + std::to_string(i);
    layout.emplace_back(prefix + ".weight", Shape{chain[i + 1], chain[i], k, k});
    layout.emplace_back(prefix + ".bias", Shape{1, chain[i + 1], 1, 1});
  }
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t mirrored = count - 1 - i;
    const std::size_t k = config.stages[mirrored].kernel;
    const std::string prefix = "decoder." + std::to_string(i);
    layout.emplace_back(prefix + ".weight", Shape{chain[mirrored + 1], chain[mirrored], k, k});
    layout.emplace_back(prefix + ".bias", Shape{1, chain[mirrored], 1, 1});
  }
  return layout;
}

CodecModel build_codec(const CodecConfig& config, std::uint64_t seed) {
  config.validate();
  RngStream rng(seed);
  std::vector<Parameter> params;
  const auto layout = parameter_layout(config);
  // Weight/bias pairs share the fan-in bound of their layer. For a transposed
  // conv the layer input channel count is the weight's leading dimension.
  for (std::size_t i = 0; i < layout.size(); i += 2) {
    const Shape& ws = layout[i].second;
    const bool transposed = layout[i].first.starts_with("decoder");
    const std::size_t fan_in = (transposed ? ws.n : ws.c) * ws.h * ws.w;
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    for (std::size_t j = i; j < i + 2; ++j) {
      Tensor value(layout[j].second);
      for (float& v : value.data()) {
        v = static_cast<float>(rng.uniform(-bound, bound));
      }
      params.emplace_back(layout[j].first, std::move(value));
    }
  }
  return CodecModel(config, std::move(params));
}

CodecModel::CodecModel(CodecConfig config, std::vector<Parameter> parameters)
    : config_(std::move(config)), parameters_(std::move(parameters)) {
  config_.validate();
  const auto layout = parameter_layout(config_);
  if (layout.size() != parameters_.size()) {
    throw ConfigError("codec expects " + std::to_string(layout.size()) + " parameter tensors, got " +
                      std::to_string(parameters_.size()));
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (layout[i].first != parameters_[i].name || layout[i].second != parameters_[i].value.shape()) {
      throw ConfigError("codec parameter " + std::to_string(i) + " is '" + parameters_[i].name + "' " +
                        parameters_[i].value.shape().to_string() + ", expected '" + layout[i].first +
                        "' " + layout[i].second.to_string());
    }
  }
}

std::size_t CodecModel::parameter_count() const {
  std::size_t total = 0;
  for (const Parameter& p : parameters_) {
    total += p.value.numel();
  }
  return total;
}

void CodecModel::require_input(const Shape& shape) const {
  const ItemShape& in = config_.input;
  if (shape.c != in.channels || shape.h != in.height || shape.w != in.width) {
    throw ShapeError("encode: expected [N, " + describe(in) + "] input, got " + shape.to_string());
  }
}

void CodecModel::require_features(const Shape& shape) const {
  const ItemShape& f = config_.features;
  if (shape.c != f.channels || shape.h != f.height || shape.w != f.width) {
    throw ShapeError("decode: expected [N, " + describe(f) + "] features, got " + shape.to_string());
  }
}

Tensor CodecModel::encode(const Tensor& x_in) const {
  require_input(x_in.shape());
  const std::size_t count = config_.stages.size();
  Tensor x = x_in;
  for (std::size_t i = 0; i < count; ++i) {
    x = tensor::conv2d(x, parameters_[2 * i].value, parameters_[2 * i + 1].value,
                       geometry_of(config_.stages[i]));
    if (i + 1 < count) {
      x = tensor::activate(x, config_.hidden);
    }
  }
  return x;
}

Tensor CodecModel::decode(const Tensor& y) const {
  require_features(y.shape());
  const std::size_t count = config_.stages.size();
  Tensor x = y;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t p = 2 * (count + i);
    x = tensor::conv_transpose2d(x, parameters_[p].value, parameters_[p + 1].value,
                                 geometry_of(config_.stages[count - 1 - i]));
    x = tensor::activate(x, i + 1 < count ? config_.hidden : config_.output);
  }
  return x;
}

Value CodecModel::encode(Tape& tape, Value x_in) {
  require_input(tape.value(x_in).shape());
  const std::size_t count = config_.stages.size();
  Value x = x_in;
  for (std::size_t i = 0; i < count; ++i) {
    x = tape.conv2d(x, tape.parameter(parameters_[2 * i]), tape.parameter(parameters_[2 * i + 1]),
                    geometry_of(config_.stages[i]));
    if (i + 1 < count) {
      x = tape.activation(x, config_.hidden);
    }
  }
  return x;
}

Value CodecModel::decode(Tape& tape, Value y) {
  require_features(tape.value(y).shape());
  const std::size_t count = config_.stages.size();
  Value x = y;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t p = 2 * (count + i);
    x = tape.conv_transpose2d(x, tape.parameter(parameters_[p]), tape.parameter(parameters_[p + 1]),
                              geometry_of(config_.stages[count - 1 - i]));
    x = tape.activation(x, i + 1 < count ? config_.hidden : config_.output);
  }
  return x;
}

namespace {

// Per-item scale sqrt(K / sum(x^2)) and the item's sum of squares.
std::vector<std::pair<double, double>> item_scales(const Tensor& x) {
  const std::size_t k = x.shape().item_size();
  std::vector<std::pair<double, double>> scales;
  for (std::size_t n = 0; n < x.shape().n; ++n) {
    double sum_sq = 0.0;
    for (float v : x.item(n)) {
      sum_sq += static_cast<double>(v) * v;
    }
    if (!(sum_sq > 0.0)) {
      throw DegenerateSignalError("power_normalize: batch item " + std::to_string(n) +
                                  " has zero power");
    }
    scales.emplace_back(std::sqrt(static_cast<double>(k) / sum_sq), sum_sq);
  }
  return scales;
}

}  // namespace

Tensor power_normalize(const Tensor& x) {
  const auto scales = item_scales(x);
  Tensor out(x.shape());
  for (std::size_t n = 0; n < x.shape().n; ++n) {
    const auto src = x.item(n);
    auto dst = out.item(n);
    for (std::size_t i = 0; i < src.size(); ++i) {
      dst[i] = static_cast<float>(src[i] * scales[n].first);
    }
  }
  return out;
}

Value power_normalize(Tape& tape, Value x) {
  Tensor out = power_normalize(tape.value(x));
  return tape.record("power_normalize", {x}, std::move(out),
                     [](const Tape::BackwardContext& ctx) -> std::vector<std::optional<Tensor>> {
                       // d(x s)/dx = s g - s (g . x) / sum(x^2) x
                       const Tensor& in = *ctx.inputs[0];
                       const auto scales = item_scales(in);
                       Tensor grad(in.shape());
                       for (std::size_t n = 0; n < in.shape().n; ++n) {
                         const auto xs = in.item(n);
                         const auto gs = ctx.grad_output.item(n);
                         auto dst = grad.item(n);
                         double dot = 0.0;
                         for (std::size_t i = 0; i < xs.size(); ++i) {
                           dot += static_cast<double>(gs[i]) * xs[i];
                         }
                         const auto [scale, sum_sq] = scales[n];
                         const double coeff = scale * dot / sum_sq;
                         for (std::size_t i = 0; i < xs.size(); ++i) {
                           dst[i] = static_cast<float>(scale * gs[i] - coeff * xs[i]);
                         }
                       }
                       return {std::move(grad)};
                     });
}

}  // namespace semcom::codec
