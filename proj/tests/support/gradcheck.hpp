#pragma once

// Central finite-difference gradient checks. The analytic side runs the
// library Tape in float32; the numeric side evaluates a double-precision
// reference loss built from tests/support/reference_ops.hpp.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "reference_ops.hpp"
#include "semcom/codec.hpp"
#include "semcom/kernels.hpp"
#include "semcom/rng.hpp"
#include "semcom/tape.hpp"

namespace semcom::testing {

struct GradCase {
  std::string name;
  std::vector<tensor::Tensor> inputs;
  std::function<tensor::Value(tensor::Tape&, std::span<const tensor::Value>)> taped_loss;
  std::function<double(std::span<const RefTensor>)> reference_loss;
};

struct GradReport {
  std::string name;
  std::size_t checked = 0;
  double max_relative_error = 0.0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// |a - n| / max(|a|, |n|), taken as 0 when both are exactly 0.
inline double relative_error(double analytic, double numeric) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  return scale == 0.0 ? 0.0 : std::abs(analytic - numeric) / scale;
}

inline GradReport run_gradcheck(const GradCase& gc, std::size_t samples, std::uint64_t seed, double h = 1e-3) {
  std::vector<tensor::Parameter> params;
  for (std::size_t i = 0; i < gc.inputs.size(); ++i) {
    params.emplace_back("input" + std::to_string(i), gc.inputs[i]);
  }
  tensor::Tape tape;
  std::vector<tensor::Value> values;
  for (auto& p : params) values.push_back(tape.parameter(p));
  tape.backward(gc.taped_loss(tape, values));

  std::vector<RefTensor> ref;
  for (const auto& t : gc.inputs) ref.emplace_back(t);

  // Spread the samples evenly over inputs; small inputs are checked exhaustively.
  RngStream rng(seed);
  GradReport report{gc.name};
  const std::size_t per_input = (samples + gc.inputs.size() - 1) / gc.inputs.size();
  for (std::size_t i = 0; i < gc.inputs.size(); ++i) {
    const std::size_t numel = gc.inputs[i].numel();
    std::vector<std::size_t> coords;
    if (numel <= per_input) {
      for (std::size_t j = 0; j < numel; ++j) coords.push_back(j);
    } else {
      for (std::size_t j = 0; j < per_input; ++j) coords.push_back(rng.below(numel));
    }
    for (std::size_t j : coords) {
      const double original = ref[i].v[j];
      ref[i].v[j] = original + h;
      const double plus = gc.reference_loss(ref);
      ref[i].v[j] = original - h;
      const double minus = gc.reference_loss(ref);
      ref[i].v[j] = original;
      const double numeric = (plus - minus) / (2.0 * h);
      const double analytic = params[i].grad[j];
      const double err = relative_error(analytic, numeric);
      if (err > report.max_relative_error) {
        report.max_relative_error = err;
        report.worst_analytic = analytic;
        report.worst_numeric = numeric;
      }
      ++report.checked;
    }
  }
  return report;
}

// Values in [-1, 1] kept at least `margin` away from zero, for kinked maps.
inline tensor::Tensor away_from_zero(tensor::Shape shape, std::uint64_t seed, double margin) {
  RngStream rng(seed);
  tensor::Tensor t(shape);
  for (float& v : t.data()) {
    double x = 0.0;
    do {
      x = rng.uniform(-1.0, 1.0);
    } while (std::abs(x) < margin);
    v = static_cast<float>(x);
  }
  return t;
}

inline tensor::Tensor uniform_tensor(tensor::Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  RngStream rng(seed);
  tensor::Tensor t(shape);
  for (float& v : t.data()) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

// Magnitudes in [0.5, 1.5]; random signs unless `positive`.
inline tensor::Tensor offsets(tensor::Shape shape, std::uint64_t seed, bool positive) {
  RngStream rng(seed);
  tensor::Tensor t(shape);
  for (float& v : t.data()) {
    const double m = rng.uniform(0.5, 1.5);
    v = static_cast<float>(positive || rng.uniform() < 0.5 ? m : -m);
  }
  return t;
}

// MSE head whose target sits at out0 - r, so the upstream gradient at the
// base point is 2r/N. With r bounded away from zero (and, for the convs,
// positive data) every checked component is a sum of same-sign terms, and
// the componentwise relative error measures the backward pass rather than
// float32 rounding of a near-zero difference.
inline tensor::Tensor shifted_target(const tensor::Tensor& out0, const tensor::Tensor& r) {
  tensor::Tensor target = out0;
  for (std::size_t i = 0; i < target.numel(); ++i) target[i] -= r[i];
  return target;
}

// One case per differentiable layer type.
inline std::vector<GradCase> layer_grad_cases(std::uint64_t seed) {
  using tensor::Shape;
  using tensor::Tape;
  using tensor::Tensor;
  using tensor::Value;
  std::vector<GradCase> cases;

  {
    const tensor::ConvGeometry g{2, 1};
    std::vector<Tensor> in{uniform_tensor({2, 3, 6, 6}, seed + 2, 0.1, 1.0),
                           uniform_tensor({4, 3, 3, 3}, seed + 3, 0.1, 1.0), uniform_tensor({1, 4, 1, 1}, seed + 4)};
    const Tensor out0 = tensor::conv2d(in[0], in[1], in[2], g);
    const Tensor target = shifted_target(out0, offsets(out0.shape(), seed + 1, true));
    cases.push_back({"conv2d", in,
                     [=](Tape& t, std::span<const Value> v) {
                       return t.mse_loss(t.conv2d(v[0], v[1], v[2], g), t.constant(target));
                     },
                     [=, ref_target = RefTensor(target)](std::span<const RefTensor> r) {
                       return ref_mse(ref_conv2d(r[0], r[1], r[2], 2, 1), ref_target);
                     }});
  }
  {
    const tensor::ConvGeometry g{2, 1};
    std::vector<Tensor> in{uniform_tensor({2, 3, 5, 5}, seed + 6, 0.1, 1.0),
                           uniform_tensor({3, 2, 4, 4}, seed + 7, 0.1, 1.0), uniform_tensor({1, 2, 1, 1}, seed + 8)};
    const Tensor out0 = tensor::conv_transpose2d(in[0], in[1], in[2], g);
    const Tensor target = shifted_target(out0, offsets(out0.shape(), seed + 5, true));
    cases.push_back({"conv_transpose2d", in,
                     [=](Tape& t, std::span<const Value> v) {
                       return t.mse_loss(t.conv_transpose2d(v[0], v[1], v[2], g), t.constant(target));
                     },
                     [=, ref_target = RefTensor(target)](std::span<const RefTensor> r) {
                       return ref_mse(ref_conv_transpose2d(r[0], r[1], r[2], 2, 1), ref_target);
                     }});
  }
  const Shape act_shape{2, 3, 8, 8};
  const struct {
    const char* name;
    tensor::Activation lib;
    RefActivation ref;
  } activations[] = {{"relu", tensor::Activation::relu(), RefActivation::relu},
                     {"leaky_relu", tensor::Activation::leaky_relu(0.2f), RefActivation::leaky_relu},
                     {"sigmoid", tensor::Activation::sigmoid(), RefActivation::sigmoid}};
  for (const auto& a : activations) {
    const Tensor x = away_from_zero(act_shape, seed + 10, 0.01);
    const Tensor target = shifted_target(tensor::activate(x, a.lib), offsets(act_shape, seed + 9, false));
    cases.push_back({a.name,
                     {x},
                     [=, lib = a.lib](Tape& t, std::span<const Value> v) {
                       return t.mse_loss(t.activation(v[0], lib), t.constant(target));
                     },
                     [=, kind = a.ref, slope = static_cast<double>(a.lib.slope),
                      ref_target = RefTensor(target)](std::span<const RefTensor> r) {
                       return ref_mse(ref_activation(r[0], kind, slope), ref_target);
                     }});
  }
  cases.push_back({"mse_loss",
                   {uniform_tensor({2, 3, 6, 6}, seed + 11), uniform_tensor({2, 3, 6, 6}, seed + 12)},
                   [](Tape& t, std::span<const Value> v) { return t.mse_loss(v[0], v[1]); },
                   [](std::span<const RefTensor> r) { return ref_mse(r[0], r[1]); }});
  {
    // The gradient is orthogonal to x, so it must change sign; positive x
    // with signed offsets keeps its components clustered near +-r.
    const Tensor x = uniform_tensor({2, 4, 6, 6}, seed + 14, 0.5, 1.0);
    const Tensor target = shifted_target(codec::power_normalize(x), offsets(x.shape(), seed + 13, false));
    cases.push_back({"power_normalize",
                     {x},
                     [=](Tape& t, std::span<const Value> v) {
                       return t.mse_loss(codec::power_normalize(t, v[0]), t.constant(target));
                     },
                     [=, ref_target = RefTensor(target)](std::span<const RefTensor> r) {
                       return ref_mse(ref_power_normalize(r[0]), ref_target);
                     }});
  }
  return cases;
}

}  // namespace semcom::testing
