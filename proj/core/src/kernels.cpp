#include "semcom/kernels.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "semcom/errors.hpp"

namespace semcom::tensor {

namespace {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

using Index = Eigen::Index;

// Patch geometry shared by im2col/col2im: an image of `channels` planes of
// height x width, sampled by a K x K window into out_h x out_w positions.
struct Patches {
  std::size_t channels;
  std::size_t height;
  std::size_t width;
  std::size_t kernel;
  std::size_t out_h;
  std::size_t out_w;
  ConvGeometry geometry;

  [[nodiscard]] std::size_t rows() const { return channels * kernel * kernel; }
  [[nodiscard]] std::size_t cols() const { return out_h * out_w; }
};

void im2col(const float* image, const Patches& p, float* col) {
  const auto stride = static_cast<std::ptrdiff_t>(p.geometry.stride);
  const auto pad = static_cast<std::ptrdiff_t>(p.geometry.padding);
  const auto height = static_cast<std::ptrdiff_t>(p.height);
  const auto width = static_cast<std::ptrdiff_t>(p.width);
  for (std::size_t c = 0; c < p.channels; ++c) {
    const float* plane = image + c * p.height * p.width;
    for (std::size_t kh = 0; kh < p.kernel; ++kh) {
      for (std::size_t kw = 0; kw < p.kernel; ++kw) {
        float* row = col + ((c * p.kernel + kh) * p.kernel + kw) * p.cols();
        for (std::size_t oh = 0; oh < p.out_h; ++oh) {
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh) * stride - pad + static_cast<std::ptrdiff_t>(kh);
          float* dst = row + oh * p.out_w;
          if (ih < 0 || ih >= height) {
            std::fill(dst, dst + p.out_w, 0.0f);
            continue;
          }
          const float* src = plane + ih * width;
          for (std::size_t ow = 0; ow < p.out_w; ++ow) {
            const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow) * stride - pad + static_cast<std::ptrdiff_t>(kw);
            dst[ow] = (iw < 0 || iw >= width) ? 0.0f : src[iw];
          }
        }
      }
    }
  }
}

// Adds columns back into the image; `image` must be zero-initialised by the caller.
void col2im(const float* col, const Patches& p, float* image) {
  const auto stride = static_cast<std::ptrdiff_t>(p.geometry.stride);
  const auto pad = static_cast<std::ptrdiff_t>(p.geometry.padding);
  const auto height = static_cast<std::ptrdiff_t>(p.height);
  const auto width = static_cast<std::ptrdiff_t>(p.width);
  for (std::size_t c = 0; c < p.channels; ++c) {
    float* plane = image + c * p.height * p.width;
    for (std::size_t kh = 0; kh < p.kernel; ++kh) {
      for (std::size_t kw = 0; kw < p.kernel; ++kw) {
        const float* row = col + ((c * p.kernel + kh) * p.kernel + kw) * p.cols();
        for (std::size_t oh = 0; oh < p.out_h; ++oh) {
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh) * stride - pad + static_cast<std::ptrdiff_t>(kh);
          if (ih < 0 || ih >= height) {
            continue;
          }
          const float* src = row + oh * p.out_w;
          float* dst = plane + ih * width;
          for (std::size_t ow = 0; ow < p.out_w; ++ow) {
            const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow) * stride - pad + static_cast<std::ptrdiff_t>(kw);
            if (iw >= 0 && iw < width) {
              dst[iw] += src[ow];
            }
          }
        }
      }
    }
  }
}

void require_geometry(const Shape& weight, ConvGeometry geometry, const char* op) {
  if (weight.h != weight.w) {
    throw ShapeError(std::string(op) + ": kernel must be square, got weight " + weight.to_string());
  }
  if (geometry.stride == 0) {
    throw ConfigError(std::string(op) + ": stride must be >= 1");
  }
}

void require_bias(const Shape& bias, std::size_t channels, const char* op) {
  if (bias != Shape{1, channels, 1, 1}) {
    throw ShapeError(std::string(op) + ": bias must be [1, " + std::to_string(channels) +
                     ", 1, 1], got " + bias.to_string());
  }
}

void add_bias(Tensor& out, const Tensor& bias) {
  const Shape& s = out.shape();
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      float* plane = out.data().data() + (n * s.c + c) * s.plane_size();
      const float b = bias[c];
      for (std::size_t i = 0; i < s.plane_size(); ++i) {
        plane[i] += b;
      }
    }
  }
}

Tensor bias_gradient(const Tensor& grad_output) {
  const Shape& s = grad_output.shape();
  Tensor grad(Shape{1, s.c, 1, 1});
  for (std::size_t c = 0; c < s.c; ++c) {
    double acc = 0.0;
    for (std::size_t n = 0; n < s.n; ++n) {
      const float* plane = grad_output.data().data() + (n * s.c + c) * s.plane_size();
      for (std::size_t i = 0; i < s.plane_size(); ++i) {
        acc += plane[i];
      }
    }
    grad[c] = static_cast<float>(acc);
  }
  return grad;
}

// Geometry of the conv2d whose input is [.., cin, h, w] and kernel is k.
Patches conv_patches(std::size_t cin, std::size_t h, std::size_t w, std::size_t k,
                     ConvGeometry geometry, const char* op) {
  const std::size_t out_h = conv2d_output_extent(h, k, geometry);
  const std::size_t out_w = conv2d_output_extent(w, k, geometry);
  if (out_h == 0 || out_w == 0) {
    throw ConfigError(std::string(op) + ": non-positive output extent for input " +
                      std::to_string(h) + "x" + std::to_string(w) + ", kernel " + std::to_string(k) +
                      ", stride " + std::to_string(geometry.stride) + ", padding " +
                      std::to_string(geometry.padding));
  }
  return Patches{cin, h, w, k, out_h, out_w, geometry};
}

// Transposed conv maps [.., cin, h, w] onto the image of a conv2d that would
// produce an h x w output; the patches describe that larger image.
Patches transpose_patches(std::size_t cout, std::size_t h, std::size_t w, std::size_t k,
                          ConvGeometry geometry, const char* op) {
  const std::size_t out_h = conv_transpose2d_output_extent(h, k, geometry);
  const std::size_t out_w = conv_transpose2d_output_extent(w, k, geometry);
  if (out_h == 0 || out_w == 0) {
    throw ConfigError(std::string(op) + ": non-positive output extent for input " +
                      std::to_string(h) + "x" + std::to_string(w));
  }
  return Patches{cout, out_h, out_w, k, h, w, geometry};
}

}  // namespace

std::size_t conv2d_output_extent(std::size_t extent, std::size_t kernel, ConvGeometry geometry) {
  if (geometry.stride == 0) {
    return 0;
  }
  const std::size_t padded = extent + 2 * geometry.padding;
  if (padded < kernel) {
    return 0;
  }
  return (padded - kernel) / geometry.stride + 1;
}

std::size_t conv_transpose2d_output_extent(std::size_t extent, std::size_t kernel,
                                           ConvGeometry geometry) {
  const auto full = static_cast<std::ptrdiff_t>((extent - 1) * geometry.stride + kernel);
  const auto out = full - 2 * static_cast<std::ptrdiff_t>(geometry.padding);
  return out < 1 ? 0 : static_cast<std::size_t>(out);
}

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, ConvGeometry geometry) {
  const Shape& in = input.shape();
  const Shape& ws = weight.shape();
  require_geometry(ws, geometry, "conv2d");
  if (in.c != ws.c) {
    throw ShapeError("conv2d: input has " + std::to_string(in.c) + " channels but weight " +
                     ws.to_string() + " expects " + std::to_string(ws.c));
  }
  require_bias(bias.shape(), ws.n, "conv2d");
  const Patches p = conv_patches(in.c, in.h, in.w, ws.h, geometry, "conv2d");

  Tensor out(Shape{in.n, ws.n, p.out_h, p.out_w});
  std::vector<float> col(p.rows() * p.cols());
  const ConstMatrixMap w(weight.data().data(), static_cast<Index>(ws.n), static_cast<Index>(p.rows()));
  for (std::size_t n = 0; n < in.n; ++n) {
    im2col(input.item(n).data(), p, col.data());
    const ConstMatrixMap cols(col.data(), static_cast<Index>(p.rows()), static_cast<Index>(p.cols()));
    MatrixMap dst(out.item(n).data(), static_cast<Index>(ws.n), static_cast<Index>(p.cols()));
    dst.noalias() = w * cols;
  }
  add_bias(out, bias);
  return out;
}

ConvGradients conv2d_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_output,
                              ConvGeometry geometry) {
  const Shape& in = input.shape();
  const Shape& ws = weight.shape();
  const Patches p = conv_patches(in.c, in.h, in.w, ws.h, geometry, "conv2d_backward");
  require_same_shape(grad_output.shape(), Shape{in.n, ws.n, p.out_h, p.out_w}, "conv2d_backward");

  ConvGradients grads{Tensor(in), Tensor(ws), bias_gradient(grad_output)};
  std::vector<float> col(p.rows() * p.cols());
  const ConstMatrixMap w(weight.data().data(), static_cast<Index>(ws.n), static_cast<Index>(p.rows()));
  MatrixMap dw(grads.weight.data().data(), static_cast<Index>(ws.n), static_cast<Index>(p.rows()));
  for (std::size_t n = 0; n < in.n; ++n) {
    const ConstMatrixMap dout(grad_output.item(n).data(), static_cast<Index>(ws.n),
                              static_cast<Index>(p.cols()));
    im2col(input.item(n).data(), p, col.data());
    const ConstMatrixMap cols(col.data(), static_cast<Index>(p.rows()), static_cast<Index>(p.cols()));
    dw.noalias() += dout * cols.transpose();

    MatrixMap dcol(col.data(), static_cast<Index>(p.rows()), static_cast<Index>(p.cols()));
    dcol.noalias() = w.transpose() * dout;
    col2im(col.data(), p, grads.input.item(n).data());
  }
  return grads;
}

Tensor conv_transpose2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
                        ConvGeometry geometry) {
  const Shape& in = input.shape();
  const Shape& ws = weight.shape();
  require_geometry(ws, geometry, "conv_transpose2d");
  if (in.c != ws.n) {
    throw ShapeError("conv_transpose2d: input has " + std::to_string(in.c) + " channels but weight " +
                     ws.to_string() + " expects " + std::to_string(ws.n));
  }
  require_bias(bias.shape(), ws.c, "conv_transpose2d");
  const Patches p = transpose_patches(ws.c, in.h, in.w, ws.h, geometry, "conv_transpose2d");

  Tensor out(Shape{in.n, ws.c, p.height, p.width});
  std::vector<float> col(p.rows() * p.cols());
  const ConstMatrixMap w(weight.data().data(), static_cast<Index>(ws.n), static_cast<Index>(p.rows()));
  for (std::size_t n = 0; n < in.n; ++n) {
    const ConstMatrixMap x(input.item(n).data(), static_cast<Index>(in.c), static_cast<Index>(p.cols()));
    MatrixMap cols(col.data(), static_cast<Index>(p.rows()), static_cast<Index>(p.cols()));
    cols.noalias() = w.transpose() * x;
    col2im(col.data(), p, out.item(n).data());
  }
  add_bias(out, bias);
  return out;
}

ConvGradients conv_transpose2d_backward(const Tensor& input, const Tensor& weight,
                                        const Tensor& grad_output, ConvGeometry geometry) {
  const Shape& in = input.shape();
  const Shape& ws = weight.shape();
  const Patches p = transpose_patches(ws.c, in.h, in.w, ws.h, geometry, "conv_transpose2d_backward");
  require_same_shape(grad_output.shape(), Shape{in.n, ws.c, p.height, p.width},
                     "conv_transpose2d_backward");

  ConvGradients grads{Tensor(in), Tensor(ws), bias_gradient(grad_output)};
  std::vector<float> col(p.rows() * p.cols());
  const ConstMatrixMap w(weight.data().data(), static_cast<Index>(ws.n), static_cast<Index>(p.rows()));
  MatrixMap dw(grads.weight.data().data(), static_cast<Index>(ws.n), static_cast<Index>(p.rows()));
  for (std::size_t n = 0; n < in.n; ++n) {
    im2col(grad_output.item(n).data(), p, col.data());
    const ConstMatrixMap dcol(col.data(), static_cast<Index>(p.rows()), static_cast<Index>(p.cols()));
    const ConstMatrixMap x(input.item(n).data(), static_cast<Index>(in.c), static_cast<Index>(p.cols()));
    MatrixMap dx(grads.input.item(n).data(), static_cast<Index>(in.c), static_cast<Index>(p.cols()));
    dx.noalias() = w * dcol;
    dw.noalias() += x * dcol.transpose();
  }
  return grads;
}

namespace {

constexpr float kSigmoidLow = std::numeric_limits<float>::min();
constexpr float kSigmoidHigh = 1.0f - std::numeric_limits<float>::epsilon() / 2.0f;

float sigmoid(float x) {
  const float s = x >= 0.0f ? 1.0f / (1.0f + std::exp(-x)) : std::exp(x) / (1.0f + std::exp(x));
  return std::clamp(s, kSigmoidLow, kSigmoidHigh);
}

}  // namespace

Tensor activate(const Tensor& input, Activation activation) {
  Tensor out(input.shape());
  const auto src = input.data();
  auto dst = out.data();
  switch (activation.kind) {
    case ActivationKind::relu:
      std::transform(src.begin(), src.end(), dst.begin(), [](float v) { return v > 0.0f ? v : 0.0f; });
      break;
    case ActivationKind::leaky_relu:
      std::transform(src.begin(), src.end(), dst.begin(),
                     [slope = activation.slope](float v) { return v > 0.0f ? v : slope * v; });
      break;
    case ActivationKind::sigmoid:
      std::transform(src.begin(), src.end(), dst.begin(), sigmoid);
      break;
  }
  return out;
}

Tensor activate_backward(const Tensor& input, const Tensor& output, const Tensor& grad_output,
                         Activation activation) {
  require_same_shape(input.shape(), grad_output.shape(), "activation backward");
  Tensor grad(input.shape());
  const auto x = input.data();
  const auto y = output.data();
  const auto g = grad_output.data();
  auto dx = grad.data();
  for (std::size_t i = 0; i < dx.size(); ++i) {
    switch (activation.kind) {
      case ActivationKind::relu:
        dx[i] = x[i] > 0.0f ? g[i] : 0.0f;
        break;
      case ActivationKind::leaky_relu:
        dx[i] = x[i] > 0.0f ? g[i] : activation.slope * g[i];
        break;
      case ActivationKind::sigmoid:
        dx[i] = g[i] * y[i] * (1.0f - y[i]);
        break;
    }
  }
  return grad;
}

double mse(const Tensor& pred, const Tensor& target) {
  require_same_shape(pred.shape(), target.shape(), "mse");
  const auto a = pred.data();
  const auto b = target.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

}  // namespace semcom::tensor
