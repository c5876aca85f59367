#include "semcom/metrics.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "semcom/errors.hpp"

namespace semcom::metrics {

namespace {

PsnrResult from_mse(double mse, double max_val) {
  if (!(max_val > 0.0)) {
    throw ConfigError("psnr max_val must be positive");
  }
  PsnrResult r;
  r.mse = mse;
  r.max_val = max_val;
  r.value_db = mse == 0.0 ? std::numeric_limits<double>::infinity()
                          : 10.0 * std::log10(max_val * max_val / mse);
  return r;
}

}  // namespace

bool PsnrResult::is_infinite() const { return std::isinf(value_db) && value_db > 0.0; }

PsnrResult psnr(const Tensor& a, const Tensor& b, double max_val) {
  return from_mse(tensor::mse(a, b), max_val);
}

PsnrResult psnr_masked(const Tensor& a, const Tensor& b, const segmentation::Mask& mask, double max_val) {
  tensor::require_same_shape(a.shape(), b.shape(), "psnr_masked");
  const tensor::Shape& s = a.shape();
  if (s.n != 1 || s.h != mask.height() || s.w != mask.width()) {
    throw ShapeError("psnr_masked: mask is " + std::to_string(mask.height()) + "x" +
                     std::to_string(mask.width()) + " but images are " + s.to_string());
  }
  const std::size_t roi = mask.count();
  if (roi == 0) {
    throw DegenerateMaskError("psnr_masked: mask has no ROI pixels");
  }
  double acc = 0.0;
  for (std::size_t c = 0; c < s.c; ++c) {
    for (std::size_t y = 0; y < s.h; ++y) {
      for (std::size_t x = 0; x < s.w; ++x) {
        if (mask.at(y, x)) {
          const double d = static_cast<double>(a(0, c, y, x)) - static_cast<double>(b(0, c, y, x));
          acc += d * d;
        }
      }
    }
  }
  return from_mse(acc / static_cast<double>(roi * s.c), max_val);
}

Rational compression_ratio(const codec::ItemShape& input, const codec::ItemShape& output) {
  const std::uint64_t num = static_cast<std::uint64_t>(output.channels) * output.height * output.width;
  const std::uint64_t den = static_cast<std::uint64_t>(input.channels) * input.height * input.width;
  if (num == 0 || den == 0) {
    throw ConfigError("compression_ratio needs positive dimensions");
  }
  const std::uint64_t g = std::gcd(num, den);
  return Rational{num / g, den / g};
}

}  // namespace semcom::metrics
