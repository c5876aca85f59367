#include <doctest.h>

#include <cmath>

#include "random_tensor.hpp"
#include "semcom/errors.hpp"
#include "semcom/metrics.hpp"
#include "semcom/segmentation.hpp"

using namespace semcom;
using namespace semcom::metrics;
using segmentation::Mask;
using tensor::Shape;
using tensor::Tensor;

namespace {

// b = a + e with |e| constant, so the mse is exactly e^2 (up to float rounding of a + e).
Tensor offset(const Tensor& a, float e) {
  Tensor b = a;
  for (float& v : b.data()) v += e;
  return b;
}

}  // namespace

TEST_CASE("psnr examples") {
  const Tensor a = testing::random_tensor({1, 3, 8, 8}, 1, 0.2, 0.8);
  const PsnrResult same = psnr(a, a);
  CHECK(same.is_infinite());
  CHECK(same.value_db > 0);
  CHECK(same.mse == 0.0);

  const Tensor zero(Shape{1, 1, 10, 10});
  CHECK(psnr(zero, Tensor(Shape{1, 1, 10, 10}, 0.1f)).value_db == doctest::Approx(20.0).epsilon(1e-6));
  CHECK(psnr(zero, Tensor(Shape{1, 1, 10, 10}, std::sqrt(0.001f))).value_db ==
        doctest::Approx(30.0).epsilon(1e-6));
  // 8-bit scale: mse 255^2/100 -> 20 dB
  CHECK(psnr(zero, Tensor(Shape{1, 1, 10, 10}, 25.5f), 255.0).value_db == doctest::Approx(20.0).epsilon(1e-6));

  CHECK_THROWS_AS(psnr(zero, Tensor(Shape{1, 1, 10, 11})), ShapeError);
  CHECK_THROWS_AS(psnr(zero, zero, 0.0), ConfigError);
}

TEST_CASE("psnr symmetry and monotonicity") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor a = testing::random_tensor({2, 3, 6, 6}, seed, 0.0, 1.0);
    const Tensor b = testing::random_tensor({2, 3, 6, 6}, seed + 100, 0.0, 1.0);
    CHECK(psnr(a, b).value_db == psnr(b, a).value_db);
    double previous = psnr(a, b).value_db;
    for (double alpha : {1.5, 2.0, 4.0}) {
      Tensor scaled = a;
      for (std::size_t i = 0; i < a.numel(); ++i) scaled[i] = static_cast<float>(a[i] + alpha * (b[i] - a[i]));
      const double now = psnr(a, scaled).value_db;
      CHECK(now < previous);
      previous = now;
    }
  }
}

TEST_CASE("psnr_masked") {
  const Tensor a = testing::random_tensor({1, 3, 4, 4}, 3, 0.0, 1.0);
  const Tensor b = testing::random_tensor({1, 3, 4, 4}, 4, 0.0, 1.0);
  CHECK(psnr_masked(a, b, Mask(4, 4, 1)).value_db == psnr(a, b).value_db);

  // Half coverage: left two columns. Brute-force ROI mean over mask pixels.
  Mask half(4, 4);
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 2; ++x) half.set(y, x, true);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < 4; ++y)
      for (std::size_t x = 0; x < 2; ++x) {
        const double d = static_cast<double>(a(0, c, y, x)) - b(0, c, y, x);
        sum += d * d;
        ++n;
      }
  const PsnrResult roi = psnr_masked(a, b, half);
  CHECK(n == 24);
  CHECK(roi.mse == doctest::Approx(sum / n).epsilon(1e-12));
  CHECK(roi.value_db == doctest::Approx(10.0 * std::log10(1.0 / (sum / n))).epsilon(1e-12));

  // Equal on the ROI, arbitrary elsewhere.
  Tensor c = a;
  for (std::size_t ch = 0; ch < 3; ++ch)
    for (std::size_t y = 0; y < 4; ++y)
      for (std::size_t x = 2; x < 4; ++x) c(0, ch, y, x) = 0.123f;
  CHECK(psnr_masked(a, c, half).is_infinite());

  const Tensor shifted = offset(a, 0.1f);
  CHECK(psnr_masked(a, shifted, half).value_db == doctest::Approx(20.0).epsilon(1e-5));

  CHECK_THROWS_AS(psnr_masked(a, b, Mask(4, 4, 0)), DegenerateMaskError);
  CHECK_THROWS_AS(psnr_masked(a, b, Mask(4, 5, 1)), ShapeError);
}

TEST_CASE("compression ratio is an exact rational") {
  const Rational cr = compression_ratio({3, 512, 512}, {128, 32, 32});
  CHECK(cr.numerator == 1);
  CHECK(cr.denominator == 6);
  CHECK(cr.value() == doctest::Approx(1.0 / 6.0));
  CHECK(std::round((1.0 - cr.value()) * 1000.0) / 10.0 == 83.3);
  CHECK(compression_ratio({3, 64, 64}, {3, 64, 64}) == Rational{1, 1});
  CHECK(compression_ratio({3, 64, 64}, {128, 4, 4}) == Rational{1, 6});
  CHECK(compression_ratio({1, 10, 10}, {3, 10, 10}) == Rational{3, 1});
  CHECK(compression_ratio({3, 7, 5}, {2, 3, 3}) == Rational{6, 35});
}
