#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace semcom::tensor {

/// Rank-4 extent in NCHW order. Every dimension is positive.
struct Shape {
  std::size_t n = 1;
  std::size_t c = 1;
  std::size_t h = 1;
  std::size_t w = 1;

  [[nodiscard]] constexpr std::size_t numel() const { return n * c * h * w; }
  /// Elements in one batch item.
  [[nodiscard]] constexpr std::size_t item_size() const { return c * h * w; }
  [[nodiscard]] constexpr std::size_t plane_size() const { return h * w; }
  [[nodiscard]] constexpr std::array<std::size_t, 4> dims() const { return {n, c, h, w}; }

  [[nodiscard]] std::string to_string() const;

  friend constexpr bool operator==(const Shape&, const Shape&) = default;
};

/// Dense row-major float32 array of shape [N, C, H, W].
///
/// A value type: copies are deep, and moved-from tensors are left with
/// shape 1x1x1x1 and a single zero.
class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape, float fill = 0.0f);
  /// Throws ShapeError when `data.size() != shape.numel()`.
  Tensor(Shape shape, std::vector<float> data);

  Tensor(const Tensor&) = default;
  Tensor& operator=(const Tensor&) = default;
  Tensor(Tensor&& other) noexcept;
  Tensor& operator=(Tensor&& other) noexcept;
  ~Tensor() = default;

  static Tensor scalar(float value) { return Tensor(Shape{}, value); }

  [[nodiscard]] const Shape& shape() const { return shape_; }
  [[nodiscard]] std::size_t numel() const { return data_.size(); }

  [[nodiscard]] std::span<float> data() { return data_; }
  [[nodiscard]] std::span<const float> data() const { return data_; }

  /// Contiguous view over batch item `n`.
  [[nodiscard]] std::span<float> item(std::size_t n);
  [[nodiscard]] std::span<const float> item(std::size_t n) const;

  [[nodiscard]] float& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
  }
  [[nodiscard]] float operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
  }

  [[nodiscard]] float& operator[](std::size_t i) { return data_[i]; }
  [[nodiscard]] float operator[](std::size_t i) const { return data_[i]; }

  /// Value of a 1x1x1x1 tensor. Throws ShapeError otherwise.
  [[nodiscard]] float item_value() const;

  void fill(float value);
  [[nodiscard]] bool all_finite() const;

  /// Copies batch items [first, first + count) into a new tensor.
  [[nodiscard]] Tensor slice_batch(std::size_t first, std::size_t count) const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<float> data_;
};

/// Stacks single- or multi-item tensors of identical item shape along N.
Tensor concat_batch(std::span<const Tensor> parts);

/// Throws ShapeError describing `what` when the shapes differ.
void require_same_shape(const Shape& a, const Shape& b, const char* what);

}  // namespace semcom::tensor
