#include "semcom/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "semcom/errors.hpp"

namespace semcom::tensor {

std::string Shape::to_string() const {
  std::ostringstream out;
  out << '[' << n << ", " << c << ", " << h << ", " << w << ']';
  return out.str();
}

namespace {

void require_positive(const Shape& shape) {
  if (shape.n == 0 || shape.c == 0 || shape.h == 0 || shape.w == 0) {
    throw ShapeError("tensor shape must be positive in every dimension, got " + shape.to_string());
  }
}

}  // namespace

Tensor::Tensor() : data_(1, 0.0f) {}

Tensor::Tensor(Shape shape, float fill) : shape_(shape) {
  require_positive(shape_);
  data_.assign(shape_.numel(), fill);
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(shape), data_(std::move(data)) {
  require_positive(shape_);
  if (data_.size() != shape_.numel()) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_.to_string());
  }
}

Tensor::Tensor(Tensor&& other) noexcept
    : shape_(std::exchange(other.shape_, Shape{})), data_(std::exchange(other.data_, {0.0f})) {}

Tensor& Tensor::operator=(Tensor&& other) noexcept {
  if (this != &other) {
    shape_ = std::exchange(other.shape_, Shape{});
    data_ = std::exchange(other.data_, {0.0f});
  }
  return *this;
}

std::span<float> Tensor::item(std::size_t n) {
  return std::span<float>(data_).subspan(n * shape_.item_size(), shape_.item_size());
}

std::span<const float> Tensor::item(std::size_t n) const {
  return std::span<const float>(data_).subspan(n * shape_.item_size(), shape_.item_size());
}

float Tensor::item_value() const {
  if (data_.size() != 1) {
    throw ShapeError("item_value() needs a single-element tensor, got " + shape_.to_string());
  }
  return data_[0];
}

void Tensor::fill(float value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

Tensor Tensor::slice_batch(std::size_t first, std::size_t count) const {
  if (count == 0 || first + count > shape_.n) {
    throw ShapeError("batch slice [" + std::to_string(first) + ", " + std::to_string(first + count) +
                     ") out of range for " + shape_.to_string());
  }
  Shape out_shape = shape_;
  out_shape.n = count;
  const auto begin = data_.begin() + static_cast<std::ptrdiff_t>(first * shape_.item_size());
  return Tensor(out_shape, std::vector<float>(begin, begin + static_cast<std::ptrdiff_t>(out_shape.numel())));
}

Tensor concat_batch(std::span<const Tensor> parts) {
  if (parts.empty()) {
    throw ShapeError("concat_batch needs at least one tensor");
  }
  Shape shape = parts.front().shape();
  shape.n = 0;
  std::vector<float> data;
  for (const auto& part : parts) {
    const Shape& s = part.shape();
    if (s.c != shape.c || s.h != shape.h || s.w != shape.w) {
      throw ShapeError("concat_batch item shape mismatch: " + parts.front().shape().to_string() +
                       " vs " + s.to_string());
    }
    shape.n += s.n;
    data.insert(data.end(), part.data().begin(), part.data().end());
  }
  return Tensor(shape, std::move(data));
}

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (a != b) {
    throw ShapeError(std::string(what) + ": shape mismatch " + a.to_string() + " vs " + b.to_string());
  }
}

}  // namespace semcom::tensor
