#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "semcom/tensor.hpp"

namespace semcom::segmentation {

using tensor::Tensor;

/// Binary H x W grid, 1 = region of interest.
class Mask {
 public:
  Mask(std::size_t height, std::size_t width, std::uint8_t fill = 0);
  /// `bits` must hold height * width entries; nonzero entries become 1.
  Mask(std::size_t height, std::size_t width, std::vector<std::uint8_t> bits);

  [[nodiscard]] std::size_t height() const { return height_; }
  [[nodiscard]] std::size_t width() const { return width_; }
  [[nodiscard]] std::size_t size() const { return bits_.size(); }

  [[nodiscard]] bool at(std::size_t y, std::size_t x) const { return bits_[y * width_ + x] != 0; }
  void set(std::size_t y, std::size_t x, bool on) { bits_[y * width_ + x] = on ? 1 : 0; }

  [[nodiscard]] const std::vector<std::uint8_t>& bits() const { return bits_; }
  [[nodiscard]] std::size_t count() const;
  [[nodiscard]] double coverage() const;

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  std::size_t height_;
  std::size_t width_;
  std::vector<std::uint8_t> bits_;
};

/// Masks produced for one image under one prompt. Nonempty, uniform size.
struct MaskSet {
  std::vector<Mask> masks;
  std::string image_id;
  std::string prompt;

  /// Throws IngestionError when empty or when the mask sizes disagree.
  void validate() const;
};

/// A source image with everything outside the mask union zeroed.
struct RoiImage {
  Tensor image;  // [1, C, H, W]
  double coverage = 0.0;
};

enum class MaskMode { composite, per_mask };

/// Reads a JSON manifest {image, width, height, prompt, masks: [paths]};
/// mask paths resolve against the manifest's directory. PGM samples above
/// 127 become ROI.
MaskSet load_mask_set(const std::filesystem::path& manifest_path);

/// Writes masks as `<stem>_<i>.pgm` (values 0/255) plus the manifest
/// `<stem>.json` into `dir`, where stem is the image id. Returns the
/// manifest path.
std::filesystem::path save_mask_set(const MaskSet& set, const std::filesystem::path& dir);

Mask mask_union(const MaskSet& set);

/// composite: one ROI image from the union; per_mask: one per mask.
std::vector<RoiImage> apply_masks(const Tensor& image, const MaskSet& set, MaskMode mode);
RoiImage apply_mask(const Tensor& image, const Mask& mask);

/// Deterministic stand-in for a promptable segmenter.
struct StubSpec {
  enum class Kind { center_box, luminance_threshold };
  Kind kind = Kind::center_box;
  double value = 0.5;  // area fraction, or luminance threshold

  /// "center_box:<fraction>" or "luminance:<threshold>".
  static StubSpec parse(std::string_view text);
  [[nodiscard]] std::string to_string() const;

  friend bool operator==(const StubSpec&, const StubSpec&) = default;
};

MaskSet stub_generate(const Tensor& image, const StubSpec& spec, std::string image_id = "image");

/// Centered rectangle covering `fraction` of the area, each side scaled by
/// sqrt(fraction) and rounded to whole pixels (at least one).
Mask center_box(std::size_t height, std::size_t width, double fraction);
/// Pixels whose channel mean strictly exceeds `threshold`.
Mask luminance_threshold(const Tensor& image, double threshold);

}  // namespace semcom::segmentation
