#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "semcom/netpbm.hpp"
#include "semcom/segmentation.hpp"
#include "semcom/tensor.hpp"

namespace semcom::harness {

using tensor::Tensor;

struct DatasetImage {
  std::string id;  // file stem
  std::filesystem::path path;
  std::size_t source_height = 0;
  std::size_t source_width = 0;
  Tensor image;  // [1, 3, size, size] in [0, 1]
};

/// Reads every *.ppm (P6) file in `dir`, sorted by file name, center-cropped
/// to a square and resized to `target_size` by nearest neighbour. Throws
/// MalformedFileError naming the offending file, or DatasetError when the
/// directory holds no PPM files.
std::vector<DatasetImage> load_dataset(const std::filesystem::path& dir, std::size_t target_size);
DatasetImage load_image(const std::filesystem::path& path, std::size_t target_size);

/// Center square crop followed by nearest-neighbour resize to size x size.
Tensor crop_resize(const Tensor& image, std::size_t size);
segmentation::Mask crop_resize(const segmentation::Mask& mask, std::size_t size);

/// Where the masked pipeline gets its masks.
struct MaskSource {
  enum class Kind { none, manifests, stub };
  Kind kind = Kind::none;
  std::filesystem::path manifest_dir;  // holds <image id>.json
  segmentation::StubSpec stub;

  static MaskSource none() { return {}; }
  static MaskSource from_manifests(std::filesystem::path dir) { return {Kind::manifests, std::move(dir), {}}; }
  static MaskSource from_stub(segmentation::StubSpec spec) { return {Kind::stub, {}, spec}; }
};

/// Composite (union) mask per image, already cropped/resized like the image.
/// Every image is checked before anything is returned; the IngestionError
/// lists all images whose masks are missing or do not match.
std::vector<segmentation::Mask> resolve_masks(const std::vector<DatasetImage>& images,
                                              const MaskSource& source);
segmentation::Mask resolve_mask(const DatasetImage& image, const MaskSource& source);

/// Deterministic RGB test scene: smooth background with a few bright
/// foreground shapes clustered near the centre.
io::Raster synthetic_scene(std::uint64_t seed, std::size_t size);
/// Writes scene_000.ppm ... into `dir` and returns the paths.
std::vector<std::filesystem::path> write_synthetic_dataset(const std::filesystem::path& dir, std::size_t count,
                                                           std::size_t size, std::uint64_t seed);

}  // namespace semcom::harness
