#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "semcom/tensor.hpp"

// Binary netpbm (P5 gray, P6 RGB) with 8-bit samples.
namespace semcom::io {

struct Raster {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;  // 1 for P5, 3 for P6
  std::uint32_t max_value = 255;
  std::vector<std::uint8_t> samples;  // row-major, channel-interleaved
};

/// Throws MalformedFileError naming `source` on any header or payload defect.
Raster parse_netpbm(std::span<const std::uint8_t> bytes, const std::string& source);
std::vector<std::uint8_t> encode_netpbm(const Raster& raster);

Raster read_netpbm(const std::filesystem::path& path);
void write_netpbm(const std::filesystem::path& path, const Raster& raster);

/// [1, channels, H, W] tensor with samples scaled by 1 / max_value.
tensor::Tensor raster_to_tensor(const Raster& raster);
/// Batch item `item` of an [N, 1 or 3, H, W] tensor, clamped to [0, 1] and
/// rounded to 8 bits.
Raster tensor_to_raster(const tensor::Tensor& image, std::size_t item = 0);

}  // namespace semcom::io
