#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "semcom/codec.hpp"

namespace semcom::codec {

// Little-endian layout:
//   "SCJC" | u32 version | config block | u64 scalar count | u32 record count |
//   records { u32 name_len | name | u32 rank | u32 dims[rank] | f32 values[] }
// Config block:
//   u32 C_in H_in W_in | u32 C_o H_o W_o | u32 stage_count |
//   stage_count x (u32 out_channels kernel stride padding) |
//   u32 hidden_kind | f32 hidden_slope | u32 output_kind | f32 output_slope
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize_checkpoint(const CodecModel& model);
/// Throws CheckpointFormatError on bad magic, unknown version, truncation or
/// records that disagree with the header config.
CodecModel deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const CodecModel& model, const std::filesystem::path& path);
CodecModel load_checkpoint(const std::filesystem::path& path);

/// Scalar parameter count declared in a serialized header.
std::uint64_t checkpoint_declared_parameter_count(std::span<const std::uint8_t> bytes);

}  // namespace semcom::codec
