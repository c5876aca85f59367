#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semcom/channel.hpp"
#include "semcom/codec.hpp"

namespace semcom::harness {

enum class Pipeline { original, masked };

std::string_view pipeline_name(Pipeline pipeline);
Pipeline parse_pipeline(std::string_view name);

struct TrainingConfig {
  std::size_t epochs = 200;
  double learning_rate = 1e-3;
  std::size_t batch_size = 1;
  std::uint64_t seed = 1;

  friend bool operator==(const TrainingConfig&, const TrainingConfig&) = default;
};

/// Everything that determines a training/evaluation run.
struct ExperimentConfig {
  std::string dataset_dir;
  std::string mask_dir;  // directory of <image id>.json manifests
  std::string stub_masks = "center_box:0.5";  // used when mask_dir is empty
  std::size_t image_size = 64;
  TrainingConfig training;
  std::vector<channel::ChannelKind> channels{channel::ChannelKind::awgn, channel::ChannelKind::rayleigh};
  std::vector<double> snr_db;  // defaults to 1..20
  std::string train_channel = "none";  // or a ChannelSpec string such as awgn:10
  bool equalize = true;
  Pipeline pipeline = Pipeline::original;

  ExperimentConfig();

  /// Small CI-scale profile: 64x64 inputs, 200 epochs.
  static ExperimentConfig desk_profile();
  /// Full-scale profile: 3x512x512 inputs, 1500 epochs, lr 0.001, SNR 1..20.
  static ExperimentConfig full_profile();

  [[nodiscard]] codec::CodecConfig codec() const {
    return codec::CodecConfig::for_square_input(image_size);
  }
  [[nodiscard]] std::optional<channel::ChannelSpec> train_channel_spec() const;

  /// Throws ConfigError on invalid values; returns human-readable warnings
  /// (SNR outside [-10, 40] dB).
  std::vector<std::string> validate() const;

  /// Canonical JSON (sorted keys, fixed formatting).
  [[nodiscard]] std::string to_json() const;
  /// Missing keys keep their defaults; unknown keys are rejected.
  static ExperimentConfig from_json(std::string_view text);
  /// FNV-1a 64 of to_json(), as 16 hex digits.
  [[nodiscard]] std::string digest() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// 1, 2, ..., 20.
std::vector<double> default_snr_grid();
/// Accepts "a..b" (integer steps) or a comma list. Throws ConfigError.
std::vector<double> parse_snr_list(std::string_view text);

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);
std::string hex64(std::uint64_t value);

}  // namespace semcom::harness
