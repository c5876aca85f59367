#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semcom/channel.hpp"
#include "semcom/codec.hpp"
#include "semcom/dataset.hpp"
#include "semcom/experiment.hpp"
#include "semcom/segmentation.hpp"

namespace semcom::harness {

/// One codec input with the references it is scored against.
struct PreparedImage {
  std::string id;
  Tensor input;     // x_in: the image itself, or its ROI image
  Tensor original;  // the unmasked image
  std::optional<segmentation::Mask> roi;
};

/// original: x_in is the image. masked: x_in is the composite ROI image and
/// `masks` (one per image) must be given.
std::vector<PreparedImage> prepare_inputs(const std::vector<DatasetImage>& images, Pipeline pipeline,
                                          std::span<const segmentation::Mask> masks = {});

struct TrainOptions {
  std::size_t epochs = 200;
  std::size_t batch_size = 1;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
  std::optional<channel::ChannelSpec> train_channel;  // none: noiseless training
  std::function<void(std::size_t epoch, double loss)> on_epoch;  // epoch counts from 1
};

struct TrainResult {
  std::vector<double> epoch_loss;  // mean batch loss per epoch, before the updates
};

/// MSE training of encode -> power_normalize -> [channel] -> decode against
/// the inputs themselves. Batches are reshuffled every epoch from `seed`.
TrainResult train_codec(codec::CodecModel& model, std::span<const Tensor> inputs, const TrainOptions& options);

/// encode -> power_normalize -> channel -> decode for one [1, C, H, W] input.
Tensor transmit_image(const codec::CodecModel& model, const Tensor& input, const channel::ChannelSpec& spec,
                      RngStream& rng);

struct ImageScore {
  std::string id;
  double psnr_db = 0.0;
  std::optional<double> roi_psnr_db;
};

struct EvalStats {
  std::vector<ImageScore> images;
  double psnr_mean = 0.0;
  double psnr_std = 0.0;
  std::optional<double> roi_psnr_mean;
  std::optional<double> roi_psnr_std;
  std::size_t count = 0;
};

/// Stream seed for image `index` under base `seed`.
constexpr std::uint64_t image_stream_seed(std::uint64_t seed, std::size_t index) {
  return seed ^ static_cast<std::uint64_t>(index);
}

/// Full-frame PSNR of each reconstruction against its x_in, plus ROI PSNR
/// against the original image where a mask is present. Image i draws its
/// channel noise from image_stream_seed(spec.seed, i), so results do not
/// depend on `threads`.
EvalStats evaluate(const codec::CodecModel& model, std::span<const PreparedImage> images,
                   const channel::ChannelSpec& spec, std::size_t threads = 1);

/// Sample mean and (n - 1) standard deviation.
std::pair<double, double> mean_std(std::span<const double> values);

struct SweepRow {
  Pipeline pipeline = Pipeline::original;
  channel::ChannelKind channel = channel::ChannelKind::awgn;
  double snr_db = 0.0;
  double psnr_mean = 0.0;
  double psnr_std = 0.0;
  std::size_t count = 0;
};

struct SweepProvenance {
  std::uint64_t seed = 0;
  std::map<std::string, std::string> checkpoint_hashes;  // pipeline -> hash
  std::string config_digest;
};

struct SweepReport {
  std::vector<SweepRow> rows;  // sorted by (pipeline name, channel name, snr)
  SweepProvenance provenance;

  /// Header pipeline,channel,snr_db,psnr_mean,psnr_std,n.
  [[nodiscard]] std::string to_csv() const;
  [[nodiscard]] std::string provenance_json() const;
};

struct SweepVariant {
  Pipeline pipeline = Pipeline::original;
  const codec::CodecModel* model = nullptr;
  std::span<const PreparedImage> images;
};

struct SweepOptions {
  std::vector<channel::ChannelKind> channels{channel::ChannelKind::awgn, channel::ChannelKind::rayleigh};
  std::vector<double> snr_db = default_snr_grid();
  bool equalize = true;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::string config_digest;
};

/// Evaluates every (variant, channel, snr) triple. All SNR points reuse the
/// same per-image noise streams.
SweepReport run_sweep(std::span<const SweepVariant> variants, const SweepOptions& options);

/// FNV-1a 64 digest of the serialized checkpoint.
std::string checkpoint_hash(const codec::CodecModel& model);

struct ExportVariant {
  Pipeline pipeline = Pipeline::original;
  const codec::CodecModel* model = nullptr;
};

/// Writes original.ppm, roi.ppm (when a mask is given) and one
/// recon_<pipeline>_<channel>.ppm per variant and channel spec. Returns the
/// paths written.
std::vector<std::filesystem::path> export_images(const DatasetImage& image,
                                                 const std::optional<segmentation::Mask>& mask,
                                                 std::span<const ExportVariant> variants,
                                                 std::span<const channel::ChannelSpec> specs,
                                                 const std::filesystem::path& out_dir);

/// File-name fragment for a channel spec, e.g. awgn_10 or rayleigh-raw_2.5.
std::string channel_tag(const channel::ChannelSpec& spec);

}  // namespace semcom::harness
