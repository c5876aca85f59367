#include "semcom/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include <nlohmann/json.hpp>

#include "semcom/checkpoint.hpp"
#include "semcom/errors.hpp"
#include "semcom/metrics.hpp"
#include "semcom/netpbm.hpp"

namespace semcom::harness {

namespace {

// Decorrelates the training stream from the initialisation stream, which is
// seeded with the raw seed.
constexpr std::uint64_t kTrainStreamSalt = 0x9e3779b97f4a7c15ULL;

// Runs body(i) for i in [0, count) on up to `threads` workers; rethrows the
// first failure.
template <typename Body>
void parallel_for(std::size_t count, std::size_t threads, Body&& body) {
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(count, 1));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) {
      body(i);
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> workers;
    for (std::size_t t = 0; t < threads; ++t) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            body(i);
          } catch (...) {
            const std::lock_guard lock(failure_mutex);
            if (!failure) {
              failure = std::current_exception();
            }
          }
        }
      });
    }
  }
  if (failure) {
    std::rethrow_exception(failure);
  }
}

}  // namespace

std::vector<PreparedImage> prepare_inputs(const std::vector<DatasetImage>& images, Pipeline pipeline,
                                          std::span<const segmentation::Mask> masks) {
  if (pipeline == Pipeline::masked && masks.size() != images.size()) {
    throw ConfigError("masked pipeline needs one mask per image: " + std::to_string(images.size()) +
                      " images, " + std::to_string(masks.size()) + " masks");
  }
  std::vector<PreparedImage> prepared;
  prepared.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    PreparedImage p;
    p.id = images[i].id;
    p.original = images[i].image;
    if (pipeline == Pipeline::masked) {
      p.input = segmentation::apply_mask(images[i].image, masks[i]).image;
      p.roi = masks[i];
    } else {
      p.input = images[i].image;
      if (!masks.empty()) {
        p.roi = masks[i];
      }
    }
    prepared.push_back(std::move(p));
  }
  return prepared;
}

TrainResult train_codec(codec::CodecModel& model, std::span<const Tensor> inputs, const TrainOptions& options) {
  if (inputs.empty()) {
    throw DatasetError("training set is empty");
  }
  if (options.batch_size == 0) {
    throw ConfigError("batch size must be positive");
  }
  model.optimizer().options.learning_rate = options.learning_rate;
  RngStream rng(options.seed ^ kTrainStreamSalt);
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.below(i)]);
    }
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      std::vector<Tensor> parts;
      for (std::size_t k = start; k < end; ++k) {
        parts.push_back(inputs[order[k]]);
      }
      const Tensor batch = tensor::concat_batch(parts);

      tensor::Tape tape;
      const tensor::Value x = tape.constant(batch);
      tensor::Value z = codec::power_normalize(tape, model.encode(tape, x));
      if (options.train_channel) {
        channel::Transmission tx = channel::transmit_detailed(tape.value(z), *options.train_channel, rng);
        z = tape.record("channel", {z}, std::move(tx.received),
                        [gain = std::move(tx.gain)](const tensor::Tape::BackwardContext& ctx)
                            -> std::vector<std::optional<Tensor>> {
                          Tensor grad = ctx.grad_output;
                          for (std::size_t n = 0; n < grad.shape().n; ++n) {
                            for (float& g : grad.item(n)) {
                              g *= gain[n];
                            }
                          }
                          return {std::move(grad)};
                        });
      }
      const tensor::Value reconstruction = model.decode(tape, z);
      const tensor::Value loss = tape.mse_loss(reconstruction, tape.constant(batch));
      tape.backward(loss);
      tensor::adam_step(model.parameters(), model.optimizer());
      loss_sum += tape.value(loss).item_value();
      ++batches;
    }
    const double epoch_loss = loss_sum / static_cast<double>(batches);
    result.epoch_loss.push_back(epoch_loss);
    if (options.on_epoch) {
      options.on_epoch(epoch + 1, epoch_loss);
    }
  }
  return result;
}

Tensor transmit_image(const codec::CodecModel& model, const Tensor& input, const channel::ChannelSpec& spec,
                      RngStream& rng) {
  const Tensor features = codec::power_normalize(model.encode(input));
  return model.decode(channel::transmit(features, spec, rng));
}

std::pair<double, double> mean_std(std::span<const double> values) {
  if (values.empty()) {
    return {0.0, 0.0};
  }
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() < 2 || !std::isfinite(mean)) {
    return {mean, 0.0};
  }
  double ss = 0.0;
  for (double v : values) {
    ss += (v - mean) * (v - mean);
  }
  return {mean, std::sqrt(ss / (n - 1.0))};
}

EvalStats evaluate(const codec::CodecModel& model, std::span<const PreparedImage> images,
                   const channel::ChannelSpec& spec, std::size_t threads) {
  EvalStats stats;
  stats.images.resize(images.size());
  parallel_for(images.size(), threads, [&](std::size_t i) {
    const PreparedImage& image = images[i];
    RngStream rng(image_stream_seed(spec.seed, i));
    const Tensor reconstruction = transmit_image(model, image.input, spec, rng);
    ImageScore score;
    score.id = image.id;
    score.psnr_db = metrics::psnr(reconstruction, image.input).value_db;
    if (image.roi && image.roi->count() > 0) {
      score.roi_psnr_db = metrics::psnr_masked(reconstruction, image.original, *image.roi).value_db;
    }
    stats.images[i] = std::move(score);
  });

  std::vector<double> full;
  std::vector<double> roi;
  for (const ImageScore& s : stats.images) {
    full.push_back(s.psnr_db);
    if (s.roi_psnr_db) {
      roi.push_back(*s.roi_psnr_db);
    }
  }
  std::tie(stats.psnr_mean, stats.psnr_std) = mean_std(full);
  if (!roi.empty()) {
    const auto [m, s] = mean_std(roi);
    stats.roi_psnr_mean = m;
    stats.roi_psnr_std = s;
  }
  stats.count = images.size();
  return stats;
}

std::string checkpoint_hash(const codec::CodecModel& model) {
  return hex64(fnv1a64(codec::serialize_checkpoint(model)));
}

SweepReport run_sweep(std::span<const SweepVariant> variants, const SweepOptions& options) {
  if (variants.empty()) {
    throw ConfigError("sweep needs at least one checkpoint");
  }
  SweepReport report;
  report.provenance.seed = options.seed;
  report.provenance.config_digest = options.config_digest;
  for (const SweepVariant& v : variants) {
    if (v.model == nullptr) {
      throw ConfigError("sweep variant without a model");
    }
    const std::string name(pipeline_name(v.pipeline));
    if (report.provenance.checkpoint_hashes.contains(name)) {
      throw ConfigError("sweep got two checkpoints for pipeline '" + name + "'");
    }
    report.provenance.checkpoint_hashes[name] = checkpoint_hash(*v.model);
    for (channel::ChannelKind kind : options.channels) {
      for (double snr : options.snr_db) {
        const channel::ChannelSpec spec{kind, snr, options.equalize, options.seed};
        const EvalStats stats = evaluate(*v.model, v.images, spec, options.threads);
        report.rows.push_back({v.pipeline, kind, snr, stats.psnr_mean, stats.psnr_std, stats.count});
      }
    }
  }
  std::stable_sort(report.rows.begin(), report.rows.end(), [](const SweepRow& a, const SweepRow& b) {
    const auto key = [](const SweepRow& r) {
      return std::make_tuple(pipeline_name(r.pipeline), channel::kind_name(r.channel), r.snr_db);
    };
    return key(a) < key(b);
  });
  return report;
}

std::string SweepReport::to_csv() const {
  std::string csv = "pipeline,channel,snr_db,psnr_mean,psnr_std,n\n";
  char line[256];
  for (const SweepRow& r : rows) {
    std::snprintf(line, sizeof(line), "%s,%s,%g,%.6f,%.6f,%zu\n", std::string(pipeline_name(r.pipeline)).c_str(),
                  std::string(channel::kind_name(r.channel)).c_str(), r.snr_db, r.psnr_mean, r.psnr_std,
                  r.count);
    csv += line;
  }
  return csv;
}

std::string SweepReport::provenance_json() const {
  nlohmann::json doc;
  doc["seed"] = provenance.seed;
  doc["checkpoints"] = provenance.checkpoint_hashes;
  doc["config_digest"] = provenance.config_digest;
  return doc.dump(2) + "\n";
}

std::string channel_tag(const channel::ChannelSpec& spec) {
  if (spec.kind == channel::ChannelKind::identity) {
    return "identity";
  }
  std::string text = spec.to_string();
  std::replace(text.begin(), text.end(), ':', '_');
  return text;
}

std::vector<std::filesystem::path> export_images(const DatasetImage& image,
                                                 const std::optional<segmentation::Mask>& mask,
                                                 std::span<const ExportVariant> variants,
                                                 std::span<const channel::ChannelSpec> specs,
                                                 const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) {
    throw IoError("cannot create output directory " + out_dir.string());
  }
  std::vector<std::filesystem::path> written;
  const auto write = [&](const std::string& name, const Tensor& t) {
    const std::filesystem::path path = out_dir / name;
    io::write_netpbm(path, io::tensor_to_raster(t));
    written.push_back(path);
  };

  write("original.ppm", image.image);
  std::optional<Tensor> roi;
  if (mask) {
    roi = segmentation::apply_mask(image.image, *mask).image;
    write("roi.ppm", *roi);
  }
  for (const ExportVariant& v : variants) {
    if (v.model == nullptr) {
      throw ConfigError("export variant without a model");
    }
    if (v.pipeline == Pipeline::masked && !roi) {
      throw ConfigError("masked-pipeline export needs a mask");
    }
    const Tensor& input = v.pipeline == Pipeline::masked ? *roi : image.image;
    for (const channel::ChannelSpec& spec : specs) {
      RngStream rng(image_stream_seed(spec.seed, 0));
      write("recon_" + std::string(pipeline_name(v.pipeline)) + "_" + channel_tag(spec) + ".ppm",
            transmit_image(*v.model, input, spec, rng));
    }
  }
  return written;
}

}  // namespace semcom::harness
