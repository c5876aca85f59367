// semcom: train, evaluate and sweep the JSCC codec from the command line.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "semcom/checkpoint.hpp"
#include "semcom/dataset.hpp"
#include "semcom/errors.hpp"
#include "semcom/experiment.hpp"
#include "semcom/netpbm.hpp"
#include "semcom/pipeline.hpp"
#include "semcom/segmentation.hpp"

namespace fs = std::filesystem;
using namespace semcom;
using namespace semcom::harness;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

// Flags shared by every experiment-driven subcommand. Unset optionals leave
// the profile / config-file value alone.
struct ConfigFlags {
  std::string profile = "desk";
  std::string config_file;
  std::optional<std::string> dataset;
  std::optional<std::string> masks;
  std::optional<std::string> stub;
  std::optional<std::size_t> image_size;
  std::optional<std::string> pipeline;
  std::optional<std::uint64_t> seed;

  void attach(CLI::App* cmd) {
    cmd->add_option("--profile", profile, "Base settings: desk (64x64, 200 epochs) or full (512x512, 1500 epochs)")
        ->check(CLI::IsMember({"desk", "full"}));
    cmd->add_option("--config", config_file, "JSON experiment config applied on top of the profile")
        ->check(CLI::ExistingFile);
    cmd->add_option("--dataset", dataset, "Directory of *.ppm images");
    cmd->add_option("--masks", masks, "Directory of <image>.json mask manifests");
    cmd->add_option("--stub-masks", stub, "Stub masks when no manifests are given, e.g. center_box:0.5");
    cmd->add_option("--image-size", image_size, "Square codec input size");
    cmd->add_option("--pipeline", pipeline, "original or masked")->check(CLI::IsMember({"original", "masked"}));
  }

  [[nodiscard]] ExperimentConfig resolve() const {
    ExperimentConfig config = profile == "full" ? ExperimentConfig::full_profile() : ExperimentConfig::desk_profile();
    if (!config_file.empty()) {
      const ExperimentConfig file = ExperimentConfig::from_json(read_text(config_file));
      config = file;
    }
    if (dataset) config.dataset_dir = *dataset;
    if (masks) config.mask_dir = *masks;
    if (stub) config.stub_masks = *stub;
    if (image_size) config.image_size = *image_size;
    if (pipeline) config.pipeline = parse_pipeline(*pipeline);
    if (seed) config.training.seed = *seed;
    if (config.dataset_dir.empty()) throw ConfigError("no dataset: pass --dataset or set dataset_dir");
    return config;
  }
};

// Validates after all overrides are applied; warnings go to stderr.
void check(const ExperimentConfig& config) {
  for (const std::string& warning : config.validate()) std::cerr << "warning: " << warning << "\n";
}

MaskSource mask_source(const ExperimentConfig& config) {
  if (!config.mask_dir.empty()) return MaskSource::from_manifests(config.mask_dir);
  return MaskSource::from_stub(segmentation::StubSpec::parse(config.stub_masks));
}

std::vector<PreparedImage> prepare(const std::vector<DatasetImage>& images, Pipeline pipeline,
                                   const ExperimentConfig& config) {
  if (pipeline == Pipeline::original) return prepare_inputs(images, pipeline);
  const auto masks = resolve_masks(images, mask_source(config));
  return prepare_inputs(images, pipeline, masks);
}

std::size_t input_size(const codec::CodecModel& model) {
  const auto& in = model.config().input;
  if (in.height != in.width) throw ConfigError("checkpoint input is not square");
  return in.height;
}

std::size_t default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

// --checkpoint original=a.scjc --checkpoint masked=b.scjc
std::map<Pipeline, fs::path> parse_checkpoints(const std::vector<std::string>& items) {
  std::map<Pipeline, fs::path> out;
  for (const std::string& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("--checkpoint expects pipeline=path, got '" + item + "'");
    const Pipeline p = parse_pipeline(item.substr(0, eq));
    if (!out.emplace(p, item.substr(eq + 1)).second) {
      throw ConfigError("checkpoint for pipeline '" + item.substr(0, eq) + "' given twice");
    }
  }
  return out;
}

int cmd_train(const ConfigFlags& flags, const std::string& out, const std::optional<std::size_t>& epochs,
              const std::optional<double>& lr, const std::optional<std::size_t>& batch,
              const std::optional<std::string>& train_channel, const std::string& loss_log) {
  ExperimentConfig config = flags.resolve();
  if (epochs) config.training.epochs = *epochs;
  if (lr) config.training.learning_rate = *lr;
  if (batch) config.training.batch_size = *batch;
  if (train_channel) config.train_channel = *train_channel;
  check(config);

  const auto images = load_dataset(config.dataset_dir, config.image_size);
  const auto prepared = prepare(images, config.pipeline, config);
  std::vector<tensor::Tensor> inputs;
  for (const auto& p : prepared) inputs.push_back(p.input);

  codec::CodecModel model = codec::build_codec(config.codec(), config.training.seed);
  TrainOptions options;
  options.epochs = config.training.epochs;
  options.batch_size = config.training.batch_size;
  options.learning_rate = config.training.learning_rate;
  options.seed = config.training.seed;
  options.train_channel = config.train_channel_spec();
  options.on_epoch = [](std::size_t epoch, double loss) {
    std::fprintf(stderr, "epoch %zu loss %.6f\n", epoch, loss);
  };
  std::cerr << "training " << pipeline_name(config.pipeline) << " codec on " << images.size() << " images, "
            << model.parameter_count() << " parameters, config " << config.digest() << "\n";
  const TrainResult result = train_codec(model, inputs, options);

  codec::save_checkpoint(model, out);
  if (!loss_log.empty()) {
    std::string csv = "epoch,loss\n";
    char line[64];
    for (std::size_t i = 0; i < result.epoch_loss.size(); ++i) {
      std::snprintf(line, sizeof line, "%zu,%.9g\n", i + 1, result.epoch_loss[i]);
      csv += line;
    }
    write_text(loss_log, csv);
  }
  const EvalStats clean = evaluate(model, prepared, channel::ChannelSpec{}, default_threads());
  std::printf("checkpoint %s\nhash %s\nnoiseless psnr %.4f dB\n", out.c_str(), checkpoint_hash(model).c_str(),
              clean.psnr_mean);
  return 0;
}

int cmd_eval(ConfigFlags flags, const std::string& checkpoint, const std::string& channel_text,
             std::uint64_t channel_seed, std::size_t threads) {
  const codec::CodecModel model = codec::load_checkpoint(checkpoint);
  if (!flags.image_size) flags.image_size = input_size(model);
  const ExperimentConfig config = flags.resolve();
  check(config);
  const auto images = load_dataset(config.dataset_dir, config.image_size);
  const auto prepared = prepare(images, config.pipeline, config);
  const channel::ChannelSpec spec = channel::ChannelSpec::parse(channel_text, channel_seed);
  const EvalStats stats = evaluate(model, prepared, spec, threads);

  nlohmann::json doc;
  doc["pipeline"] = pipeline_name(config.pipeline);
  doc["channel"] = spec.to_string();
  doc["seed"] = spec.seed;
  doc["n"] = stats.count;
  doc["psnr_mean"] = stats.psnr_mean;
  doc["psnr_std"] = stats.psnr_std;
  if (stats.roi_psnr_mean) {
    doc["roi_psnr_mean"] = *stats.roi_psnr_mean;
    doc["roi_psnr_std"] = *stats.roi_psnr_std;
  }
  nlohmann::json per = nlohmann::json::array();
  for (const ImageScore& s : stats.images) {
    nlohmann::json row{{"id", s.id}, {"psnr_db", s.psnr_db}};
    if (s.roi_psnr_db) row["roi_psnr_db"] = *s.roi_psnr_db;
    per.push_back(row);
  }
  doc["images"] = per;
  std::cout << doc.dump(2) << "\n";
  return 0;
}

int cmd_sweep(ConfigFlags flags, const std::vector<std::string>& checkpoint_items,
              const std::optional<std::string>& snr_text, const std::optional<std::vector<std::string>>& channel_names,
              std::uint64_t seed, const std::string& out, std::size_t threads) {
  const auto paths = parse_checkpoints(checkpoint_items);
  std::map<Pipeline, codec::CodecModel> models;
  for (const auto& [pipeline, path] : paths) models.emplace(pipeline, codec::load_checkpoint(path));
  const std::size_t size = input_size(models.begin()->second);
  for (const auto& [pipeline, model] : models) {
    if (input_size(model) != size) throw ConfigError("checkpoints disagree on input size");
  }
  if (!flags.image_size) flags.image_size = size;
  flags.seed = seed;
  ExperimentConfig config = flags.resolve();
  if (snr_text) config.snr_db = parse_snr_list(*snr_text);
  if (channel_names) {
    config.channels.clear();
    for (const std::string& name : *channel_names) config.channels.push_back(channel::parse_kind(name));
  }
  check(config);

  const auto images = load_dataset(config.dataset_dir, config.image_size);
  std::map<Pipeline, std::vector<PreparedImage>> prepared;
  std::vector<SweepVariant> variants;
  for (const auto& [pipeline, model] : models) {
    prepared[pipeline] = prepare(images, pipeline, config);
  }
  for (const auto& [pipeline, model] : models) variants.push_back({pipeline, &model, prepared[pipeline]});

  SweepOptions options;
  options.channels = config.channels;
  options.snr_db = config.snr_db;
  options.equalize = config.equalize;
  options.seed = seed;
  options.threads = threads;
  options.config_digest = config.digest();
  const SweepReport report = run_sweep(variants, options);

  if (out.empty() || out == "-") {
    std::cout << report.to_csv();
  } else {
    write_text(out, report.to_csv());
    write_text(out + ".provenance.json", report.provenance_json());
    std::cerr << "wrote " << report.rows.size() << " rows to " << out << "\n";
  }
  return 0;
}

int cmd_export(const std::vector<std::string>& checkpoint_items, const std::string& image_path,
               const std::optional<std::string>& masks, const std::string& stub,
               const std::vector<std::string>& channel_texts, std::uint64_t seed, const std::string& out) {
  const auto paths = parse_checkpoints(checkpoint_items);
  std::map<Pipeline, codec::CodecModel> models;
  for (const auto& [pipeline, path] : paths) models.emplace(pipeline, codec::load_checkpoint(path));
  const DatasetImage image = load_image(image_path, input_size(models.begin()->second));

  const MaskSource source =
      masks ? MaskSource::from_manifests(*masks) : MaskSource::from_stub(segmentation::StubSpec::parse(stub));
  const segmentation::Mask mask = resolve_mask(image, source);

  std::vector<ExportVariant> variants;
  for (const auto& [pipeline, model] : models) variants.push_back({pipeline, &model});
  std::vector<channel::ChannelSpec> specs;
  for (const std::string& text : channel_texts) specs.push_back(channel::ChannelSpec::parse(text, seed));
  for (const fs::path& p : export_images(image, mask, variants, specs, out)) std::cout << p.string() << "\n";
  return 0;
}

int cmd_gen_masks(const std::string& dataset, const std::string& stub, const std::string& out) {
  const segmentation::StubSpec spec = segmentation::StubSpec::parse(stub);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dataset)) {
    if (entry.is_regular_file() && entry.path().extension() == ".ppm") files.push_back(entry.path());
  }
  if (files.empty()) throw DatasetError("no .ppm images in " + dataset);
  std::sort(files.begin(), files.end());
  for (const fs::path& file : files) {
    // Masks live at the source resolution, like real segmenter output.
    const tensor::Tensor image = io::raster_to_tensor(io::read_netpbm(file));
    const fs::path manifest = segmentation::save_mask_set(
        segmentation::stub_generate(image, spec, file.stem().string()), out);
    std::cout << manifest.string() << "\n";
  }
  return 0;
}

int cmd_gen_dataset(const std::string& out, std::size_t count, std::size_t size, std::uint64_t seed) {
  for (const fs::path& p : write_synthetic_dataset(out, count, size, seed)) std::cout << p.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic communication codec: training, channel simulation and PSNR sweeps"};
  app.require_subcommand(1);
  std::function<int()> run;

  ConfigFlags train_flags;
  std::string train_out = "codec.scjc";
  std::optional<std::size_t> epochs;
  std::optional<double> lr;
  std::optional<std::size_t> batch;
  std::optional<std::string> train_channel;
  std::optional<std::uint64_t> train_seed;
  std::string loss_log;
  auto* train = app.add_subcommand("train", "Train a codec on original or masked images");
  train_flags.attach(train);
  train->add_option("--out,-o", train_out, "Checkpoint to write");
  train->add_option("--epochs", epochs);
  train->add_option("--lr", lr, "Adam learning rate");
  train->add_option("--batch-size", batch);
  train->add_option("--seed", train_seed, "Initialisation and shuffling seed");
  train->add_option("--train-channel", train_channel, "none, or a channel spec such as awgn:10");
  train->add_option("--loss-log", loss_log, "CSV of the per-epoch loss");
  train->callback([&] {
    train_flags.seed = train_seed;
    run = [&] { return cmd_train(train_flags, train_out, epochs, lr, batch, train_channel, loss_log); };
  });

  ConfigFlags eval_flags;
  std::string eval_checkpoint;
  std::string eval_channel = "identity";
  std::uint64_t eval_seed = 0;
  std::size_t eval_threads = default_threads();
  auto* eval = app.add_subcommand("eval", "PSNR statistics of one checkpoint over one channel");
  eval_flags.attach(eval);
  eval->add_option("--checkpoint", eval_checkpoint)->required()->check(CLI::ExistingFile);
  eval->add_option("--channel", eval_channel, "identity, awgn:<snr>, rayleigh:<snr> or rayleigh-raw:<snr>");
  eval->add_option("--seed", eval_seed, "Channel noise seed");
  eval->add_option("--threads", eval_threads);
  eval->callback([&] { run = [&] { return cmd_eval(eval_flags, eval_checkpoint, eval_channel, eval_seed, eval_threads); }; });

  ConfigFlags sweep_flags;
  std::vector<std::string> sweep_checkpoints;
  std::optional<std::string> sweep_snr;
  std::optional<std::vector<std::string>> sweep_channels;
  std::uint64_t sweep_seed = 0;
  std::string sweep_out;
  std::size_t sweep_threads = default_threads();
  auto* sweep = app.add_subcommand("sweep", "PSNR-vs-SNR table over channels and pipelines");
  sweep_flags.attach(sweep);
  sweep->add_option("--checkpoint", sweep_checkpoints, "pipeline=path, repeatable")->required();
  sweep->add_option("--snr", sweep_snr, "SNR list: 1..20 or 1,5,10");
  sweep->add_option("--channels", sweep_channels, "awgn and/or rayleigh")->delimiter(',');
  sweep->add_option("--seed", sweep_seed, "Channel noise seed")->required();
  sweep->add_option("--out,-o", sweep_out, "CSV path (provenance goes to <out>.provenance.json); stdout if omitted");
  sweep->add_option("--threads", sweep_threads);
  sweep->callback([&] {
    run = [&] {
      return cmd_sweep(sweep_flags, sweep_checkpoints, sweep_snr, sweep_channels, sweep_seed, sweep_out, sweep_threads);
    };
  });

  std::vector<std::string> export_checkpoints;
  std::string export_image;
  std::optional<std::string> export_masks;
  std::string export_stub = "center_box:0.5";
  std::vector<std::string> export_channels;
  std::uint64_t export_seed = 0;
  std::string export_out = "export";
  auto* exporter = app.add_subcommand("export-images", "Write original, ROI and reconstructed images as PPM");
  exporter->add_option("--checkpoint", export_checkpoints, "pipeline=path, repeatable")->required();
  exporter->add_option("--image", export_image)->required()->check(CLI::ExistingFile);
  exporter->add_option("--masks", export_masks, "Directory of <image>.json mask manifests");
  exporter->add_option("--stub-masks", export_stub);
  exporter->add_option("--channel", export_channels, "Channel spec, repeatable")->required();
  exporter->add_option("--seed", export_seed);
  exporter->add_option("--out,-o", export_out);
  exporter->callback([&] {
    run = [&] {
      return cmd_export(export_checkpoints, export_image, export_masks, export_stub, export_channels, export_seed,
                        export_out);
    };
  });

  std::string masks_dataset;
  std::string masks_stub = "center_box:0.5";
  std::string masks_out = "masks";
  auto* gen_masks = app.add_subcommand("gen-masks", "Write stub masks and manifests for every image");
  gen_masks->add_option("--dataset", masks_dataset)->required()->check(CLI::ExistingDirectory);
  gen_masks->add_option("--stub-masks", masks_stub, "center_box:<area> or luminance:<threshold>");
  gen_masks->add_option("--out,-o", masks_out);
  gen_masks->callback([&] { run = [&] { return cmd_gen_masks(masks_dataset, masks_stub, masks_out); }; });

  std::string data_out = "data";
  std::size_t data_count = 8;
  std::size_t data_size = 64;
  std::uint64_t data_seed = 1;
  auto* gen_data = app.add_subcommand("gen-dataset", "Write synthetic PPM scenes");
  gen_data->add_option("--out,-o", data_out);
  gen_data->add_option("--count", data_count);
  gen_data->add_option("--size", data_size);
  gen_data->add_option("--seed", data_seed);
  gen_data->callback([&] { run = [&] { return cmd_gen_dataset(data_out, data_count, data_size, data_seed); }; });

  CLI11_PARSE(app, argc, argv);
  try {
    return run();
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
