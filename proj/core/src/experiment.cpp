#include "semcom/experiment.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "semcom/errors.hpp"

namespace semcom::harness {

namespace {

using nlohmann::json;

double to_double(std::string_view text, std::string_view whole) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value)) {
    throw ConfigError("invalid SNR list '" + std::string(whole) + "'");
  }
  return value;
}

}  // namespace

std::string_view pipeline_name(Pipeline pipeline) {
  return pipeline == Pipeline::original ? "original" : "masked";
}

Pipeline parse_pipeline(std::string_view name) {
  if (name == "original") {
    return Pipeline::original;
  }
  if (name == "masked") {
    return Pipeline::masked;
  }
  throw ConfigError("unknown pipeline '" + std::string(name) + "' (expected original or masked)");
}

std::vector<double> default_snr_grid() {
  std::vector<double> grid;
  for (int snr = 1; snr <= 20; ++snr) {
    grid.push_back(snr);
  }
  return grid;
}

std::vector<double> parse_snr_list(std::string_view text) {
  std::vector<double> out;
  const auto range = text.find("..");
  if (range != std::string_view::npos) {
    const double lo = to_double(text.substr(0, range), text);
    const double hi = to_double(text.substr(range + 2), text);
    if (lo > hi || std::floor(lo) != lo || std::floor(hi) != hi) {
      throw ConfigError("SNR range '" + std::string(text) + "' needs integer bounds lo <= hi");
    }
    for (double v = lo; v <= hi; v += 1.0) {
      out.push_back(v);
    }
    return out;
  }
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const std::string_view item = text.substr(start, comma == std::string_view::npos ? text.npos : comma - start);
    out.push_back(to_double(item, text));
    if (comma == std::string_view::npos) {
      break;
    }
    start = comma + 1;
  }
  return out;
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    hash ^= b;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

ExperimentConfig::ExperimentConfig() : snr_db(default_snr_grid()) {}

ExperimentConfig ExperimentConfig::desk_profile() { return ExperimentConfig{}; }

ExperimentConfig ExperimentConfig::full_profile() {
  ExperimentConfig config;
  config.image_size = 512;
  config.training.epochs = 1500;
  config.training.learning_rate = 1e-3;
  return config;
}

std::optional<channel::ChannelSpec> ExperimentConfig::train_channel_spec() const {
  if (train_channel.empty() || train_channel == "none") {
    return std::nullopt;
  }
  return channel::ChannelSpec::parse(train_channel, training.seed);
}

std::vector<std::string> ExperimentConfig::validate() const {
  if (image_size == 0) {
    throw ConfigError("image_size must be positive");
  }
  codec().validate();
  if (!(training.learning_rate > 0.0)) {
    throw ConfigError("learning rate must be positive");
  }
  if (training.batch_size == 0) {
    throw ConfigError("batch size must be positive");
  }
  if (channels.empty()) {
    throw ConfigError("channel list is empty");
  }
  if (snr_db.empty()) {
    throw ConfigError("SNR list is empty");
  }
  (void)train_channel_spec();
  std::vector<std::string> warnings;
  for (double snr : snr_db) {
    if (!std::isfinite(snr)) {
      throw ConfigError("SNR values must be finite");
    }
    if (snr < -10.0 || snr > 40.0) {
      warnings.push_back("SNR " + std::to_string(snr) + " dB is outside the usual [-10, 40] dB range");
    }
  }
  return warnings;
}

std::string ExperimentConfig::to_json() const {
  json doc;
  doc["dataset_dir"] = dataset_dir;
  doc["mask_dir"] = mask_dir;
  doc["stub_masks"] = stub_masks;
  doc["image_size"] = image_size;
  doc["training"] = {{"epochs", training.epochs},
                     {"learning_rate", training.learning_rate},
                     {"batch_size", training.batch_size},
                     {"seed", training.seed}};
  json kinds = json::array();
  for (channel::ChannelKind k : channels) {
    kinds.push_back(std::string(channel::kind_name(k)));
  }
  doc["channels"] = kinds;
  doc["snr_db"] = snr_db;
  doc["train_channel"] = train_channel;
  doc["equalize"] = equalize;
  doc["pipeline"] = std::string(pipeline_name(pipeline));
  return doc.dump();
}

ExperimentConfig ExperimentConfig::from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("experiment config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) {
    throw ConfigError("experiment config must be a JSON object");
  }
  ExperimentConfig config;
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "dataset_dir") {
        config.dataset_dir = value.get<std::string>();
      } else if (key == "mask_dir") {
        config.mask_dir = value.get<std::string>();
      } else if (key == "stub_masks") {
        config.stub_masks = value.get<std::string>();
      } else if (key == "image_size") {
        config.image_size = value.get<std::size_t>();
      } else if (key == "training") {
        for (const auto& [tk, tv] : value.items()) {
          if (tk == "epochs") {
            config.training.epochs = tv.get<std::size_t>();
          } else if (tk == "learning_rate") {
            config.training.learning_rate = tv.get<double>();
          } else if (tk == "batch_size") {
            config.training.batch_size = tv.get<std::size_t>();
          } else if (tk == "seed") {
            config.training.seed = tv.get<std::uint64_t>();
          } else {
            throw ConfigError("unknown training key '" + tk + "'");
          }
        }
      } else if (key == "channels") {
        config.channels.clear();
        for (const auto& k : value) {
          config.channels.push_back(channel::parse_kind(k.get<std::string>()));
        }
      } else if (key == "snr_db") {
        config.snr_db = value.get<std::vector<double>>();
      } else if (key == "train_channel") {
        config.train_channel = value.get<std::string>();
      } else if (key == "equalize") {
        config.equalize = value.get<bool>();
      } else if (key == "pipeline") {
        config.pipeline = parse_pipeline(value.get<std::string>());
      } else {
        throw ConfigError("unknown experiment config key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("experiment config has a mistyped field: ") + e.what());
  }
  return config;
}

std::string ExperimentConfig::digest() const {
  const std::string canonical = to_json();
  return hex64(fnv1a64(std::span(reinterpret_cast<const std::uint8_t*>(canonical.data()), canonical.size())));
}

}  // namespace semcom::harness
