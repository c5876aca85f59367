#include "semcom/segmentation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "semcom/errors.hpp"
#include "semcom/netpbm.hpp"

namespace semcom::segmentation {

namespace {

using nlohmann::json;

void require_image_matches(const Tensor& image, std::size_t height, std::size_t width) {
  const tensor::Shape& s = image.shape();
  if (s.n != 1 || s.h != height || s.w != width) {
    throw ShapeError("mask is " + std::to_string(height) + "x" + std::to_string(width) +
                     " but image is " + s.to_string());
  }
}

}  // namespace

Mask::Mask(std::size_t height, std::size_t width, std::uint8_t fill)
    : height_(height), width_(width), bits_(height * width, fill != 0 ? 1 : 0) {
  if (height == 0 || width == 0) {
    throw ShapeError("mask dimensions must be positive");
  }
}

Mask::Mask(std::size_t height, std::size_t width, std::vector<std::uint8_t> bits)
    : height_(height), width_(width), bits_(std::move(bits)) {
  if (height == 0 || width == 0) {
    throw ShapeError("mask dimensions must be positive");
  }
  if (bits_.size() != height * width) {
    throw ShapeError("mask holds " + std::to_string(bits_.size()) + " bits for a " +
                     std::to_string(height) + "x" + std::to_string(width) + " grid");
  }
  for (auto& b : bits_) {
    b = b != 0 ? 1 : 0;
  }
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

double Mask::coverage() const { return static_cast<double>(count()) / static_cast<double>(bits_.size()); }

void MaskSet::validate() const {
  if (masks.empty()) {
    throw IngestionError("mask set for '" + image_id + "' is empty");
  }
  for (std::size_t i = 1; i < masks.size(); ++i) {
    if (masks[i].height() != masks[0].height() || masks[i].width() != masks[0].width()) {
      throw IngestionError("mask " + std::to_string(i) + " of '" + image_id + "' is " +
                           std::to_string(masks[i].height()) + "x" + std::to_string(masks[i].width()) +
                           ", expected " + std::to_string(masks[0].height()) + "x" +
                           std::to_string(masks[0].width()));
    }
  }
}

MaskSet load_mask_set(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) {
    throw IngestionError("cannot open mask manifest " + manifest_path.string());
  }
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw IngestionError("mask manifest " + manifest_path.string() + " is not valid JSON: " + e.what());
  }

  MaskSet set;
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::string> paths;
  try {
    set.image_id = doc.at("image").get<std::string>();
    width = doc.at("width").get<std::size_t>();
    height = doc.at("height").get<std::size_t>();
    set.prompt = doc.value("prompt", std::string{});
    paths = doc.at("masks").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw IngestionError("mask manifest " + manifest_path.string() + " is missing a field: " + e.what());
  }
  if (paths.empty()) {
    throw IngestionError("mask manifest " + manifest_path.string() + " lists no masks");
  }
  if (width == 0 || height == 0) {
    throw IngestionError("mask manifest " + manifest_path.string() + " declares a zero dimension");
  }

  const std::filesystem::path base = manifest_path.parent_path();
  for (const std::string& rel : paths) {
    const std::filesystem::path file = base / rel;
    if (!std::filesystem::exists(file)) {
      throw IngestionError("mask file missing: " + file.string());
    }
    io::Raster raster;
    try {
      raster = io::read_netpbm(file);
    } catch (const MalformedFileError& e) {
      throw IngestionError(std::string("unreadable mask file: ") + e.what());
    }
    if (raster.channels != 1) {
      throw IngestionError("mask file " + file.string() + " is not a P5 gray image");
    }
    if (raster.width != width || raster.height != height) {
      throw IngestionError("mask file " + file.string() + " is " + std::to_string(raster.width) + "x" +
                           std::to_string(raster.height) + ", manifest declares " + std::to_string(width) +
                           "x" + std::to_string(height));
    }
    // Threshold at the midpoint of the file's sample range (127 for 8-bit).
    const std::uint32_t cut = raster.max_value / 2;
    std::vector<std::uint8_t> bits(raster.samples.size());
    std::transform(raster.samples.begin(), raster.samples.end(), bits.begin(),
                   [cut](std::uint8_t v) { return static_cast<std::uint8_t>(v > cut ? 1 : 0); });
    set.masks.emplace_back(height, width, std::move(bits));
  }
  set.validate();
  return set;
}

std::filesystem::path save_mask_set(const MaskSet& set, const std::filesystem::path& dir) {
  set.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw IoError("cannot create mask directory " + dir.string() + ": " + ec.message());
  }
  json doc;
  doc["image"] = set.image_id;
  doc["width"] = set.masks.front().width();
  doc["height"] = set.masks.front().height();
  doc["prompt"] = set.prompt;
  json files = json::array();
  for (std::size_t i = 0; i < set.masks.size(); ++i) {
    const Mask& m = set.masks[i];
    io::Raster raster{m.width(), m.height(), 1, 255, {}};
    raster.samples.resize(m.size());
    std::transform(m.bits().begin(), m.bits().end(), raster.samples.begin(),
                   [](std::uint8_t b) { return static_cast<std::uint8_t>(b != 0 ? 255 : 0); });
    const std::string name = set.image_id + "_" + std::to_string(i) + ".pgm";
    io::write_netpbm(dir / name, raster);
    files.push_back(name);
  }
  doc["masks"] = files;
  const std::filesystem::path manifest = dir / (set.image_id + ".json");
  std::ofstream out(manifest, std::ios::trunc);
  if (!out) {
    throw IoError("cannot write mask manifest " + manifest.string());
  }
  out << doc.dump(2) << '\n';
  return manifest;
}

Mask mask_union(const MaskSet& set) {
  set.validate();
  std::vector<std::uint8_t> bits = set.masks.front().bits();
  for (std::size_t i = 1; i < set.masks.size(); ++i) {
    const auto& other = set.masks[i].bits();
    for (std::size_t j = 0; j < bits.size(); ++j) {
      bits[j] |= other[j];
    }
  }
  return Mask(set.masks.front().height(), set.masks.front().width(), std::move(bits));
}

RoiImage apply_mask(const Tensor& image, const Mask& mask) {
  require_image_matches(image, mask.height(), mask.width());
  Tensor out = image;
  const tensor::Shape& s = image.shape();
  for (std::size_t c = 0; c < s.c; ++c) {
    for (std::size_t y = 0; y < s.h; ++y) {
      for (std::size_t x = 0; x < s.w; ++x) {
        if (!mask.at(y, x)) {
          out(0, c, y, x) = 0.0f;
        }
      }
    }
  }
  return RoiImage{std::move(out), mask.coverage()};
}

std::vector<RoiImage> apply_masks(const Tensor& image, const MaskSet& set, MaskMode mode) {
  set.validate();
  std::vector<RoiImage> out;
  if (mode == MaskMode::composite) {
    out.push_back(apply_mask(image, mask_union(set)));
  } else {
    for (const Mask& m : set.masks) {
      out.push_back(apply_mask(image, m));
    }
  }
  return out;
}

StubSpec StubSpec::parse(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw ConfigError("stub mask spec '" + std::string(text) +
                      "' needs a parameter, e.g. center_box:0.25 or luminance:0.4");
  }
  const std::string_view name = text.substr(0, colon);
  const std::string_view arg = text.substr(colon + 1);
  StubSpec spec;
  if (name == "center_box") {
    spec.kind = Kind::center_box;
  } else if (name == "luminance" || name == "luminance_threshold") {
    spec.kind = Kind::luminance_threshold;
  } else {
    throw ConfigError("unknown stub mask kind '" + std::string(name) + "'");
  }
  const auto [ptr, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), spec.value);
  if (ec != std::errc() || ptr != arg.data() + arg.size() || !std::isfinite(spec.value)) {
    throw ConfigError("invalid stub mask parameter in '" + std::string(text) + "'");
  }
  if (spec.kind == Kind::center_box && !(spec.value > 0.0 && spec.value <= 1.0)) {
    throw ConfigError("center_box fraction must be in (0, 1]");
  }
  if (spec.kind == Kind::luminance_threshold && !(spec.value >= 0.0 && spec.value <= 1.0)) {
    throw ConfigError("luminance threshold must be in [0, 1]");
  }
  return spec;
}

std::string StubSpec::to_string() const {
  std::ostringstream out;
  out << (kind == Kind::center_box ? "center_box" : "luminance") << ':' << value;
  return out.str();
}

Mask center_box(std::size_t height, std::size_t width, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ConfigError("center_box fraction must be in (0, 1]");
  }
  const double side = std::sqrt(fraction);
  const auto box_h = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(side * static_cast<double>(height))), 1, height);
  const auto box_w = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(side * static_cast<double>(width))), 1, width);
  const std::size_t top = (height - box_h) / 2;
  const std::size_t left = (width - box_w) / 2;
  Mask mask(height, width);
  for (std::size_t y = top; y < top + box_h; ++y) {
    for (std::size_t x = left; x < left + box_w; ++x) {
      mask.set(y, x, true);
    }
  }
  return mask;
}

Mask luminance_threshold(const Tensor& image, double threshold) {
  const tensor::Shape& s = image.shape();
  if (s.n != 1) {
    throw ShapeError("luminance_threshold needs a single image, got " + s.to_string());
  }
  Mask mask(s.h, s.w);
  for (std::size_t y = 0; y < s.h; ++y) {
    for (std::size_t x = 0; x < s.w; ++x) {
      double sum = 0.0;
      for (std::size_t c = 0; c < s.c; ++c) {
        sum += image(0, c, y, x);
      }
      mask.set(y, x, sum / static_cast<double>(s.c) > threshold);
    }
  }
  return mask;
}

MaskSet stub_generate(const Tensor& image, const StubSpec& spec, std::string image_id) {
  const tensor::Shape& s = image.shape();
  MaskSet set;
  set.image_id = std::move(image_id);
  set.prompt = "stub:" + spec.to_string();
  if (spec.kind == StubSpec::Kind::center_box) {
    set.masks.push_back(center_box(s.h, s.w, spec.value));
  } else {
    set.masks.push_back(luminance_threshold(image, spec.value));
  }
  return set;
}

}  // namespace semcom::segmentation
