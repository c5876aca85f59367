#include "semcom/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "semcom/errors.hpp"
#include "semcom/rng.hpp"

namespace semcom::harness {

namespace {

namespace fs = std::filesystem;

bool is_ppm(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".ppm";
}

struct CropMap {
  std::size_t top;
  std::size_t left;
  std::size_t side;
  std::size_t size;

  CropMap(std::size_t height, std::size_t width, std::size_t size)
      : top(0), left(0), side(std::min(height, width)), size(size) {
    if (size == 0) {
      throw ConfigError("target image size must be positive");
    }
    top = (height - side) / 2;
    left = (width - side) / 2;
  }

  // Source coordinate sampled by target index i (pixel-centre nearest neighbour).
  [[nodiscard]] std::size_t source(std::size_t i, std::size_t offset) const {
    return offset + std::min(side - 1, ((2 * i + 1) * side) / (2 * size));
  }
};

}  // namespace

Tensor crop_resize(const Tensor& image, std::size_t size) {
  const tensor::Shape& s = image.shape();
  const CropMap map(s.h, s.w, size);
  Tensor out(tensor::Shape{s.n, s.c, size, size});
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      for (std::size_t y = 0; y < size; ++y) {
        const std::size_t sy = map.source(y, map.top);
        for (std::size_t x = 0; x < size; ++x) {
          out(n, c, y, x) = image(n, c, sy, map.source(x, map.left));
        }
      }
    }
  }
  return out;
}

segmentation::Mask crop_resize(const segmentation::Mask& mask, std::size_t size) {
  const CropMap map(mask.height(), mask.width(), size);
  segmentation::Mask out(size, size);
  for (std::size_t y = 0; y < size; ++y) {
    const std::size_t sy = map.source(y, map.top);
    for (std::size_t x = 0; x < size; ++x) {
      out.set(y, x, mask.at(sy, map.source(x, map.left)));
    }
  }
  return out;
}

DatasetImage load_image(const fs::path& path, std::size_t target_size) {
  const io::Raster raster = io::read_netpbm(path);
  if (raster.channels != 3) {
    throw MalformedFileError(path.string() + ": expected a P6 (RGB) image");
  }
  DatasetImage image;
  image.id = path.stem().string();
  image.path = path;
  image.source_height = raster.height;
  image.source_width = raster.width;
  image.image = crop_resize(io::raster_to_tensor(raster), target_size);
  return image;
}

std::vector<DatasetImage> load_dataset(const fs::path& dir, std::size_t target_size) {
  if (!fs::is_directory(dir)) {
    throw DatasetError("dataset directory does not exist: " + dir.string());
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_ppm(entry.path())) {
      files.push_back(entry.path());
    }
  }
  if (files.empty()) {
    throw DatasetError("dataset directory holds no .ppm images: " + dir.string());
  }
  std::sort(files.begin(), files.end());
  std::vector<DatasetImage> images;
  images.reserve(files.size());
  for (const fs::path& file : files) {
    images.push_back(load_image(file, target_size));
  }
  return images;
}

segmentation::Mask resolve_mask(const DatasetImage& image, const MaskSource& source) {
  const std::size_t size = image.image.shape().h;
  switch (source.kind) {
    case MaskSource::Kind::none:
      throw ConfigError("masked pipeline needs a mask source (manifest directory or stub spec)");
    case MaskSource::Kind::stub:
      return segmentation::mask_union(segmentation::stub_generate(image.image, source.stub, image.id));
    case MaskSource::Kind::manifests: {
      const fs::path manifest = source.manifest_dir / (image.id + ".json");
      if (!fs::exists(manifest)) {
        throw IngestionError("no mask manifest for image '" + image.id + "' (" + manifest.string() + ")");
      }
      const segmentation::MaskSet set = segmentation::load_mask_set(manifest);
      const segmentation::Mask& first = set.masks.front();
      if (first.height() != image.source_height || first.width() != image.source_width) {
        throw IngestionError("masks for '" + image.id + "' are " + std::to_string(first.width()) + "x" +
                             std::to_string(first.height()) + " but the image is " +
                             std::to_string(image.source_width) + "x" + std::to_string(image.source_height));
      }
      return crop_resize(segmentation::mask_union(set), size);
    }
  }
  throw ConfigError("unknown mask source kind");
}

std::vector<segmentation::Mask> resolve_masks(const std::vector<DatasetImage>& images,
                                              const MaskSource& source) {
  std::vector<segmentation::Mask> masks;
  std::vector<std::string> problems;
  for (const DatasetImage& image : images) {
    try {
      masks.push_back(resolve_mask(image, source));
    } catch (const IngestionError& e) {
      problems.emplace_back(e.what());
    }
  }
  if (!problems.empty()) {
    std::ostringstream out;
    out << problems.size() << " image(s) lack usable masks:";
    for (const std::string& p : problems) {
      out << "\n  " << p;
    }
    throw IngestionError(out.str());
  }
  return masks;
}

io::Raster synthetic_scene(std::uint64_t seed, std::size_t size) {
  RngStream rng(seed);
  const double s = static_cast<double>(size);
  double bg_a[3];
  double bg_b[3];
  for (int c = 0; c < 3; ++c) {
    bg_a[c] = rng.uniform(0.05, 0.35);
    bg_b[c] = rng.uniform(0.05, 0.35);
  }
  const double angle = rng.uniform(0.0, 6.283185307179586);
  const double dx = std::cos(angle);
  const double dy = std::sin(angle);

  struct Shape {
    bool ellipse;
    double cx, cy, rx, ry;
    double color[3];
  };
  std::vector<Shape> shapes(1 + rng.below(3));
  for (Shape& sh : shapes) {
    sh.ellipse = rng.uniform() < 0.5;
    sh.cx = s * rng.uniform(0.3, 0.7);
    sh.cy = s * rng.uniform(0.3, 0.7);
    sh.rx = s * rng.uniform(0.08, 0.22);
    sh.ry = s * rng.uniform(0.08, 0.22);
    for (double& c : sh.color) {
      c = rng.uniform(0.45, 0.95);
    }
  }

  io::Raster raster{size, size, 3, 255, std::vector<std::uint8_t>(size * size * 3)};
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double px = (static_cast<double>(x) + 0.5) / s - 0.5;
      const double py = (static_cast<double>(y) + 0.5) / s - 0.5;
      const double t = std::clamp(0.5 + px * dx + py * dy, 0.0, 1.0);
      double rgb[3];
      for (int c = 0; c < 3; ++c) {
        rgb[c] = bg_a[c] * (1.0 - t) + bg_b[c] * t;
      }
      for (const Shape& sh : shapes) {
        const double u = (static_cast<double>(x) + 0.5 - sh.cx) / sh.rx;
        const double v = (static_cast<double>(y) + 0.5 - sh.cy) / sh.ry;
        const bool inside = sh.ellipse ? (u * u + v * v <= 1.0) : (std::abs(u) <= 1.0 && std::abs(v) <= 1.0);
        if (inside) {
          const double shade = 1.0 - 0.25 * std::clamp((u + v) * 0.5, -1.0, 1.0);
          for (int c = 0; c < 3; ++c) {
            rgb[c] = std::clamp(sh.color[c] * shade, 0.0, 1.0);
          }
        }
      }
      for (int c = 0; c < 3; ++c) {
        raster.samples[(y * size + x) * 3 + static_cast<std::size_t>(c)] =
            static_cast<std::uint8_t>(std::lround(rgb[c] * 255.0));
      }
    }
  }
  return raster;
}

std::vector<fs::path> write_synthetic_dataset(const fs::path& dir, std::size_t count, std::size_t size,
                                              std::uint64_t seed) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw IoError("cannot create dataset directory " + dir.string() + ": " + ec.message());
  }
  std::vector<fs::path> paths;
  for (std::size_t i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%03zu.ppm", i);
    const fs::path path = dir / name;
    io::write_netpbm(path, synthetic_scene(seed * 1000003u + i, size));
    paths.push_back(path);
  }
  return paths;
}

}  // namespace semcom::harness
