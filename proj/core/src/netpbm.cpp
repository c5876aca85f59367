#include "semcom/netpbm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

#include "semcom/errors.hpp"

namespace semcom::io {

namespace {

class HeaderCursor {
 public:
  HeaderCursor(std::span<const std::uint8_t> bytes, const std::string& source)
      : bytes_(bytes), source_(source) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') {
          ++pos_;
        }
      } else if (std::isspace(bytes_[pos_]) != 0) {
        ++pos_;
      } else {
        return;
      }
    }
  }

  std::uint64_t number(const char* what) {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || std::isdigit(bytes_[pos_]) == 0) {
      fail(std::string("expected ") + what);
    }
    std::uint64_t value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_]) != 0) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > (1u << 24)) {
        fail(std::string(what) + " is implausibly large");
      }
      ++pos_;
    }
    return value;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  void single_whitespace() {
    if (pos_ >= bytes_.size() || std::isspace(bytes_[pos_]) == 0) {
      fail("missing whitespace before raster");
    }
    ++pos_;
  }

  [[noreturn]] void fail(const std::string& why) const {
    throw MalformedFileError(source_ + ": malformed netpbm: " + why);
  }

  std::size_t pos_ = 0;

 private:
  std::span<const std::uint8_t> bytes_;
  const std::string& source_;
};

}  // namespace

Raster parse_netpbm(std::span<const std::uint8_t> bytes, const std::string& source) {
  HeaderCursor cursor(bytes, source);
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    cursor.fail("expected P5 or P6 magic");
  }
  cursor.pos_ = 2;
  Raster raster;
  raster.channels = bytes[1] == '6' ? 3 : 1;
  raster.width = cursor.number("width");
  raster.height = cursor.number("height");
  const std::uint64_t max_value = cursor.number("maxval");
  if (raster.width == 0 || raster.height == 0) {
    cursor.fail("zero image dimension");
  }
  if (max_value == 0 || max_value > 255) {
    cursor.fail("maxval " + std::to_string(max_value) + " unsupported (need 1..255)");
  }
  raster.max_value = static_cast<std::uint32_t>(max_value);
  cursor.single_whitespace();

  const std::size_t expected = raster.width * raster.height * raster.channels;
  const std::size_t available = bytes.size() - cursor.pos_;
  if (available < expected) {
    cursor.fail("truncated payload: " + std::to_string(available) + " of " + std::to_string(expected) +
                " bytes");
  }
  raster.samples.assign(bytes.begin() + static_cast<std::ptrdiff_t>(cursor.pos_),
                        bytes.begin() + static_cast<std::ptrdiff_t>(cursor.pos_ + expected));
  if (std::any_of(raster.samples.begin(), raster.samples.end(),
                  [&](std::uint8_t v) { return v > raster.max_value; })) {
    cursor.fail("sample exceeds maxval");
  }
  return raster;
}

std::vector<std::uint8_t> encode_netpbm(const Raster& raster) {
  if (raster.channels != 1 && raster.channels != 3) {
    throw ShapeError("netpbm rasters need 1 or 3 channels, got " + std::to_string(raster.channels));
  }
  if (raster.samples.size() != raster.width * raster.height * raster.channels) {
    throw ShapeError("netpbm raster sample count does not match its dimensions");
  }
  const std::string header = std::string(raster.channels == 3 ? "P6" : "P5") + "\n" +
                             std::to_string(raster.width) + " " + std::to_string(raster.height) + "\n" +
                             std::to_string(raster.max_value) + "\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.insert(bytes.end(), raster.samples.begin(), raster.samples.end());
  return bytes;
}

Raster read_netpbm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw MalformedFileError(path.string() + ": cannot open file");
  }
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_netpbm(bytes, path.string());
}

void write_netpbm(const std::filesystem::path& path, const Raster& raster) {
  const std::vector<std::uint8_t> bytes = encode_netpbm(raster);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open for writing: " + path.string());
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw IoError("failed writing " + path.string());
  }
}

tensor::Tensor raster_to_tensor(const Raster& raster) {
  tensor::Tensor t(tensor::Shape{1, raster.channels, raster.height, raster.width});
  const float scale = 1.0f / static_cast<float>(raster.max_value);
  for (std::size_t y = 0; y < raster.height; ++y) {
    for (std::size_t x = 0; x < raster.width; ++x) {
      for (std::size_t c = 0; c < raster.channels; ++c) {
        t(0, c, y, x) = static_cast<float>(raster.samples[(y * raster.width + x) * raster.channels + c]) * scale;
      }
    }
  }
  return t;
}

Raster tensor_to_raster(const tensor::Tensor& image, std::size_t item) {
  const tensor::Shape& s = image.shape();
  if ((s.c != 1 && s.c != 3) || item >= s.n) {
    throw ShapeError("tensor_to_raster needs an [N, 1|3, H, W] tensor, got " + s.to_string());
  }
  Raster raster;
  raster.width = s.w;
  raster.height = s.h;
  raster.channels = s.c;
  raster.samples.resize(s.h * s.w * s.c);
  for (std::size_t y = 0; y < s.h; ++y) {
    for (std::size_t x = 0; x < s.w; ++x) {
      for (std::size_t c = 0; c < s.c; ++c) {
        const float v = std::clamp(image(item, c, y, x), 0.0f, 1.0f);
        raster.samples[(y * s.w + x) * s.c + c] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
      }
    }
  }
  return raster;
}

}  // namespace semcom::io
