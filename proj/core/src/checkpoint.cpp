#include "semcom/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "semcom/errors.hpp"

namespace semcom::codec {

namespace {

constexpr std::array<std::uint8_t, 4> kMagic{'S', 'C', 'J', 'C'};

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
      bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(const void* data, std::size_t size) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes_.insert(bytes_.end(), p, p + size);
  }

  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4, "u32");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8, "u64");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    }
    pos_ += 8;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string string(std::size_t size) {
    need(size, "name");
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), size);
    pos_ += size;
    return s;
  }

  [[nodiscard]] std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t size, const char* what) const {
    if (bytes_.size() - pos_ < size) {
      throw CheckpointFormatError("checkpoint truncated while reading " + std::string(what) +
                                  " at offset " + std::to_string(pos_));
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void write_activation(Writer& w, const Activation& a) {
  w.u32(static_cast<std::uint32_t>(a.kind));
  w.f32(a.slope);
}

Activation read_activation(Reader& r) {
  const std::uint32_t kind = r.u32();
  const float slope = r.f32();
  if (kind > static_cast<std::uint32_t>(tensor::ActivationKind::sigmoid)) {
    throw CheckpointFormatError("checkpoint has unknown activation kind " + std::to_string(kind));
  }
  return {static_cast<tensor::ActivationKind>(kind), slope};
}

void write_item_shape(Writer& w, const ItemShape& s) {
  w.u32(static_cast<std::uint32_t>(s.channels));
  w.u32(static_cast<std::uint32_t>(s.height));
  w.u32(static_cast<std::uint32_t>(s.width));
}

ItemShape read_item_shape(Reader& r) {
  ItemShape s;
  s.channels = r.u32();
  s.height = r.u32();
  s.width = r.u32();
  return s;
}

// Reads magic, version and config block.
CodecConfig read_header(Reader& r) {
  for (std::uint8_t expected : kMagic) {
    if (r.remaining() == 0) {
      throw CheckpointFormatError("checkpoint truncated inside magic");
    }
    if (static_cast<std::uint8_t>(r.string(1)[0]) != expected) {
      throw CheckpointFormatError("checkpoint magic is not \"SCJC\"");
    }
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointFormatError("unsupported checkpoint version " + std::to_string(version));
  }
  CodecConfig config;
  config.input = read_item_shape(r);
  config.features = read_item_shape(r);
  const std::uint32_t stage_count = r.u32();
  if (stage_count > r.remaining() / 16) {
    throw CheckpointFormatError("checkpoint declares " + std::to_string(stage_count) +
                                " stages, more than the payload can hold");
  }
  config.stages.clear();
  for (std::uint32_t i = 0; i < stage_count; ++i) {
    StageSpec s;
    s.out_channels = r.u32();
    s.kernel = r.u32();
    s.stride = r.u32();
    s.padding = r.u32();
    config.stages.push_back(s);
  }
  config.hidden = read_activation(r);
  config.output = read_activation(r);
  try {
    config.validate();
  } catch (const ConfigError& e) {
    throw CheckpointFormatError(std::string("checkpoint config is inconsistent: ") + e.what());
  }
  return config;
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const CodecModel& model) {
  Writer w;
  w.raw(kMagic.data(), kMagic.size());
  w.u32(kCheckpointVersion);
  const CodecConfig& c = model.config();
  write_item_shape(w, c.input);
  write_item_shape(w, c.features);
  w.u32(static_cast<std::uint32_t>(c.stages.size()));
  for (const StageSpec& s : c.stages) {
    w.u32(static_cast<std::uint32_t>(s.out_channels));
    w.u32(static_cast<std::uint32_t>(s.kernel));
    w.u32(static_cast<std::uint32_t>(s.stride));
    w.u32(static_cast<std::uint32_t>(s.padding));
  }
  write_activation(w, c.hidden);
  write_activation(w, c.output);

  const auto params = model.parameters();
  w.u64(model.parameter_count());
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const tensor::Parameter& p : params) {
    w.u32(static_cast<std::uint32_t>(p.name.size()));
    w.raw(p.name.data(), p.name.size());
    const auto dims = p.value.shape().dims();
    w.u32(static_cast<std::uint32_t>(dims.size()));
    for (std::size_t d : dims) {
      w.u32(static_cast<std::uint32_t>(d));
    }
    for (float v : p.value.data()) {
      w.f32(v);
    }
  }
  return w.take();
}

std::uint64_t checkpoint_declared_parameter_count(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  read_header(r);
  return r.u64();
}

CodecModel deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  CodecConfig config = read_header(r);
  const auto layout = parameter_layout(config);

  const std::uint64_t declared_scalars = r.u64();
  const std::uint32_t records = r.u32();
  if (records != layout.size()) {
    throw CheckpointFormatError("checkpoint has " + std::to_string(records) +
                                " parameter records, config implies " + std::to_string(layout.size()));
  }

  std::vector<tensor::Parameter> params;
  std::uint64_t scalars = 0;
  for (std::uint32_t i = 0; i < records; ++i) {
    const std::uint32_t name_len = r.u32();
    if (name_len > r.remaining()) {
      throw CheckpointFormatError("checkpoint truncated in parameter name " + std::to_string(i));
    }
    std::string name = r.string(name_len);
    const std::uint32_t rank = r.u32();
    if (rank != 4) {
      throw CheckpointFormatError("parameter '" + name + "' has rank " + std::to_string(rank) +
                                  ", expected 4");
    }
    tensor::Shape shape;
    shape.n = r.u32();
    shape.c = r.u32();
    shape.h = r.u32();
    shape.w = r.u32();
    if (name != layout[i].first || shape != layout[i].second) {
      throw CheckpointFormatError("parameter record " + std::to_string(i) + " is '" + name + "' " +
                                  shape.to_string() + ", header config implies '" + layout[i].first +
                                  "' " + layout[i].second.to_string());
    }
    if (shape.numel() > r.remaining() / 4) {
      throw CheckpointFormatError("checkpoint truncated in values of '" + name + "'");
    }
    std::vector<float> values(shape.numel());
    for (float& v : values) {
      v = r.f32();
    }
    scalars += values.size();
    params.emplace_back(std::move(name), tensor::Tensor(shape, std::move(values)));
  }
  if (scalars != declared_scalars) {
    throw CheckpointFormatError("checkpoint header declares " + std::to_string(declared_scalars) +
                                " parameters but records hold " + std::to_string(scalars));
  }
  if (r.remaining() != 0) {
    throw CheckpointFormatError("checkpoint has " + std::to_string(r.remaining()) + " trailing bytes");
  }
  return CodecModel(std::move(config), std::move(params));
}

void save_checkpoint(const CodecModel& model, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = serialize_checkpoint(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open checkpoint for writing: " + path.string());
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw IoError("failed writing checkpoint: " + path.string());
  }
}

CodecModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open checkpoint: " + path.string());
  }
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace semcom::codec
