#include "semcom/channel.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "semcom/errors.hpp"

namespace semcom::channel {

namespace {

double item_power(std::span<const float> item, std::size_t index) {
  double sum = 0.0;
  for (float v : item) {
    sum += static_cast<double>(v) * v;
  }
  const double power = sum / static_cast<double>(item.size());
  if (!(power > 0.0)) {
    throw DegenerateSignalError("channel input item " + std::to_string(index) + " has zero power");
  }
  return power;
}

double noise_sigma(double power, double snr_db) {
  if (!std::isfinite(snr_db)) {
    throw ConfigError("channel SNR must be finite");
  }
  return std::sqrt(power / std::pow(10.0, snr_db / 10.0));
}

double parse_number(std::string_view text, std::string_view whole) {
  double value = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw ConfigError("invalid SNR in channel spec '" + std::string(whole) + "'");
  }
  return value;
}

}  // namespace

std::string_view kind_name(ChannelKind kind) {
  switch (kind) {
    case ChannelKind::identity:
      return "identity";
    case ChannelKind::awgn:
      return "awgn";
    case ChannelKind::rayleigh:
      return "rayleigh";
  }
  throw ConfigError("unknown channel kind " + std::to_string(static_cast<int>(kind)));
}

ChannelKind parse_kind(std::string_view name) {
  if (name == "identity") {
    return ChannelKind::identity;
  }
  if (name == "awgn") {
    return ChannelKind::awgn;
  }
  if (name == "rayleigh" || name == "rf") {
    return ChannelKind::rayleigh;
  }
  throw ConfigError("unknown channel kind '" + std::string(name) + "'");
}

ChannelSpec ChannelSpec::parse(std::string_view text, std::uint64_t seed) {
  ChannelSpec spec;
  spec.seed = seed;
  const auto colon = text.find(':');
  std::string_view name = text.substr(0, colon);
  if (name == "identity" || name == "none") {
    if (colon != std::string_view::npos) {
      throw ConfigError("identity channel takes no SNR: '" + std::string(text) + "'");
    }
    return spec;
  }
  if (colon == std::string_view::npos) {
    throw ConfigError("channel spec '" + std::string(text) + "' needs an SNR, e.g. awgn:10");
  }
  if (name == "rayleigh-raw") {
    spec.kind = ChannelKind::rayleigh;
    spec.equalize = false;
  } else {
    spec.kind = parse_kind(name);
  }
  spec.snr_db = parse_number(text.substr(colon + 1), text);
  return spec;
}

std::string ChannelSpec::to_string() const {
  if (kind == ChannelKind::identity) {
    return "identity";
  }
  std::ostringstream out;
  out << (kind == ChannelKind::rayleigh && !equalize ? "rayleigh-raw" : kind_name(kind)) << ':' << snr_db;
  return out.str();
}

Tensor awgn(const Tensor& x, double snr_db, RngStream& rng) {
  Tensor y(x.shape());
  for (std::size_t n = 0; n < x.shape().n; ++n) {
    const auto src = x.item(n);
    auto dst = y.item(n);
    const double sigma = noise_sigma(item_power(src, n), snr_db);
    for (std::size_t i = 0; i < src.size(); ++i) {
      dst[i] = static_cast<float>(src[i] + sigma * rng.normal());
    }
  }
  return y;
}

double draw_rayleigh_gain(RngStream& rng) {
  const double a = rng.normal();
  const double b = rng.normal();
  return std::sqrt((a * a + b * b) / 2.0);
}

Transmission rayleigh(const Tensor& x, double snr_db, bool equalize, RngStream& rng) {
  Transmission out{Tensor(x.shape()), std::vector<float>(x.shape().n, 1.0f)};
  for (std::size_t n = 0; n < x.shape().n; ++n) {
    const auto src = x.item(n);
    auto dst = out.received.item(n);
    const double sigma = noise_sigma(item_power(src, n), snr_db);
    double h = draw_rayleigh_gain(rng);
    // A zero gain has probability zero in exact arithmetic but can occur in
    // floating point; keep the equaliser finite.
    h = std::max(h, std::numeric_limits<double>::min());
    for (std::size_t i = 0; i < src.size(); ++i) {
      const double raw = h * src[i] + sigma * rng.normal();
      dst[i] = static_cast<float>(equalize ? raw / h : raw);
    }
    out.gain[n] = equalize ? 1.0f : static_cast<float>(h);
  }
  return out;
}

Transmission transmit_detailed(const Tensor& x, const ChannelSpec& spec, RngStream& rng) {
  switch (spec.kind) {
    case ChannelKind::identity:
      return {x, std::vector<float>(x.shape().n, 1.0f)};
    case ChannelKind::awgn:
      return {awgn(x, spec.snr_db, rng), std::vector<float>(x.shape().n, 1.0f)};
    case ChannelKind::rayleigh:
      return rayleigh(x, spec.snr_db, spec.equalize, rng);
  }
  throw ConfigError("unknown channel kind " + std::to_string(static_cast<int>(spec.kind)));
}

Tensor transmit(const Tensor& x, const ChannelSpec& spec, RngStream& rng) {
  return transmit_detailed(x, spec, rng).received;
}

double measure_snr(const Tensor& x, const Tensor& y) {
  require_same_shape(x.shape(), y.shape(), "measure_snr");
  double signal = 0.0;
  double noise = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double s = x[i];
    const double d = static_cast<double>(y[i]) - s;
    signal += s * s;
    noise += d * d;
  }
  if (!(signal > 0.0)) {
    throw DegenerateSignalError("measure_snr: reference signal has zero power");
  }
  if (noise == 0.0) {
    return std::numeric_limits<double>::infinity();
  }
  return 10.0 * std::log10(signal / noise);
}

}  // namespace semcom::channel
