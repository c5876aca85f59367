#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "semcom/rng.hpp"
#include "semcom/tensor.hpp"

namespace semcom::channel {

using tensor::Tensor;

enum class ChannelKind { identity, awgn, rayleigh };

/// Real-valued channel model. Each batch item is one transmitted block.
struct ChannelSpec {
  ChannelKind kind = ChannelKind::identity;
  double snr_db = 20.0;
  bool equalize = true;  // rayleigh only: divide out the known gain
  std::uint64_t seed = 0;

  /// Accepts "identity", "awgn:<snr>", "rayleigh:<snr>" and
  /// "rayleigh-raw:<snr>" (no equalisation). Throws ConfigError otherwise.
  static ChannelSpec parse(std::string_view text, std::uint64_t seed = 0);
  [[nodiscard]] std::string to_string() const;

  friend bool operator==(const ChannelSpec&, const ChannelSpec&) = default;
};

std::string_view kind_name(ChannelKind kind);
ChannelKind parse_kind(std::string_view name);

/// Channel output plus the per-item multiplicative factor applied to the
/// input, so that y = gain[n] * x + noise. gain is 1 for identity, AWGN and
/// equalised Rayleigh.
struct Transmission {
  Tensor received;
  std::vector<float> gain;
};

/// Dispatches on spec.kind using `rng` for every draw (spec.seed is not read).
Tensor transmit(const Tensor& x, const ChannelSpec& spec, RngStream& rng);
Transmission transmit_detailed(const Tensor& x, const ChannelSpec& spec, RngStream& rng);

/// y = x + n with n ~ N(0, P / 10^(snr/10)), P the measured average power
/// of each batch item. Throws DegenerateSignalError on a zero-power item.
Tensor awgn(const Tensor& x, double snr_db, RngStream& rng);

/// Block Rayleigh fading: one gain h per batch item with E[h^2] = 1, then
/// AWGN referenced to the power of x. With `equalize` the receiver divides
/// by h.
Transmission rayleigh(const Tensor& x, double snr_db, bool equalize, RngStream& rng);

/// One Rayleigh gain: sqrt(a^2 + b^2) / sqrt(2), a and b standard normal.
double draw_rayleigh_gain(RngStream& rng);

/// 10 log10(sum x^2 / sum (y - x)^2); +infinity when y == x.
double measure_snr(const Tensor& x, const Tensor& y);

}  // namespace semcom::channel
