#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "llfz/bitio.hpp"
#include "llfz/lightfield.hpp"

namespace llfz {

/// Near-lossless bound: every decoded sample is within tau of the original.
struct Tau {
  int value = 0;

  constexpr Tau() = default;
  constexpr explicit Tau(int v) : value(v) {}
  constexpr int bin_width() const { return 2 * value + 1; }
  friend constexpr bool operator==(Tau, Tau) = default;
};

Tau make_tau(long value);  // validates 0 <= value <= 255

/// Uniform error quantizer: floor((e + tau) / (2 tau + 1)), floor toward
/// negative infinity.
constexpr int quantize_error(int e, Tau tau) {
  const int num = e + tau.value;
  const int den = tau.bin_width();
  const int q = num / den;
  return (num % den != 0 && num < 0) ? q - 1 : q;
}

constexpr int dequantize_error(int index, Tau tau) { return index * tau.bin_width(); }

/// Signed-to-unsigned fold: 0,-1,1,-2,2,... -> 0,1,2,3,4,...
constexpr std::uint32_t fold(int e) {
  return e >= 0 ? static_cast<std::uint32_t>(e) * 2u : static_cast<std::uint32_t>(-e) * 2u - 1u;
}
constexpr int unfold(std::uint32_t m) {
  return (m & 1u) ? -static_cast<int>((m + 1) / 2) : static_cast<int>(m / 2);
}

/// Adaptive Golomb-Rice parameter estimator (LOCO-I style).
/// kappa is the smallest k with count * 2^k >= magnitude sum, i.e.
/// max(0, ceil(log2(mean))). Both accumulators halve when count hits 64.
class RiceState {
 public:
  static constexpr std::uint32_t kResetCount = 64;

  int kappa() const;
  void update(std::uint32_t m);

 private:
  std::uint64_t sum_ = 0;
  std::uint32_t count_ = 0;
};

/// Unary prefixes this long switch to a raw 32-bit escape.
inline constexpr std::uint32_t kRiceEscapePrefix = 24;

void rice_put(BitWriter& out, RiceState& state, std::uint32_t m);
std::uint32_t rice_get(BitReader& in, RiceState& state);

/// Whole-sequence forms with a single adaptive state.
std::vector<std::uint8_t> rice_encode(std::span<const std::uint32_t> symbols);
std::vector<std::uint32_t> rice_decode(std::span<const std::uint8_t> bytes, std::size_t count);

/// Causal neighbourhood of one EPI-V plane sample (reconstructed values,
/// boundary substitutions applied).
struct Neighbors {
  int w = 0;
  int n = 0;
  int nw = 0;
  int ne = 0;

  bool flat() const { return w == n && n == nw && nw == ne; }
};

/// Per-context adaptive state: bias-correction accumulator plus the Rice
/// estimator for regular-mode residuals.
struct ContextState {
  std::int64_t bias_sum = 0;
  std::uint32_t bias_count = 0;
  RiceState rice;

  int bias() const;  // rounded running mean, 0 before any sample
  void update_bias(int error);
};

inline constexpr int kContextCount = 8;

/// Boundary rule: missing W <- N, missing N <- W, both missing <- 128,
/// missing NW/NE <- N.
Neighbors gather_neighbors(std::span<const std::uint8_t> plane, std::size_t cols, std::size_t row,
                           std::size_t col);

/// Context id in [0, 7] from (N - W) with thresholds {-16,-4,-1,0,1,4,16}.
int context_id(const Neighbors& nb);

/// Median edge detector, clamped to [0, 255].
int med_predict(const Neighbors& nb);

/// Final prediction: MED plus the context bias, clamped.
int predict(const Neighbors& nb, const ContextState& ctx);

/// Encoded container. Header: "LFZ1", u8 version, u32-le S,T,U,V, u8 tau,
/// u32-le chunk count, u32-le length per chunk; then the chunk payloads.
/// One chunk per EPI-V plane (fixed (t,v), in (t,v) raster order).
struct Bitstream {
  static constexpr std::uint8_t kVersion = 1;

  Dims dims{};
  Tau tau{};
  std::vector<std::uint32_t> chunk_lengths;
  std::vector<std::uint8_t> payload;

  std::size_t header_size() const { return 4 + 1 + 16 + 1 + 4 + 4 * chunk_lengths.size(); }
  std::size_t size_bytes() const { return header_size() + payload.size(); }
  std::span<const std::uint8_t> chunk(std::size_t i) const;

  std::vector<std::uint8_t> serialize() const;
  static Bitstream parse(std::span<const std::uint8_t> bytes);
};

/// Closed-loop DPCM encoder. Each EPI-V plane is coded independently and
/// the planes may be processed in parallel (see set_workers); the output
/// is byte-identical for any worker count.
Bitstream encode(const LightField& lf, Tau tau);

/// Reconstruction the encoder tracks internally; equals decode(encode()).
LightField encoder_reconstruction(const LightField& lf, Tau tau);

LightField decode(const Bitstream& bs);

struct BoundCheck {
  int max_abs_error = 0;
  bool pass = false;
};
BoundCheck verify_bound(const LightField& x, const LightField& y, Tau tau);

}  // namespace llfz
