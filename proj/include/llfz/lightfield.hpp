#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace llfz {

/// Extents of a 4D light field: angular (s, t), spatial (u, v).
struct Dims {
  std::uint32_t s = 0;
  std::uint32_t t = 0;
  std::uint32_t u = 0;
  std::uint32_t v = 0;

  std::size_t count() const {
    return std::size_t{s} * t * u * v;
  }
  std::array<std::size_t, 4> extents() const { return {s, t, u, v}; }
  bool valid() const { return s > 0 && t > 0 && u > 0 && v > 0; }

  friend bool operator==(const Dims&, const Dims&) = default;
};

/// 8-bit light field L(s,t,u,v), stored in (s,t,u,v) raster order
/// (v fastest).
class LightField {
 public:
  LightField() = default;
  explicit LightField(Dims dims, std::uint8_t fill = 0);
  LightField(Dims dims, std::vector<std::uint8_t> samples);

  const Dims& dims() const { return dims_; }

  std::size_t index(std::size_t s, std::size_t t, std::size_t u, std::size_t v) const {
    return ((s * dims_.t + t) * dims_.u + u) * dims_.v + v;
  }
  std::uint8_t operator()(std::size_t s, std::size_t t, std::size_t u, std::size_t v) const {
    return samples_[index(s, t, u, v)];
  }
  std::uint8_t& operator()(std::size_t s, std::size_t t, std::size_t u, std::size_t v) {
    return samples_[index(s, t, u, v)];
  }

  std::span<const std::uint8_t> samples() const { return samples_; }
  std::span<std::uint8_t> samples() { return samples_; }

  friend bool operator==(const LightField&, const LightField&) = default;

 private:
  Dims dims_{};
  std::vector<std::uint8_t> samples_;
};

/// The four 2D arrangements of a light field. Each fixes two axes and
/// exposes the other two as a plane.
enum class Representation { sai, epi_h, epi_v, mi };

inline constexpr std::array<Representation, 4> kAllRepresentations = {
    Representation::sai, Representation::epi_h, Representation::epi_v,
    Representation::mi};

std::string_view name(Representation k);
Representation parse_representation(std::string_view text);

/// Axis permutation {fixed0, fixed1, plane_row, plane_col} with axes
/// numbered s=0, t=1, u=2, v=3.
///   SAI   fixes (s,t), plane (u,v)
///   EPI-H fixes (s,u), plane (t,v)
///   EPI-V fixes (t,v), plane (s,u)
///   MI    fixes (u,v), plane (s,t)
std::array<int, 4> axis_order(Representation k);

/// A light field viewed as a stack of planes for one representation.
/// Planes are ordered raster over the fixed axes (first fixed axis slow);
/// within a plane rows follow the first plane axis.
struct PlaneStack {
  Representation repr = Representation::sai;
  std::size_t plane_count = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> data;  // plane_count * rows * cols

  std::span<const std::uint8_t> plane(std::size_t i) const {
    return std::span<const std::uint8_t>(data).subspan(i * rows * cols, rows * cols);
  }
  std::uint8_t at(std::size_t p, std::size_t r, std::size_t c) const {
    return data[(p * rows + r) * cols + c];
  }
};

PlaneStack reshape_to(const LightField& lf, Representation k);

/// Inverse of reshape_to. Throws Errc::dimension_mismatch when the stack
/// does not describe `dims`.
LightField reshape_from(const PlaneStack& ps, Dims dims);

/// Copies a contiguous 4D crop. Throws Errc::out_of_bounds.
LightField extract_patch(const LightField& lf, Dims origin, Dims size);

struct PrepConfig {
  double gamma = 0.45;
  int source_bit_depth = 10;
  std::array<double, 3> luma_weights = {0.299, 0.587, 0.114};
};

/// One captured view: 1 (gray) or 3 (RGB) interleaved channels.
struct RawView {
  std::size_t rows = 0;
  std::size_t cols = 0;
  int channels = 3;
  std::vector<std::uint16_t> values;
};

/// Normalizes each channel, converts to luma, applies v^gamma and quantizes
/// to 8 bits (round half away from zero, then clamp). `views` are in
/// (s,t) raster order. Gray views are treated as R = G = B.
LightField prepare(std::span<const RawView> views, std::size_t s_count, std::size_t t_count,
                   const PrepConfig& cfg);

/// Single-value form of prepare for a normalized gray level in [0, 1].
std::uint8_t prepare_gray(double normalized, const PrepConfig& cfg);

}  // namespace llfz
