#include "llfz/lightfield.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "llfz/error.hpp"

namespace llfz {

LightField::LightField(Dims dims, std::uint8_t fill)
    : dims_(dims), samples_(dims.count(), fill) {
  if (!dims.valid()) throw Error(Errc::invalid_argument, "light field extents must be positive");
}

LightField::LightField(Dims dims, std::vector<std::uint8_t> samples)
    : dims_(dims), samples_(std::move(samples)) {
  if (!dims.valid()) throw Error(Errc::invalid_argument, "light field extents must be positive");
  if (samples_.size() != dims.count())
    throw Error(Errc::dimension_mismatch, "sample count does not match light field extents");
}

std::string_view name(Representation k) {
  switch (k) {
    case Representation::sai: return "sai";
    case Representation::epi_h: return "epi_h";
    case Representation::epi_v: return "epi_v";
    case Representation::mi: return "mi";
  }
  return "?";
}

Representation parse_representation(std::string_view text) {
  for (auto k : kAllRepresentations)
    if (name(k) == text) return k;
  throw Error(Errc::invalid_argument, "unknown representation '" + std::string(text) + "'");
}

std::array<int, 4> axis_order(Representation k) {
  switch (k) {
    case Representation::sai: return {0, 1, 2, 3};
    case Representation::epi_h: return {0, 2, 1, 3};
    case Representation::epi_v: return {1, 3, 0, 2};
    case Representation::mi: return {2, 3, 0, 1};
  }
  return {0, 1, 2, 3};
}

namespace {

// Visits the light field in permuted raster order, calling fn(dst, src)
// with the flattened permuted index and the native index.
template <typename Fn>
void for_each_permuted(const Dims& dims, const std::array<int, 4>& order, Fn&& fn) {
  const auto ext = dims.extents();
  const std::array<std::size_t, 4> native_stride = {
      ext[1] * ext[2] * ext[3], ext[2] * ext[3], ext[3], 1};
  std::array<std::size_t, 4> e{}, st{};
  for (int i = 0; i < 4; ++i) {
    e[i] = ext[order[i]];
    st[i] = native_stride[order[i]];
  }
  std::size_t dst = 0;
  for (std::size_t a = 0; a < e[0]; ++a)
    for (std::size_t b = 0; b < e[1]; ++b)
      for (std::size_t c = 0; c < e[2]; ++c) {
        std::size_t src = a * st[0] + b * st[1] + c * st[2];
        for (std::size_t d = 0; d < e[3]; ++d, ++dst, src += st[3]) fn(dst, src);
      }
}

}  // namespace

PlaneStack reshape_to(const LightField& lf, Representation k) {
  const auto order = axis_order(k);
  const auto ext = lf.dims().extents();
  PlaneStack ps;
  ps.repr = k;
  ps.plane_count = ext[order[0]] * ext[order[1]];
  ps.rows = ext[order[2]];
  ps.cols = ext[order[3]];
  ps.data.resize(lf.dims().count());
  const auto src = lf.samples();
  for_each_permuted(lf.dims(), order, [&](std::size_t d, std::size_t s) { ps.data[d] = src[s]; });
  return ps;
}

LightField reshape_from(const PlaneStack& ps, Dims dims) {
  const auto order = axis_order(ps.repr);
  const auto ext = dims.extents();
  if (!dims.valid() || ps.plane_count != ext[order[0]] * ext[order[1]] ||
      ps.rows != ext[order[2]] || ps.cols != ext[order[3]] || ps.data.size() != dims.count())
    throw Error(Errc::dimension_mismatch, "plane stack does not match light field extents");
  LightField lf(dims);
  auto dst = lf.samples();
  for_each_permuted(dims, order, [&](std::size_t d, std::size_t s) { dst[s] = ps.data[d]; });
  return lf;
}

LightField extract_patch(const LightField& lf, Dims origin, Dims size) {
  const auto ext = lf.dims().extents();
  const auto o = origin.extents();
  const auto n = size.extents();
  for (int i = 0; i < 4; ++i)
    if (n[i] == 0 || o[i] + n[i] > ext[i])
      throw Error(Errc::out_of_bounds, "patch exceeds light field extents");
  LightField out(size);
  auto dst = out.samples().begin();
  for (std::size_t s = 0; s < n[0]; ++s)
    for (std::size_t t = 0; t < n[1]; ++t)
      for (std::size_t u = 0; u < n[2]; ++u) {
        const auto row = lf.samples().subspan(lf.index(o[0] + s, o[1] + t, o[2] + u, o[3]), n[3]);
        dst = std::copy(row.begin(), row.end(), dst);
      }
  return out;
}

namespace {

void validate(const PrepConfig& cfg) {
  if (!(cfg.gamma > 0)) throw Error(Errc::invalid_argument, "gamma must be positive");
  if (cfg.source_bit_depth < 1 || cfg.source_bit_depth > 16)
    throw Error(Errc::invalid_argument, "source bit depth must be in [1, 16]");
  double sum = 0;
  for (double w : cfg.luma_weights) {
    if (w < 0 || w > 1) throw Error(Errc::invalid_argument, "luma weights must lie in [0, 1]");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error(Errc::invalid_argument, "luma weights must sum to 1");
}

std::uint8_t quantize8(double normalized) {
  return static_cast<std::uint8_t>(std::clamp(std::round(255.0 * normalized), 0.0, 255.0));
}

}  // namespace

std::uint8_t prepare_gray(double normalized, const PrepConfig& cfg) {
  validate(cfg);
  return quantize8(std::pow(std::clamp(normalized, 0.0, 1.0), cfg.gamma));
}

LightField prepare(std::span<const RawView> views, std::size_t s_count, std::size_t t_count,
                   const PrepConfig& cfg) {
  validate(cfg);
  if (views.empty() || views.size() != s_count * t_count)
    throw Error(Errc::dimension_mismatch, "view count does not match angular extents");
  const std::size_t rows = views[0].rows;
  const std::size_t cols = views[0].cols;
  const double max_value = std::ldexp(1.0, cfg.source_bit_depth) - 1.0;
  LightField lf(Dims{static_cast<std::uint32_t>(s_count), static_cast<std::uint32_t>(t_count),
                     static_cast<std::uint32_t>(rows), static_cast<std::uint32_t>(cols)});
  auto out = lf.samples().begin();
  for (const auto& view : views) {
    if (view.rows != rows || view.cols != cols)
      throw Error(Errc::dimension_mismatch, "views have inconsistent dimensions");
    if ((view.channels != 1 && view.channels != 3) ||
        view.values.size() != rows * cols * static_cast<std::size_t>(view.channels))
      throw Error(Errc::dimension_mismatch, "view sample count does not match its dimensions");
    for (std::size_t p = 0; p < rows * cols; ++p) {
      const auto linear = [&](int c) {
        const std::uint16_t raw = view.values[p * view.channels + c];
        if (raw > max_value)
          throw Error(Errc::invalid_argument, "sample exceeds the source bit depth");
        return raw / max_value;
      };
      double y = 0;
      if (view.channels == 1) {
        y = linear(0);  // weights sum to 1
      } else {
        for (int c = 0; c < 3; ++c) y += cfg.luma_weights[c] * linear(c);
      }
      *out++ = quantize8(std::pow(std::clamp(y, 0.0, 1.0), cfg.gamma));
    }
  }
  return lf;
}

}  // namespace llfz
