#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>

#include "llfz/io.hpp"
#include "llfz/lightfield.hpp"

namespace llfz::testing {

inline std::filesystem::path data_dir() { return LLFZ_TEST_DATA_DIR; }

inline LightField make_noise(Dims d, std::uint64_t seed) {
  LightField lf(d);
  std::mt19937_64 rng(seed);
  for (auto& v : lf.samples()) v = static_cast<std::uint8_t>(rng() & 0xff);
  return lf;
}

// x = 2u + v + s + t, clipped to 8 bits.
inline LightField make_ramp(Dims d) {
  LightField lf(d);
  for (std::size_t s = 0; s < d.s; ++s)
    for (std::size_t t = 0; t < d.t; ++t)
      for (std::size_t u = 0; u < d.u; ++u)
        for (std::size_t v = 0; v < d.v; ++v)
          lf(s, t, u, v) = static_cast<std::uint8_t>(std::min<std::size_t>(255, 2 * u + v + s + t));
  return lf;
}

// 5x5x64x64 light field rendered from a 96x96 photograph crop: slanted
// plane with disparity 0.5 + 0.01 u pixels per view, bilinear warping.
inline LightField make_photo() {
  const PnmImage img = read_pnm(data_dir() / "camera_96.pgm");
  const auto at = [&](std::size_t r, std::size_t c) { return static_cast<double>(img.values[r * img.cols + c]); };
  const Dims d{5, 5, 64, 64};
  LightField lf(d);
  for (std::size_t s = 0; s < d.s; ++s)
    for (std::size_t t = 0; t < d.t; ++t)
      for (std::size_t u = 0; u < d.u; ++u) {
        const double disparity = 0.5 + 0.01 * static_cast<double>(u);
        for (std::size_t v = 0; v < d.v; ++v) {
          const double y = static_cast<double>(u) + 16 + disparity * (static_cast<double>(s) - 2);
          const double x = static_cast<double>(v) + 16 + disparity * (static_cast<double>(t) - 2);
          const auto y0 = static_cast<std::size_t>(std::floor(y)), x0 = static_cast<std::size_t>(std::floor(x));
          const double fy = y - static_cast<double>(y0), fx = x - static_cast<double>(x0);
          const double val = (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x0 + 1)) +
                             fy * ((1 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1));
          lf(s, t, u, v) = static_cast<std::uint8_t>(std::floor(val + 0.5));
        }
      }
  return lf;
}

}  // namespace llfz::testing
