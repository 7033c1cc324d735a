#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "llfz/lightfield.hpp"

namespace llfz {

/// Binary PGM (P5) or PPM (P6) image, 8- or 16-bit.
struct PnmImage {
  std::size_t rows = 0;
  std::size_t cols = 0;
  int channels = 1;
  std::uint32_t maxval = 255;
  std::vector<std::uint16_t> values;  // row-major, channels interleaved
};

PnmImage read_pnm(const std::filesystem::path& path);
PnmImage parse_pnm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> serialize_pnm(const PnmImage& image);
void write_pnm(const std::filesystem::path& path, const PnmImage& image);

/// Convenience: 8-bit grayscale PGM from a row-major buffer.
void write_pgm(const std::filesystem::path& path, std::size_t rows, std::size_t cols,
               std::span<const std::uint8_t> pixels);

/// Views named view_<s>_<t>.pgm or .ppm, loaded in (s,t) raster order.
struct ViewSet {
  std::size_t s_count = 0;
  std::size_t t_count = 0;
  std::vector<PnmImage> views;
};
ViewSet read_view_directory(const std::filesystem::path& dir);

/// ".lfy": "LFY1", S,T,U,V as u32-le, then samples in (s,t,u,v) order.
std::vector<std::uint8_t> serialize_lfy(const LightField& lf);
LightField parse_lfy(std::span<const std::uint8_t> bytes);
void write_lfy(const std::filesystem::path& path, const LightField& lf);
LightField read_lfy(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

// Little-endian helpers shared by the container formats.
void put_u32le(std::vector<std::uint8_t>& out, std::uint32_t value);
std::uint32_t get_u32le(std::span<const std::uint8_t> in, std::size_t offset);

}  // namespace llfz
