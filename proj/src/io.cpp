#include "llfz/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <regex>
#include <string>

#include "llfz/error.hpp"

namespace llfz {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::io, "write failed for " + path.string());
}

void put_u32le(std::vector<std::uint8_t>& out, std::uint32_t value) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

std::uint32_t get_u32le(std::span<const std::uint8_t> in, std::size_t offset) {
  if (offset + 4 > in.size()) throw Error(Errc::corrupt_stream, "truncated header");
  std::uint32_t value = 0;
  for (int i = 0; i < 4; ++i) value |= std::uint32_t{in[offset + i]} << (8 * i);
  return value;
}

namespace {

// Header tokens are separated by whitespace; '#' starts a comment that
// runs to the end of the line.
class PnmHeaderReader {
 public:
  explicit PnmHeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::string token() {
    skip_space();
    std::string out;
    while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_]) && bytes_[pos_] != '#')
      out.push_back(static_cast<char>(bytes_[pos_++]));
    if (out.empty()) throw Error(Errc::corrupt_stream, "truncated PNM header");
    return out;
  }

  std::uint32_t number() {
    const std::string text = token();
    std::uint32_t value = 0;
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || end != text.data() + text.size())
      throw Error(Errc::corrupt_stream, "bad PNM header field '" + text + "'");
    return value;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_start() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_]))
      throw Error(Errc::corrupt_stream, "missing PNM raster separator");
    return pos_ + 1;
  }

 private:
  void skip_space() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

PnmImage parse_pnm(std::span<const std::uint8_t> bytes) {
  PnmHeaderReader reader(bytes);
  const std::string magic = reader.token();
  PnmImage img;
  if (magic == "P5") {
    img.channels = 1;
  } else if (magic == "P6") {
    img.channels = 3;
  } else {
    throw Error(Errc::corrupt_stream, "unsupported PNM magic '" + magic + "'");
  }
  img.cols = reader.number();
  img.rows = reader.number();
  img.maxval = reader.number();
  if (img.rows == 0 || img.cols == 0 || img.maxval == 0 || img.maxval > 65535)
    throw Error(Errc::corrupt_stream, "invalid PNM header values");
  const std::size_t start = reader.raster_start();
  const std::size_t count = img.rows * img.cols * img.channels;
  const std::size_t width = img.maxval > 255 ? 2 : 1;
  if (bytes.size() < start + count * width) throw Error(Errc::corrupt_stream, "truncated PNM raster");
  img.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    // 16-bit samples are big-endian.
    const std::uint16_t v = width == 2
        ? static_cast<std::uint16_t>((bytes[start + 2 * i] << 8) | bytes[start + 2 * i + 1])
        : bytes[start + i];
    if (v > img.maxval) throw Error(Errc::corrupt_stream, "PNM sample exceeds maxval");
    img.values[i] = v;
  }
  return img;
}

PnmImage read_pnm(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return parse_pnm(bytes);
}

std::vector<std::uint8_t> serialize_pnm(const PnmImage& image) {
  const std::string header = std::string(image.channels == 3 ? "P6" : "P5") + "\n" +
                             std::to_string(image.cols) + " " + std::to_string(image.rows) + "\n" +
                             std::to_string(image.maxval) + "\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  const bool wide = image.maxval > 255;
  out.reserve(out.size() + image.values.size() * (wide ? 2 : 1));
  for (std::uint16_t v : image.values) {
    if (wide) out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
  }
  return out;
}

void write_pnm(const std::filesystem::path& path, const PnmImage& image) {
  write_file(path, serialize_pnm(image));
}

void write_pgm(const std::filesystem::path& path, std::size_t rows, std::size_t cols,
               std::span<const std::uint8_t> pixels) {
  if (pixels.size() != rows * cols) throw Error(Errc::dimension_mismatch, "PGM buffer size mismatch");
  PnmImage img;
  img.rows = rows;
  img.cols = cols;
  img.values.assign(pixels.begin(), pixels.end());
  write_pnm(path, img);
}

ViewSet read_view_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(Errc::io, dir.string() + " is not a directory");
  static const std::regex pattern(R"(view_(\d+)_(\d+)\.(pgm|ppm))");
  std::map<std::pair<std::size_t, std::size_t>, std::filesystem::path> found;
  std::size_t s_count = 0, t_count = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    std::smatch m;
    const std::string file = entry.path().filename().string();
    if (!std::regex_match(file, m, pattern)) continue;
    const std::size_t s = std::stoul(m[1]);
    const std::size_t t = std::stoul(m[2]);
    if (!found.emplace(std::pair{s, t}, entry.path()).second)
      throw Error(Errc::invalid_argument, "duplicate view " + file);
    s_count = std::max(s_count, s + 1);
    t_count = std::max(t_count, t + 1);
  }
  if (found.empty()) throw Error(Errc::io, "no view_<s>_<t> images in " + dir.string());
  if (found.size() != s_count * t_count)
    throw Error(Errc::dimension_mismatch, "view grid in " + dir.string() + " is incomplete");
  ViewSet set{s_count, t_count, {}};
  for (const auto& [key, path] : found) set.views.push_back(read_pnm(path));
  for (const auto& v : set.views)
    if (v.rows != set.views[0].rows || v.cols != set.views[0].cols)
      throw Error(Errc::dimension_mismatch, "views have inconsistent dimensions");
  return set;
}

std::vector<std::uint8_t> serialize_lfy(const LightField& lf) {
  std::vector<std::uint8_t> out = {'L', 'F', 'Y', '1'};
  out.reserve(20 + lf.dims().count());
  for (auto e : lf.dims().extents()) put_u32le(out, static_cast<std::uint32_t>(e));
  out.insert(out.end(), lf.samples().begin(), lf.samples().end());
  return out;
}

LightField parse_lfy(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 20 || std::memcmp(bytes.data(), "LFY1", 4) != 0)
    throw Error(Errc::corrupt_stream, "not an LFY1 light field");
  const Dims dims{get_u32le(bytes, 4), get_u32le(bytes, 8), get_u32le(bytes, 12), get_u32le(bytes, 16)};
  if (!dims.valid()) throw Error(Errc::corrupt_stream, "LFY1 header has zero extent");
  if (bytes.size() != 20 + dims.count())
    throw Error(Errc::corrupt_stream, "LFY1 payload size does not match header");
  return LightField(dims, std::vector<std::uint8_t>(bytes.begin() + 20, bytes.end()));
}

void write_lfy(const std::filesystem::path& path, const LightField& lf) {
  write_file(path, serialize_lfy(lf));
}

LightField read_lfy(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return parse_lfy(bytes);
}

}  // namespace llfz
