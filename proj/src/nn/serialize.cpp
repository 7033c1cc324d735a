#include "llfz/nn/serialize.hpp"

#include <bit>
#include <cstring>

#include "llfz/error.hpp"
#include "llfz/io.hpp"

namespace llfz::nn {

static_assert(std::endian::native == std::endian::little, "LFM1 I/O assumes a little-endian host");

std::vector<std::uint8_t> serialize_records(std::span<const Record> records) {
  std::vector<std::uint8_t> out = {'L', 'F', 'M', '1'};
  for (const auto& r : records) {
    if (r.values.size() != numel(r.shape))
      throw Error(Errc::dimension_mismatch, "record " + r.name + " has inconsistent size");
    put_u32le(out, static_cast<std::uint32_t>(r.name.size()));
    out.insert(out.end(), r.name.begin(), r.name.end());
    put_u32le(out, static_cast<std::uint32_t>(r.shape.size()));
    for (auto e : r.shape) put_u32le(out, static_cast<std::uint32_t>(e));
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(r.values.data());
    out.insert(out.end(), bytes, bytes + r.values.size() * sizeof(double));
  }
  return out;
}

std::vector<Record> parse_records(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "LFM1", 4) != 0)
    throw Error(Errc::corrupt_stream, "not an LFM1 model file");
  std::vector<Record> records;
  std::size_t pos = 4;
  while (pos < bytes.size()) {
    Record r;
    const std::uint32_t name_len = get_u32le(bytes, pos);
    pos += 4;
    if (pos + name_len > bytes.size()) throw Error(Errc::corrupt_stream, "truncated LFM1 record name");
    r.name.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                  bytes.begin() + static_cast<std::ptrdiff_t>(pos + name_len));
    pos += name_len;
    const std::uint32_t rank = get_u32le(bytes, pos);
    pos += 4;
    if (rank > 8) throw Error(Errc::corrupt_stream, "LFM1 record rank too large");
    for (std::uint32_t i = 0; i < rank; ++i, pos += 4) r.shape.push_back(get_u32le(bytes, pos));
    const std::size_t count = numel(r.shape);
    if (pos + count * sizeof(double) > bytes.size())
      throw Error(Errc::corrupt_stream, "truncated LFM1 record " + r.name);
    r.values.resize(count);
    std::memcpy(r.values.data(), bytes.data() + pos, count * sizeof(double));
    pos += count * sizeof(double);
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace llfz::nn
