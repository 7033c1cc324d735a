#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace llfz {

/// MSB-first bit packer. finish() pads the last byte with zeros.
class BitWriter {
 public:
  void put_bit(bool bit) {
    acc_ = static_cast<std::uint8_t>((acc_ << 1) | (bit ? 1 : 0));
    if (++fill_ == 8) flush_byte();
  }
  void put_bits(std::uint64_t value, int count) {
    for (int i = count - 1; i >= 0; --i) put_bit((value >> i) & 1);
  }
  void put_zeros(std::uint64_t count) {
    for (std::uint64_t i = 0; i < count; ++i) put_bit(false);
  }
  std::uint64_t bit_count() const { return bytes_.size() * 8 + fill_; }

  std::vector<std::uint8_t> finish() {
    if (fill_ > 0) {
      acc_ = static_cast<std::uint8_t>(acc_ << (8 - fill_));
      flush_byte();
    }
    return std::move(bytes_);
  }

 private:
  void flush_byte() {
    bytes_.push_back(acc_);
    acc_ = 0;
    fill_ = 0;
  }
  std::vector<std::uint8_t> bytes_;
  std::uint8_t acc_ = 0;
  int fill_ = 0;
};

/// Reader over a fixed chunk. Reading past the end throws
/// Errc::corrupt_stream.
class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  bool get_bit();
  std::uint64_t get_bits(int count) {
    std::uint64_t value = 0;
    for (int i = 0; i < count; ++i) value = (value << 1) | (get_bit() ? 1 : 0);
    return value;
  }
  std::uint64_t bit_position() const { return pos_; }
  std::uint64_t bit_size() const { return std::uint64_t{bytes_.size()} * 8; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::uint64_t pos_ = 0;
};

}  // namespace llfz
