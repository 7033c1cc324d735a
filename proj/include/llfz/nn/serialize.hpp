#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "llfz/nn/tensor.hpp"

namespace llfz::nn {

/// One "LFM1" record: u32-le name length, name bytes, u32-le rank,
/// u32-le extents, then float64-le values.
struct Record {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

std::vector<std::uint8_t> serialize_records(std::span<const Record> records);
std::vector<Record> parse_records(std::span<const std::uint8_t> bytes);

}  // namespace llfz::nn
