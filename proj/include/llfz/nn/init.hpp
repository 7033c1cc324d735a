#pragma once

#include <cstdint>
#include <random>

#include "llfz/nn/tensor.hpp"

namespace llfz::nn {

/// Deterministic source for parameter initialisation: std::mt19937_64
/// feeding a Box-Muller transform (53-bit uniforms). Independent of the
/// standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform();  // [0, 1)
  double normal();   // N(0, 1)
  std::uint64_t below(std::uint64_t bound);  // [0, bound)

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0;
};

/// Fills a conv weight [Cout, Cin, k...] with N(0, 2 / fan_in) samples,
/// fan_in = Cin * prod(k).
void he_normal(Tensor& weight, Rng& rng);

}  // namespace llfz::nn
