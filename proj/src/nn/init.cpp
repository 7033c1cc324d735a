#include "llfz/nn/init.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "llfz/error.hpp"

namespace llfz::nn {

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  spare_ = radius * std::sin(2.0 * std::numbers::pi * u2);
  has_spare_ = true;
  return radius * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound == 0) throw Error(Errc::invalid_argument, "Rng::below(0)");
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % bound;
}

void he_normal(Tensor& weight, Rng& rng) {
  if (weight.rank() < 2) throw Error(Errc::invalid_argument, "he_normal needs a conv weight");
  const std::size_t fan_in = weight.numel() / weight.dim(0);
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (auto& w : weight.mutable_data()) w = stddev * rng.normal();
}

}  // namespace llfz::nn
