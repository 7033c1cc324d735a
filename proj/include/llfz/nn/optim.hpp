#pragma once

#include <cstdint>
#include <vector>

#include "llfz/nn/tensor.hpp"

namespace llfz::nn {

/// Adam with bias-corrected moments.
class Adam {
 public:
  struct Options {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  Adam(std::vector<Tensor> params, Options options);

  /// Applies one update from the accumulated gradients; parameters with no
  /// gradient are treated as having a zero gradient.
  void step();
  void zero_grad();

  void set_lr(double lr) { options_.lr = lr; }
  double lr() const { return options_.lr; }
  std::int64_t step_count() const { return steps_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  Options options_;
  std::int64_t steps_ = 0;
};

}  // namespace llfz::nn
