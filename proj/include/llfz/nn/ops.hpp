#pragma once

#include <cstddef>
#include <vector>

#include "llfz/nn/tensor.hpp"

namespace llfz::nn {

/// Convolution geometry for 2D ([N,C,H,W]) or 3D ([N,C,D,H,W]) inputs.
/// All per-axis vectors have one entry per spatial axis.
struct ConvSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::vector<std::size_t> kernel;
  std::vector<std::size_t> stride;
  std::vector<std::size_t> dilation;
  std::vector<std::size_t> padding;

  std::size_t spatial_rank() const { return kernel.size(); }
  std::size_t kernel_volume() const;
  /// floor((in + 2 pad - dilation (k - 1) - 1) / stride) + 1
  std::size_t output_extent(std::size_t axis, std::size_t in) const;
  Shape weight_shape() const;

  /// Stride-1 convolution with "same" zero padding.
  static ConvSpec same(std::size_t rank, std::size_t in, std::size_t out, std::size_t k,
                       std::size_t dilation = 1);
};

/// Cross-correlation with zero padding; weight [Cout, Cin, k...], bias [Cout].
Tensor conv(const Tensor& x, const Tensor& weight, const Tensor& bias, const ConvSpec& spec);
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, const ConvSpec& spec);
Tensor conv3d(const Tensor& x, const Tensor& weight, const Tensor& bias, const ConvSpec& spec);

/// Average pooling over non-overlapping blocks of the spatial axes of
/// [N,C,...]. Axes not divisible by their factor are replication-padded
/// on the high side, so the output extent is ceil(in / factor).
Tensor avg_pool(const Tensor& x, const std::vector<std::size_t>& factors);

/// Nearest-neighbour upsampling; output spatial extents are `target`
/// (each at most in * factor), which crops away pooling padding.
Tensor upsample_nearest(const Tensor& x, const std::vector<std::size_t>& factors,
                        const std::vector<std::size_t>& target);
Tensor upsample_nearest(const Tensor& x, const std::vector<std::size_t>& factors);

/// Subgradient at 0 is 0.
Tensor relu(const Tensor& x);

Tensor softmax(const Tensor& x, std::size_t axis);

/// Elementwise clamp to [lo, hi]. The gradient passes strictly inside the
/// interval and is 0 on or outside the bounds.
Tensor clamp(const Tensor& x, const Tensor& lo, const Tensor& hi);
Tensor clamp(const Tensor& x, double lo, double hi);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor sum(const Tensor& x);

/// Mean of squared differences.
Tensor l2_loss(const Tensor& pred, const Tensor& target);

Tensor reshape(const Tensor& x, Shape shape);
/// Output axis i is input axis order[i].
Tensor permute(const Tensor& x, const std::vector<std::size_t>& order);
/// Removes `axis` by taking slice `index`.
Tensor select(const Tensor& x, std::size_t axis, std::size_t index);

}  // namespace llfz::nn
