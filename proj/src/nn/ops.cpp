#include "llfz/nn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "llfz/error.hpp"
#include "llfz/parallel.hpp"

namespace llfz::nn {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw Error(Errc::dimension_mismatch, std::string(op) + ": shapes " + to_string(a.shape()) +
                                              " and " + to_string(b.shape()) + " differ");
}

void accumulate(Node& parent, std::span<const double> delta) {
  if (!parent.requires_grad) return;
  auto& g = parent.grad_buffer();
  for (std::size_t i = 0; i < delta.size(); ++i) g[i] += delta[i];
}

// ---------------------------------------------------------------------------
// Convolution via im2col + GEMM. 2D inputs are handled as 3D with a unit
// depth axis. Columns are flattened (batch, output pixel) pairs and are
// processed in fixed-size chunks; chunk boundaries depend only on shapes,
// so reductions happen in the same order for any worker count.

constexpr std::size_t kChunkColumns = 4096;

struct ConvGeometry {
  std::size_t batch = 0, cin = 0, cout = 0;
  std::array<std::size_t, 3> in{1, 1, 1}, out{1, 1, 1}, k{1, 1, 1}, stride{1, 1, 1}, dil{1, 1, 1},
      pad{0, 0, 0};
  std::size_t in_pixels = 0, out_pixels = 0, kvol = 0, rows = 0;

  std::size_t chunk_columns() const {
    if (out_pixels >= kChunkColumns) return kChunkColumns;
    return (kChunkColumns / out_pixels) * out_pixels;
  }
  std::size_t total_columns() const { return batch * out_pixels; }
  std::size_t chunk_count() const {
    const std::size_t c = chunk_columns();
    return (total_columns() + c - 1) / c;
  }
};

ConvGeometry conv_geometry(const Tensor& x, const Tensor& w, const Tensor& b, const ConvSpec& spec) {
  const std::size_t r = spec.spatial_rank();
  if (r != 2 && r != 3) throw Error(Errc::invalid_argument, "conv supports 2 or 3 spatial axes");
  if (spec.stride.size() != r || spec.dilation.size() != r || spec.padding.size() != r)
    throw Error(Errc::invalid_argument, "conv spec axes are inconsistent");
  if (x.rank() != r + 2 || x.dim(1) != spec.in_channels)
    throw Error(Errc::dimension_mismatch, "conv input " + to_string(x.shape()) +
                                              " does not match the convolution");
  if (w.shape() != spec.weight_shape())
    throw Error(Errc::dimension_mismatch, "conv weight " + to_string(w.shape()) + " expected " +
                                              to_string(spec.weight_shape()));
  if (b.shape() != Shape{spec.out_channels})
    throw Error(Errc::dimension_mismatch, "conv bias shape mismatch");
  ConvGeometry g;
  g.batch = x.dim(0);
  g.cin = spec.in_channels;
  g.cout = spec.out_channels;
  const std::size_t off = 3 - r;
  for (std::size_t a = 0; a < r; ++a) {
    if (spec.stride[a] == 0 || spec.dilation[a] == 0 || spec.kernel[a] == 0)
      throw Error(Errc::invalid_argument, "conv stride, dilation and kernel must be positive");
    g.in[off + a] = x.dim(2 + a);
    g.k[off + a] = spec.kernel[a];
    g.stride[off + a] = spec.stride[a];
    g.dil[off + a] = spec.dilation[a];
    g.pad[off + a] = spec.padding[a];
    g.out[off + a] = spec.output_extent(a, g.in[off + a]);
  }
  g.in_pixels = g.in[0] * g.in[1] * g.in[2];
  g.out_pixels = g.out[0] * g.out[1] * g.out[2];
  g.kvol = g.k[0] * g.k[1] * g.k[2];
  g.rows = g.cin * g.kvol;
  return g;
}

// Walks the column matrix of columns [begin, end) in runs that share one
// output row (same batch item, depth and height). Within a run, a kernel
// row reads a strided stretch of one input row, so the copies are tight
// loops. fn(dst, src, count, first, step, width): the column entries dst[0..count)
// map to src[first + t * step] when that index is inside [0, width), else
// to zero padding. src is null when the whole input row lies in padding.
template <typename Fn>
void for_each_col_run(const ConvGeometry& g, std::size_t begin, std::size_t end, Fn&& fn) {
  const std::size_t cols = end - begin;
  const auto D = static_cast<std::ptrdiff_t>(g.in[0]);
  const auto H = static_cast<std::ptrdiff_t>(g.in[1]);
  const auto W = static_cast<std::ptrdiff_t>(g.in[2]);
  for (std::size_t at = begin; at < end;) {
    const std::size_t n = at / g.out_pixels;
    std::size_t p = at % g.out_pixels;
    const std::size_t ow = p % g.out[2];
    p /= g.out[2];
    const std::size_t oh = p % g.out[1];
    const std::size_t od = p / g.out[1];
    const std::size_t len = std::min(g.out[2] - ow, end - at);
    const std::size_t j0 = at - begin;
    const auto d0 = static_cast<std::ptrdiff_t>(od * g.stride[0]) - static_cast<std::ptrdiff_t>(g.pad[0]);
    const auto h0 = static_cast<std::ptrdiff_t>(oh * g.stride[1]) - static_cast<std::ptrdiff_t>(g.pad[1]);
    const auto w0 = static_cast<std::ptrdiff_t>(ow * g.stride[2]) - static_cast<std::ptrdiff_t>(g.pad[2]);
    std::size_t row = 0;
    for (std::size_t c = 0; c < g.cin; ++c) {
      const std::size_t plane = (n * g.cin + c) * g.in_pixels;
      for (std::size_t kd = 0; kd < g.k[0]; ++kd) {
        const std::ptrdiff_t id = d0 + static_cast<std::ptrdiff_t>(kd * g.dil[0]);
        for (std::size_t kh = 0; kh < g.k[1]; ++kh) {
          const std::ptrdiff_t ih = h0 + static_cast<std::ptrdiff_t>(kh * g.dil[1]);
          const bool inside = id >= 0 && id < D && ih >= 0 && ih < H;
          const std::size_t line = plane + static_cast<std::size_t>(inside ? (id * H + ih) * W : 0);
          for (std::size_t kw = 0; kw < g.k[2]; ++kw, ++row)
            fn(row * cols + j0, inside, line, len, w0 + static_cast<std::ptrdiff_t>(kw * g.dil[2]),
               static_cast<std::ptrdiff_t>(g.stride[2]), W);
        }
      }
    }
    at += len;
  }
}

// Splits columns [begin, end) into runs within one batch item:
// fn(item, first output pixel, first column offset, length).
template <typename Fn>
void for_each_item_run(const ConvGeometry& g, std::size_t begin, std::size_t end, Fn&& fn) {
  for (std::size_t at = begin; at < end;) {
    const std::size_t n = at / g.out_pixels;
    const std::size_t p = at % g.out_pixels;
    const std::size_t len = std::min(g.out_pixels - p, end - at);
    fn(n, p, at - begin, len);
    at += len;
  }
}

// First and one-past-last t with 0 <= first + t * step < width.
std::pair<std::size_t, std::size_t> valid_span(std::size_t len, std::ptrdiff_t first, std::ptrdiff_t step,
                                               std::ptrdiff_t width) {
  std::ptrdiff_t lo = 0, hi = static_cast<std::ptrdiff_t>(len);
  if (first < 0) lo = (-first + step - 1) / step;
  if (first + (hi - 1) * step >= width) hi = width - first <= 0 ? 0 : (width - first + step - 1) / step;
  if (hi < lo) hi = lo;
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

void im2col(const ConvGeometry& g, std::size_t begin, std::size_t end, const double* x, double* col) {
  for_each_col_run(g, begin, end,
                   [&](std::size_t at, bool inside, std::size_t line, std::size_t len, std::ptrdiff_t first,
                       std::ptrdiff_t step, std::ptrdiff_t width) {
                     double* dst = col + at;
                     if (!inside) {
                       std::fill(dst, dst + len, 0.0);
                       return;
                     }
                     const auto [lo, hi] = valid_span(len, first, step, width);
                     std::fill(dst, dst + lo, 0.0);
                     const double* src = x + line;
                     for (std::size_t t = lo; t < hi; ++t) dst[t] = src[first + static_cast<std::ptrdiff_t>(t) * step];
                     std::fill(dst + hi, dst + len, 0.0);
                   });
}

void col2im(const ConvGeometry& g, std::size_t begin, std::size_t end, const double* col, double* dx) {
  for_each_col_run(g, begin, end,
                   [&](std::size_t at, bool inside, std::size_t line, std::size_t len, std::ptrdiff_t first,
                       std::ptrdiff_t step, std::ptrdiff_t width) {
                     if (!inside) return;
                     const auto [lo, hi] = valid_span(len, first, step, width);
                     const double* src = col + at;
                     double* dst = dx + line;
                     for (std::size_t t = lo; t < hi; ++t) dst[first + static_cast<std::ptrdiff_t>(t) * step] += src[t];
                   });
}

}  // namespace

std::size_t ConvSpec::kernel_volume() const {
  std::size_t v = 1;
  for (auto k : kernel) v *= k;
  return v;
}

std::size_t ConvSpec::output_extent(std::size_t axis, std::size_t in) const {
  const auto span = static_cast<std::ptrdiff_t>(in + 2 * padding[axis]) -
                    static_cast<std::ptrdiff_t>(dilation[axis] * (kernel[axis] - 1)) - 1;
  if (span < 0) throw Error(Errc::dimension_mismatch, "conv kernel larger than padded input");
  return static_cast<std::size_t>(span) / stride[axis] + 1;
}

Shape ConvSpec::weight_shape() const {
  Shape s{out_channels, in_channels};
  s.insert(s.end(), kernel.begin(), kernel.end());
  return s;
}

ConvSpec ConvSpec::same(std::size_t rank, std::size_t in, std::size_t out, std::size_t k,
                        std::size_t dilation) {
  ConvSpec spec;
  spec.in_channels = in;
  spec.out_channels = out;
  spec.kernel.assign(rank, k);
  spec.stride.assign(rank, 1);
  spec.dilation.assign(rank, dilation);
  spec.padding.assign(rank, dilation * (k - 1) / 2);
  return spec;
}

Tensor conv(const Tensor& x, const Tensor& weight, const Tensor& bias, const ConvSpec& spec) {
  const ConvGeometry g = conv_geometry(x, weight, bias, spec);
  Shape out_shape{g.batch, g.cout};
  for (std::size_t a = 0; a < spec.spatial_rank(); ++a) out_shape.push_back(g.out[3 - spec.spatial_rank() + a]);
  std::vector<double> out(g.batch * g.cout * g.out_pixels);

  const std::size_t chunk = g.chunk_columns();
  const std::size_t total = g.total_columns();
  const double* xd = x.data().data();
  const double* bd = bias.data().data();
  Eigen::Map<const RowMatrix> wm(weight.data().data(), static_cast<Eigen::Index>(g.cout),
                                 static_cast<Eigen::Index>(g.rows));

  parallel_for(g.chunk_count(), [&](std::size_t c) {
    const std::size_t begin = c * chunk;
    const std::size_t end = std::min(total, begin + chunk);
    const auto cols = static_cast<Eigen::Index>(end - begin);
    RowMatrix col(static_cast<Eigen::Index>(g.rows), cols);
    im2col(g, begin, end, xd, col.data());
    RowMatrix res = wm * col;
    for_each_item_run(g, begin, end, [&](std::size_t n, std::size_t p, std::size_t j, std::size_t len) {
      for (std::size_t o = 0; o < g.cout; ++o) {
        const double* src = res.data() + o * (end - begin) + j;
        double* dst = out.data() + (n * g.cout + o) * g.out_pixels + p;
        for (std::size_t i = 0; i < len; ++i) dst[i] = src[i] + bd[o];
      }
    });
  });

  return Tensor::make_result(
      std::move(out_shape), std::move(out), {x, weight, bias}, [g](Node& self) {
        Node& xn = *self.parents[0];
        Node& wn = *self.parents[1];
        Node& bn = *self.parents[2];
        const std::size_t chunk = g.chunk_columns();
        const std::size_t total = g.total_columns();
        const std::size_t chunks = g.chunk_count();
        const std::size_t wave = std::max<std::size_t>(1, workers());
        Eigen::Map<const RowMatrix> wm(wn.data.data(), static_cast<Eigen::Index>(g.cout),
                                       static_cast<Eigen::Index>(g.rows));
        struct Partial {
          RowMatrix dw;
          Eigen::VectorXd db;
          RowMatrix dcol;
          std::size_t begin = 0, end = 0;
        };
        for (std::size_t first = 0; first < chunks; first += wave) {
          const std::size_t count = std::min(wave, chunks - first);
          std::vector<Partial> parts(count);
          parallel_for(count, [&](std::size_t i) {
            const std::size_t begin = (first + i) * chunk;
            const std::size_t end = std::min(total, begin + chunk);
            auto& part = parts[i];
            part.begin = begin;
            part.end = end;
            const auto cols = static_cast<Eigen::Index>(end - begin);
            RowMatrix go(static_cast<Eigen::Index>(g.cout), cols);
            for_each_item_run(g, begin, end, [&](std::size_t n, std::size_t p, std::size_t j, std::size_t len) {
              for (std::size_t o = 0; o < g.cout; ++o) {
                const double* src = self.grad.data() + (n * g.cout + o) * g.out_pixels + p;
                std::copy(src, src + len, go.data() + o * (end - begin) + j);
              }
            });
            if (wn.requires_grad) {
              RowMatrix col(static_cast<Eigen::Index>(g.rows), cols);
              im2col(g, begin, end, xn.data.data(), col.data());
              part.dw = go * col.transpose();
            }
            if (bn.requires_grad) part.db = go.rowwise().sum();
            if (xn.requires_grad) part.dcol = wm.transpose() * go;
          });
          for (auto& part : parts) {
            if (wn.requires_grad) {
              auto& gw = wn.grad_buffer();
              const double* src = part.dw.data();
              for (std::size_t i = 0; i < gw.size(); ++i) gw[i] += src[i];
            }
            if (bn.requires_grad) {
              auto& gb = bn.grad_buffer();
              for (std::size_t o = 0; o < g.cout; ++o) gb[o] += part.db(static_cast<Eigen::Index>(o));
            }
            if (xn.requires_grad) col2im(g, part.begin, part.end, part.dcol.data(), xn.grad_buffer().data());
          }
        }
      });
}

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, const ConvSpec& spec) {
  if (spec.spatial_rank() != 2) throw Error(Errc::invalid_argument, "conv2d needs a 2D spec");
  return conv(x, weight, bias, spec);
}

Tensor conv3d(const Tensor& x, const Tensor& weight, const Tensor& bias, const ConvSpec& spec) {
  if (spec.spatial_rank() != 3) throw Error(Errc::invalid_argument, "conv3d needs a 3D spec");
  return conv(x, weight, bias, spec);
}

// ---------------------------------------------------------------------------
// Pooling / upsampling over up to three spatial axes.

namespace {

struct SpatialLayout {
  std::size_t planes = 0;  // N * C
  std::array<std::size_t, 3> in{1, 1, 1}, out{1, 1, 1}, factor{1, 1, 1};
};

SpatialLayout spatial_layout(const Tensor& x, const std::vector<std::size_t>& factors, const char* op) {
  const std::size_t r = factors.size();
  if (r < 1 || r > 3 || x.rank() != r + 2)
    throw Error(Errc::dimension_mismatch, std::string(op) + ": input " + to_string(x.shape()) +
                                              " does not match " + std::to_string(r) + " factors");
  SpatialLayout l;
  l.planes = x.dim(0) * x.dim(1);
  for (std::size_t a = 0; a < r; ++a) {
    if (factors[a] == 0) throw Error(Errc::invalid_argument, std::string(op) + ": zero factor");
    l.in[3 - r + a] = x.dim(2 + a);
    l.factor[3 - r + a] = factors[a];
  }
  return l;
}

template <typename Fn>
void for_each_cell(const std::array<std::size_t, 3>& ext, Fn&& fn) {
  std::size_t i = 0;
  for (std::size_t d = 0; d < ext[0]; ++d)
    for (std::size_t h = 0; h < ext[1]; ++h)
      for (std::size_t w = 0; w < ext[2]; ++w, ++i) fn(i, d, h, w);
}

}  // namespace

Tensor avg_pool(const Tensor& x, const std::vector<std::size_t>& factors) {
  SpatialLayout l = spatial_layout(x, factors, "avg_pool");
  for (int a = 0; a < 3; ++a) l.out[a] = (l.in[a] + l.factor[a] - 1) / l.factor[a];
  const std::size_t in_px = l.in[0] * l.in[1] * l.in[2];
  const std::size_t out_px = l.out[0] * l.out[1] * l.out[2];
  const double inv = 1.0 / static_cast<double>(l.factor[0] * l.factor[1] * l.factor[2]);

  // Visits each (output cell, source cell) pair, clamping sources that
  // fall in the replication padding.
  auto visit = [l, in_px, out_px](auto&& fn) {
    for (std::size_t p = 0; p < l.planes; ++p)
      for_each_cell(l.out, [&](std::size_t o, std::size_t d, std::size_t h, std::size_t w) {
        for (std::size_t fd = 0; fd < l.factor[0]; ++fd)
          for (std::size_t fh = 0; fh < l.factor[1]; ++fh)
            for (std::size_t fw = 0; fw < l.factor[2]; ++fw) {
              const std::size_t sd = std::min(d * l.factor[0] + fd, l.in[0] - 1);
              const std::size_t sh = std::min(h * l.factor[1] + fh, l.in[1] - 1);
              const std::size_t sw = std::min(w * l.factor[2] + fw, l.in[2] - 1);
              fn(p * out_px + o, p * in_px + (sd * l.in[1] + sh) * l.in[2] + sw);
            }
      });
  };

  std::vector<double> out(l.planes * out_px, 0.0);
  const auto xd = x.data();
  visit([&](std::size_t o, std::size_t s) { out[o] += xd[s]; });
  for (auto& v : out) v *= inv;

  Shape shape{x.dim(0), x.dim(1)};
  for (std::size_t a = 0; a < factors.size(); ++a) shape.push_back(l.out[3 - factors.size() + a]);
  return Tensor::make_result(std::move(shape), std::move(out), {x}, [visit, inv](Node& self) {
    Node& xn = *self.parents[0];
    auto& gx = xn.grad_buffer();
    visit([&](std::size_t o, std::size_t s) { gx[s] += self.grad[o] * inv; });
  });
}

Tensor upsample_nearest(const Tensor& x, const std::vector<std::size_t>& factors,
                        const std::vector<std::size_t>& target) {
  SpatialLayout l = spatial_layout(x, factors, "upsample_nearest");
  if (target.size() != factors.size())
    throw Error(Errc::dimension_mismatch, "upsample_nearest: target rank mismatch");
  for (std::size_t a = 0; a < factors.size(); ++a) {
    const std::size_t ax = 3 - factors.size() + a;
    l.out[ax] = target[a];
    if (target[a] == 0 || (target[a] + l.factor[ax] - 1) / l.factor[ax] != l.in[ax])
      throw Error(Errc::dimension_mismatch, "upsample_nearest: target extent inconsistent with input");
  }
  const std::size_t in_px = l.in[0] * l.in[1] * l.in[2];
  const std::size_t out_px = l.out[0] * l.out[1] * l.out[2];
  auto visit = [l, in_px, out_px](auto&& fn) {
    for (std::size_t p = 0; p < l.planes; ++p)
      for_each_cell(l.out, [&](std::size_t o, std::size_t d, std::size_t h, std::size_t w) {
        fn(p * out_px + o,
           p * in_px + ((d / l.factor[0]) * l.in[1] + h / l.factor[1]) * l.in[2] + w / l.factor[2]);
      });
  };
  std::vector<double> out(l.planes * out_px);
  const auto xd = x.data();
  visit([&](std::size_t o, std::size_t s) { out[o] = xd[s]; });
  Shape shape{x.dim(0), x.dim(1)};
  shape.insert(shape.end(), target.begin(), target.end());
  return Tensor::make_result(std::move(shape), std::move(out), {x}, [visit](Node& self) {
    auto& gx = self.parents[0]->grad_buffer();
    visit([&](std::size_t o, std::size_t s) { gx[s] += self.grad[o]; });
  });
}

Tensor upsample_nearest(const Tensor& x, const std::vector<std::size_t>& factors) {
  std::vector<std::size_t> target;
  for (std::size_t a = 0; a < factors.size(); ++a)
    target.push_back(x.rank() > 2 + a ? x.dim(2 + a) * factors[a] : 0);
  return upsample_nearest(x, factors, target);
}

// ---------------------------------------------------------------------------
// Elementwise and structural ops.

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.data().begin(), x.data().end());
  for (auto& v : out) v = v > 0 ? v : 0.0;
  return Tensor::make_result(x.shape(), std::move(out), {x}, [](Node& self) {
    Node& xn = *self.parents[0];
    auto& g = xn.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (xn.data[i] > 0) g[i] += self.grad[i];
  });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) throw Error(Errc::invalid_argument, "softmax axis out of range");
  std::size_t outer = 1, inner = 1;
  for (std::size_t a = 0; a < axis; ++a) outer *= x.dim(a);
  for (std::size_t a = axis + 1; a < x.rank(); ++a) inner *= x.dim(a);
  const std::size_t n = x.dim(axis);
  const auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = o * n * inner + i;
      double peak = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < n; ++k) peak = std::max(peak, xd[base + k * inner]);
      double total = 0;
      for (std::size_t k = 0; k < n; ++k) total += out[base + k * inner] = std::exp(xd[base + k * inner] - peak);
      for (std::size_t k = 0; k < n; ++k) out[base + k * inner] /= total;
    }
  return Tensor::make_result(x.shape(), std::move(out), {x}, [outer, inner, n](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    const auto& y = self.data;
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t i = 0; i < inner; ++i) {
        const std::size_t base = o * n * inner + i;
        double dot = 0;
        for (std::size_t k = 0; k < n; ++k) dot += self.grad[base + k * inner] * y[base + k * inner];
        for (std::size_t k = 0; k < n; ++k)
          g[base + k * inner] += y[base + k * inner] * (self.grad[base + k * inner] - dot);
      }
  });
}

Tensor clamp(const Tensor& x, const Tensor& lo, const Tensor& hi) {
  require_same_shape(x, lo, "clamp");
  require_same_shape(x, hi, "clamp");
  const auto xd = x.data(), ld = lo.data(), hd = hi.data();
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) {
    if (ld[i] > hd[i]) throw Error(Errc::invalid_argument, "clamp lower bound exceeds upper bound");
    out[i] = std::min(std::max(xd[i], ld[i]), hd[i]);
  }
  // Bounds are treated as constants.
  return Tensor::make_result(x.shape(), std::move(out), {x}, [lo, hi](Node& self) {
    Node& xn = *self.parents[0];
    auto& g = xn.grad_buffer();
    const auto l = lo.data(), h = hi.data();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (xn.data[i] > l[i] && xn.data[i] < h[i]) g[i] += self.grad[i];
  });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  return clamp(x, Tensor::full(x.shape(), lo), Tensor::full(x.shape(), hi));
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.data().begin(), a.data().end());
  const auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bd[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    accumulate(*self.parents[0], self.grad);
    accumulate(*self.parents[1], self.grad);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.data().begin(), a.data().end());
  const auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bd[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    accumulate(*self.parents[0], self.grad);
    Node& bn = *self.parents[1];
    if (bn.requires_grad) {
      auto& g = bn.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const auto ad = a.data(), bd = b.data();
  std::vector<double> out(ad.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * bd[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    Node& an = *self.parents[0];
    Node& bn = *self.parents[1];
    if (an.requires_grad) {
      auto& g = an.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bn.data[i];
    }
    if (bn.requires_grad) {
      auto& g = bn.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * an.data[i];
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  std::vector<double> out(x.data().begin(), x.data().end());
  for (auto& v : out) v *= factor;
  return Tensor::make_result(x.shape(), std::move(out), {x}, [factor](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
  });
}

Tensor sum(const Tensor& x) {
  const auto xd = x.data();
  const double total = std::accumulate(xd.begin(), xd.end(), 0.0);
  return Tensor::make_result({1}, {total}, {x}, [](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (auto& v : g) v += self.grad[0];
  });
}

Tensor l2_loss(const Tensor& pred, const Tensor& target) {
  require_same_shape(pred, target, "l2_loss");
  const auto p = pred.data(), t = target.data();
  double total = 0;
  for (std::size_t i = 0; i < p.size(); ++i) total += (p[i] - t[i]) * (p[i] - t[i]);
  const double count = static_cast<double>(p.size());
  return Tensor::make_result({1}, {total / count}, {pred, target}, [count](Node& self) {
    Node& pn = *self.parents[0];
    Node& tn = *self.parents[1];
    const double k = 2.0 * self.grad[0] / count;
    if (pn.requires_grad) {
      auto& g = pn.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += k * (pn.data[i] - tn.data[i]);
    }
    if (tn.requires_grad) {
      auto& g = tn.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= k * (pn.data[i] - tn.data[i]);
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.numel())
    throw Error(Errc::dimension_mismatch, "reshape " + to_string(x.shape()) + " to " + to_string(shape));
  std::vector<double> out(x.data().begin(), x.data().end());
  return Tensor::make_result(std::move(shape), std::move(out), {x}, [](Node& self) {
    accumulate(*self.parents[0], self.grad);
  });
}

namespace {

// Maps each output flat index to its input flat index.
std::vector<std::size_t> permutation_map(const Shape& in, const std::vector<std::size_t>& order) {
  const std::size_t r = in.size();
  std::vector<std::size_t> in_stride(r, 1);
  for (std::size_t a = r; a-- > 1;) in_stride[a - 1] = in_stride[a] * in[a];
  Shape out_ext(r);
  std::vector<std::size_t> stride(r);
  for (std::size_t a = 0; a < r; ++a) {
    out_ext[a] = in[order[a]];
    stride[a] = in_stride[order[a]];
  }
  std::vector<std::size_t> map(numel(in));
  std::vector<std::size_t> idx(r, 0);
  std::size_t src = 0;
  for (std::size_t o = 0; o < map.size(); ++o) {
    map[o] = src;
    for (std::size_t a = r; a-- > 0;) {
      src += stride[a];
      if (++idx[a] < out_ext[a]) break;
      src -= stride[a] * out_ext[a];
      idx[a] = 0;
    }
  }
  return map;
}

}  // namespace

Tensor permute(const Tensor& x, const std::vector<std::size_t>& order) {
  const std::size_t r = x.rank();
  if (order.size() != r) throw Error(Errc::invalid_argument, "permute order rank mismatch");
  std::vector<bool> used(r, false);
  for (auto a : order) {
    if (a >= r || used[a]) throw Error(Errc::invalid_argument, "permute order is not a permutation");
    used[a] = true;
  }
  Shape shape(r);
  for (std::size_t a = 0; a < r; ++a) shape[a] = x.dim(order[a]);
  auto map = std::make_shared<std::vector<std::size_t>>(permutation_map(x.shape(), order));
  const auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t o = 0; o < out.size(); ++o) out[o] = xd[(*map)[o]];
  return Tensor::make_result(std::move(shape), std::move(out), {x}, [map](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t o = 0; o < self.grad.size(); ++o) g[(*map)[o]] += self.grad[o];
  });
}

Tensor select(const Tensor& x, std::size_t axis, std::size_t index) {
  if (axis >= x.rank() || index >= x.dim(axis))
    throw Error(Errc::invalid_argument, "select index out of range");
  std::size_t outer = 1, inner = 1;
  for (std::size_t a = 0; a < axis; ++a) outer *= x.dim(a);
  for (std::size_t a = axis + 1; a < x.rank(); ++a) inner *= x.dim(a);
  const std::size_t n = x.dim(axis);
  Shape shape;
  for (std::size_t a = 0; a < x.rank(); ++a)
    if (a != axis) shape.push_back(x.dim(a));
  if (shape.empty()) shape.push_back(1);
  const auto xd = x.data();
  std::vector<double> out(outer * inner);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] = xd[(o * n + index) * inner + i];
  return Tensor::make_result(std::move(shape), std::move(out), {x}, [outer, inner, n, index](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t i = 0; i < inner; ++i) g[(o * n + index) * inner + i] += self.grad[o * inner + i];
  });
}

}  // namespace llfz::nn
