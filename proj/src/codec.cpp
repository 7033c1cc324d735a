#include "llfz/codec.hpp"

#include <algorithm>
#include <cstring>
#include <string>

#include "llfz/error.hpp"
#include "llfz/io.hpp"
#include "llfz/parallel.hpp"

namespace llfz {

bool BitReader::get_bit() {
  if (pos_ >= bit_size()) throw Error(Errc::corrupt_stream, "entropy decoder ran past chunk end");
  const bool bit = (bytes_[pos_ >> 3] >> (7 - (pos_ & 7))) & 1;
  ++pos_;
  return bit;
}

Tau make_tau(long value) {
  if (value < 0 || value > 255) throw Error(Errc::invalid_argument, "tau must be in [0, 255]");
  return Tau(static_cast<int>(value));
}

int RiceState::kappa() const {
  int k = 0;
  while ((std::uint64_t{count_} << k) < sum_) ++k;
  return k;
}

void RiceState::update(std::uint32_t m) {
  sum_ += m;
  if (++count_ == kResetCount) {
    sum_ >>= 1;
    count_ >>= 1;
  }
}

void rice_put(BitWriter& out, RiceState& state, std::uint32_t m) {
  const int k = state.kappa();
  const std::uint64_t q = std::uint64_t{m} >> k;
  if (q < kRiceEscapePrefix) {
    out.put_zeros(q);
    out.put_bit(true);
    out.put_bits(m, k);
  } else {
    out.put_zeros(kRiceEscapePrefix);
    out.put_bits(m, 32);
  }
  state.update(m);
}

std::uint32_t rice_get(BitReader& in, RiceState& state) {
  const int k = state.kappa();
  std::uint32_t zeros = 0;
  std::uint64_t m = 0;
  while (zeros < kRiceEscapePrefix && !in.get_bit()) ++zeros;
  if (zeros == kRiceEscapePrefix) {
    m = in.get_bits(32);
  } else {
    m = (std::uint64_t{zeros} << k) | in.get_bits(k);
    if (m > 0xffffffffu) throw Error(Errc::corrupt_stream, "Rice symbol overflow");
  }
  state.update(static_cast<std::uint32_t>(m));
  return static_cast<std::uint32_t>(m);
}

std::vector<std::uint8_t> rice_encode(std::span<const std::uint32_t> symbols) {
  BitWriter out;
  RiceState state;
  for (auto m : symbols) rice_put(out, state, m);
  return out.finish();
}

std::vector<std::uint32_t> rice_decode(std::span<const std::uint8_t> bytes, std::size_t count) {
  BitReader in(bytes);
  RiceState state;
  std::vector<std::uint32_t> out(count);
  for (auto& m : out) m = rice_get(in, state);
  return out;
}

int ContextState::bias() const {
  if (bias_count == 0) return 0;
  const std::int64_t n = bias_count;
  return bias_sum >= 0 ? static_cast<int>((2 * bias_sum + n) / (2 * n))
                       : -static_cast<int>((-2 * bias_sum + n) / (2 * n));
}

void ContextState::update_bias(int error) {
  bias_sum += error;
  if (++bias_count == RiceState::kResetCount) {
    bias_sum /= 2;
    bias_count /= 2;
  }
}

Neighbors gather_neighbors(std::span<const std::uint8_t> plane, std::size_t cols, std::size_t row,
                           std::size_t col) {
  const auto at = [&](std::size_t r, std::size_t c) { return static_cast<int>(plane[r * cols + c]); };
  const bool has_w = col > 0;
  const bool has_n = row > 0;
  Neighbors nb;
  if (has_w && has_n) {
    nb.w = at(row, col - 1);
    nb.n = at(row - 1, col);
  } else if (has_w) {
    nb.w = nb.n = at(row, col - 1);
  } else if (has_n) {
    nb.w = nb.n = at(row - 1, col);
  } else {
    nb.w = nb.n = 128;
  }
  nb.nw = (has_n && has_w) ? at(row - 1, col - 1) : nb.n;
  nb.ne = (has_n && col + 1 < cols) ? at(row - 1, col + 1) : nb.n;
  return nb;
}

int context_id(const Neighbors& nb) {
  static constexpr std::array<int, 7> kThresholds = {-16, -4, -1, 0, 1, 4, 16};
  const int d = nb.n - nb.w;
  int id = 0;
  for (int t : kThresholds) id += d >= t ? 1 : 0;
  return id;
}

int med_predict(const Neighbors& nb) {
  const int lo = std::min(nb.w, nb.n);
  const int hi = std::max(nb.w, nb.n);
  int p;
  if (nb.nw <= lo) {
    p = hi;
  } else if (nb.nw >= hi) {
    p = lo;
  } else {
    p = nb.w + nb.n - nb.nw;
  }
  return std::clamp(p, 0, 255);
}

int predict(const Neighbors& nb, const ContextState& ctx) {
  return std::clamp(med_predict(nb) + ctx.bias(), 0, 255);
}

std::span<const std::uint8_t> Bitstream::chunk(std::size_t i) const {
  std::size_t offset = 0;
  for (std::size_t j = 0; j < i; ++j) offset += chunk_lengths[j];
  return std::span<const std::uint8_t>(payload).subspan(offset, chunk_lengths.at(i));
}

std::vector<std::uint8_t> Bitstream::serialize() const {
  std::vector<std::uint8_t> out = {'L', 'F', 'Z', '1', kVersion};
  out.reserve(size_bytes());
  for (auto e : dims.extents()) put_u32le(out, static_cast<std::uint32_t>(e));
  out.push_back(static_cast<std::uint8_t>(tau.value));
  put_u32le(out, static_cast<std::uint32_t>(chunk_lengths.size()));
  for (auto len : chunk_lengths) put_u32le(out, len);
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

Bitstream Bitstream::parse(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 26 || std::memcmp(bytes.data(), "LFZ1", 4) != 0)
    throw Error(Errc::corrupt_stream, "not an LFZ1 bitstream");
  if (bytes[4] != kVersion)
    throw Error(Errc::corrupt_stream, "unsupported LFZ1 version " + std::to_string(bytes[4]));
  Bitstream bs;
  bs.dims = Dims{get_u32le(bytes, 5), get_u32le(bytes, 9), get_u32le(bytes, 13), get_u32le(bytes, 17)};
  if (!bs.dims.valid()) throw Error(Errc::corrupt_stream, "LFZ1 header has zero extent");
  bs.tau = Tau(bytes[21]);
  const std::uint32_t count = get_u32le(bytes, 22);
  if (std::uint64_t{count} != std::uint64_t{bs.dims.t} * bs.dims.v)
    throw Error(Errc::corrupt_stream, "chunk count does not match T*V");
  std::size_t offset = 26;
  std::uint64_t total = 0;
  bs.chunk_lengths.resize(count);
  for (auto& len : bs.chunk_lengths) {
    len = get_u32le(bytes, offset);
    offset += 4;
    if (len == 0) throw Error(Errc::corrupt_stream, "empty chunk");
    total += len;
  }
  if (bytes.size() - offset != total)
    throw Error(Errc::corrupt_stream, "payload size does not match the chunk table");
  bs.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(offset), bytes.end());
  return bs;
}

namespace {

// Flat-context samples (W == N == NW == NE) are coded as runs of zero
// residual indices. A run length is sent at the first flat sample of the
// run; the flat sample that ends a run carries fold(q) - 1 since it is
// known to be non-zero. Regular samples use the Rice coder of their
// context.
enum class RunMode { need_run, in_run, terminator };

struct PlaneGeometry {
  std::size_t t = 0;
  std::size_t v = 0;
  std::size_t rows = 0;  // S
  std::size_t cols = 0;  // U
};

// Closed-loop DPCM over one EPI-V plane.
struct PlaneDpcm {
  std::vector<std::uint8_t> recon;
  std::vector<int> index;
  std::vector<std::uint8_t> ctx;
  std::vector<std::uint8_t> flat;
};

PlaneDpcm run_dpcm(const LightField& lf, const PlaneGeometry& g, Tau tau) {
  const std::size_t n = g.rows * g.cols;
  PlaneDpcm out{std::vector<std::uint8_t>(n), std::vector<int>(n), std::vector<std::uint8_t>(n),
                std::vector<std::uint8_t>(n)};
  std::array<ContextState, kContextCount> contexts{};
  for (std::size_t r = 0, i = 0; r < g.rows; ++r) {
    for (std::size_t c = 0; c < g.cols; ++c, ++i) {
      const Neighbors nb = gather_neighbors(out.recon, g.cols, r, c);
      const int id = context_id(nb);
      const int base = med_predict(nb);
      const int pred = std::clamp(base + contexts[id].bias(), 0, 255);
      const int e = static_cast<int>(lf(r, g.t, c, g.v)) - pred;
      const int q = quantize_error(e, tau);
      const int y = std::clamp(pred + dequantize_error(q, tau), 0, 255);
      out.recon[i] = static_cast<std::uint8_t>(y);
      out.index[i] = q;
      out.ctx[i] = static_cast<std::uint8_t>(id);
      out.flat[i] = nb.flat() ? 1 : 0;
      contexts[id].update_bias(y - base);
    }
  }
  return out;
}

std::vector<std::uint8_t> entropy_code(const PlaneDpcm& d) {
  BitWriter out;
  std::array<RiceState, kContextCount> rice{};
  RiceState run_rice, term_rice;
  RunMode mode = RunMode::need_run;
  std::size_t pending = 0;
  const std::size_t n = d.index.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!d.flat[i]) {
      rice_put(out, rice[d.ctx[i]], fold(d.index[i]));
      continue;
    }
    switch (mode) {
      case RunMode::need_run: {
        std::size_t run = 0;
        for (std::size_t j = i; j < n; ++j) {
          if (!d.flat[j]) continue;
          if (d.index[j] != 0) break;
          ++run;
        }
        rice_put(out, run_rice, static_cast<std::uint32_t>(run));
        if (run == 0) {
          rice_put(out, term_rice, fold(d.index[i]) - 1);
        } else {
          pending = run - 1;
          mode = pending > 0 ? RunMode::in_run : RunMode::terminator;
        }
        break;
      }
      case RunMode::in_run:
        if (--pending == 0) mode = RunMode::terminator;
        break;
      case RunMode::terminator:
        rice_put(out, term_rice, fold(d.index[i]) - 1);
        mode = RunMode::need_run;
        break;
    }
  }
  return out.finish();
}

std::vector<PlaneGeometry> plane_geometries(const Dims& dims) {
  std::vector<PlaneGeometry> planes;
  planes.reserve(std::size_t{dims.t} * dims.v);
  for (std::size_t t = 0; t < dims.t; ++t)
    for (std::size_t v = 0; v < dims.v; ++v) planes.push_back({t, v, dims.s, dims.u});
  return planes;
}

void store_plane(LightField& lf, const PlaneGeometry& g, std::span<const std::uint8_t> recon) {
  for (std::size_t r = 0; r < g.rows; ++r)
    for (std::size_t c = 0; c < g.cols; ++c) lf(r, g.t, c, g.v) = recon[r * g.cols + c];
}

std::vector<std::uint8_t> decode_plane(std::span<const std::uint8_t> chunk, const PlaneGeometry& g,
                                       Tau tau) {
  const std::size_t n = g.rows * g.cols;
  std::vector<std::uint8_t> recon(n);
  std::array<ContextState, kContextCount> contexts{};
  RiceState run_rice, term_rice;
  RunMode mode = RunMode::need_run;
  std::size_t pending = 0;
  BitReader in(chunk);
  const auto terminator = [&] {
    const std::uint32_t m = rice_get(in, term_rice);
    if (m == 0xffffffffu) throw Error(Errc::corrupt_stream, "invalid run terminator");
    return unfold(m + 1);
  };
  for (std::size_t r = 0, i = 0; r < g.rows; ++r) {
    for (std::size_t c = 0; c < g.cols; ++c, ++i) {
      const Neighbors nb = gather_neighbors(recon, g.cols, r, c);
      const int id = context_id(nb);
      const int base = med_predict(nb);
      const int pred = std::clamp(base + contexts[id].bias(), 0, 255);
      int q = 0;
      if (!nb.flat()) {
        q = unfold(rice_get(in, contexts[id].rice));
      } else if (mode == RunMode::need_run) {
        const std::uint32_t run = rice_get(in, run_rice);
        if (run > n - i) throw Error(Errc::corrupt_stream, "run length exceeds plane");
        if (run == 0) {
          q = terminator();
        } else {
          pending = run - 1;
          mode = pending > 0 ? RunMode::in_run : RunMode::terminator;
        }
      } else if (mode == RunMode::in_run) {
        if (--pending == 0) mode = RunMode::terminator;
      } else {
        q = terminator();
        mode = RunMode::need_run;
      }
      if (q < -255 || q > 255) throw Error(Errc::corrupt_stream, "residual index out of range");
      const int y = std::clamp(pred + dequantize_error(q, tau), 0, 255);
      recon[i] = static_cast<std::uint8_t>(y);
      contexts[id].update_bias(y - base);
    }
  }
  const std::uint64_t used = in.bit_position();
  if ((used + 7) / 8 != chunk.size())
    throw Error(Errc::corrupt_stream, "chunk length does not match decoded symbols");
  for (std::uint64_t b = used; b < in.bit_size(); ++b)
    if (in.get_bit()) throw Error(Errc::corrupt_stream, "non-zero chunk padding");
  return recon;
}

}  // namespace

Bitstream encode(const LightField& lf, Tau tau) {
  const auto planes = plane_geometries(lf.dims());
  std::vector<std::vector<std::uint8_t>> chunks(planes.size());
  parallel_for(planes.size(), [&](std::size_t p) {
    chunks[p] = entropy_code(run_dpcm(lf, planes[p], tau));
  });
  Bitstream bs;
  bs.dims = lf.dims();
  bs.tau = tau;
  bs.chunk_lengths.reserve(chunks.size());
  for (const auto& c : chunks) {
    bs.chunk_lengths.push_back(static_cast<std::uint32_t>(c.size()));
    bs.payload.insert(bs.payload.end(), c.begin(), c.end());
  }
  return bs;
}

LightField encoder_reconstruction(const LightField& lf, Tau tau) {
  LightField out(lf.dims());
  const auto planes = plane_geometries(lf.dims());
  parallel_for(planes.size(), [&](std::size_t p) {
    store_plane(out, planes[p], run_dpcm(lf, planes[p], tau).recon);
  });
  return out;
}

LightField decode(const Bitstream& bs) {
  if (!bs.dims.valid()) throw Error(Errc::corrupt_stream, "bitstream has zero extent");
  const auto planes = plane_geometries(bs.dims);
  if (bs.chunk_lengths.size() != planes.size())
    throw Error(Errc::corrupt_stream, "chunk count does not match T*V");
  std::vector<std::size_t> offsets(planes.size() + 1, 0);
  for (std::size_t p = 0; p < planes.size(); ++p) offsets[p + 1] = offsets[p] + bs.chunk_lengths[p];
  if (offsets.back() != bs.payload.size())
    throw Error(Errc::corrupt_stream, "payload size does not match the chunk table");
  LightField out(bs.dims);
  parallel_for(planes.size(), [&](std::size_t p) {
    const auto chunk = std::span<const std::uint8_t>(bs.payload).subspan(offsets[p], bs.chunk_lengths[p]);
    store_plane(out, planes[p], decode_plane(chunk, planes[p], bs.tau));
  });
  return out;
}

BoundCheck verify_bound(const LightField& x, const LightField& y, Tau tau) {
  if (x.dims() != y.dims()) throw Error(Errc::dimension_mismatch, "light fields differ in extents");
  int worst = 0;
  const auto a = x.samples();
  const auto b = y.samples();
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(int{a[i]} - int{b[i]}));
  return {worst, worst <= tau.value};
}

}  // namespace llfz
