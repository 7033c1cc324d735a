#include "llfz/dnet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "llfz/error.hpp"
#include "llfz/io.hpp"
#include "llfz/nn/init.hpp"
#include "llfz/nn/optim.hpp"
#include "llfz/nn/serialize.hpp"

namespace llfz {

using nn::ConvSpec;
using nn::Tensor;

std::string_view name(Variant v) {
  switch (v) {
    case Variant::r1: return "1r";
    case Variant::r3: return "3r";
    case Variant::r4: return "4r";
  }
  return "?";
}

Variant parse_variant(std::string_view text) {
  for (auto v : {Variant::r1, Variant::r3, Variant::r4})
    if (name(v) == text) return v;
  throw Error(Errc::invalid_argument, "unknown variant '" + std::string(text) + "' (expected 1r, 3r or 4r)");
}

std::vector<Representation> representations(Variant v) {
  switch (v) {
    case Variant::r1: return {Representation::mi};
    case Variant::r3: return {Representation::epi_h, Representation::epi_v, Representation::mi};
    case Variant::r4: return {kAllRepresentations.begin(), kAllRepresentations.end()};
  }
  return {};
}

ExpertConfig ExpertConfig::make(Representation k, const Widths& widths) {
  ExpertConfig cfg;
  cfg.repr = k;
  switch (k) {
    case Representation::sai:
      cfg.base_channels = widths.sai;
      cfg.scale_factors = {2, 2};
      break;
    case Representation::epi_h:  // plane (t, v)
    case Representation::epi_v:  // plane (s, u)
      cfg.base_channels = widths.other();
      cfg.scale_factors = {1, 2};
      break;
    case Representation::mi:  // plane (s, t)
      cfg.base_channels = widths.other();
      cfg.scale_factors = {1, 1};
      break;
  }
  return cfg;
}

ConvLayer::ConvLayer(ConvSpec s)
    : spec(std::move(s)),
      weight(Tensor::zeros(spec.weight_shape(), true)),
      bias(Tensor::zeros({spec.out_channels}, true)) {}

Tensor ConvLayer::operator()(const Tensor& x) const { return nn::conv(x, weight, bias, spec); }

namespace {

ConvLayer conv2(std::size_t in, std::size_t out, std::size_t k, std::size_t dilation = 1) {
  return ConvLayer(ConvSpec::same(2, in, out, k, dilation));
}

void collect_layer(const std::string& name, const ConvLayer& layer, std::vector<NamedParam>& out) {
  out.push_back({name + ".weight", layer.weight});
  out.push_back({name + ".bias", layer.bias});
}

bool is_identity(const std::array<std::size_t, 2>& f) { return f[0] == 1 && f[1] == 1; }

}  // namespace

ExpertNet::ExpertNet(ExpertConfig cfg) : cfg_(cfg) {
  const std::size_t f = cfg_.base_channels;
  if (f == 0) throw Error(Errc::invalid_argument, "expert width must be positive");
  head_ = conv2(1, f, 3);
  // The first conv changes the width; Down widens, Up narrows.
  const auto resample = [](std::size_t in, std::size_t out) {
    return Resample{conv2(in, out, 3), conv2(out, out, 3), conv2(out, out, 3), conv2(in, out, 1)};
  };
  down1_ = resample(f, 2 * f);
  down2_ = resample(2 * f, 4 * f);
  for (auto& d : dilated_) d = {conv2(4 * f, 4 * f, 3, 2), conv2(4 * f, 4 * f, 3, 2)};
  up1_ = resample(4 * f, 2 * f);
  up2_ = resample(2 * f, f);
  tail_ = conv2(f, 1, 1);
}

Tensor ExpertNet::down(const Resample& b, const Tensor& x) const {
  const std::vector<std::size_t> f(cfg_.scale_factors.begin(), cfg_.scale_factors.end());
  const bool scaled = !is_identity(cfg_.scale_factors);
  Tensor main = nn::relu(b.first(x));
  if (scaled) main = nn::avg_pool(main, f);
  main = b.third(nn::relu(b.second(main)));
  const Tensor skip = b.skip(scaled ? nn::avg_pool(x, f) : x);
  return nn::relu(nn::add(main, skip));
}

Tensor ExpertNet::up(const Resample& b, const Tensor& x, const std::vector<std::size_t>& target) const {
  const std::vector<std::size_t> f(cfg_.scale_factors.begin(), cfg_.scale_factors.end());
  const bool scaled = !is_identity(cfg_.scale_factors);
  Tensor main = nn::relu(b.first(x));
  if (scaled) main = nn::upsample_nearest(main, f, target);
  main = b.third(nn::relu(b.second(main)));
  Tensor skip = b.skip(x);
  if (scaled) skip = nn::upsample_nearest(skip, f, target);
  return nn::relu(nn::add(main, skip));
}

Tensor ExpertNet::forward(const Tensor& planes) const {
  if (planes.rank() != 4 || planes.dim(1) != 1)
    throw Error(Errc::dimension_mismatch, "expert input must be [N, 1, H, W], got " + nn::to_string(planes.shape()));
  const std::vector<std::size_t> full = {planes.dim(2), planes.dim(3)};
  Tensor h = nn::relu(head_(planes));
  h = down(down1_, h);
  const std::vector<std::size_t> half = {h.dim(2), h.dim(3)};
  h = down(down2_, h);
  for (const auto& d : dilated_) h = nn::relu(nn::add(h, d.second(nn::relu(d.first(h)))));
  h = up(up1_, h, half);
  h = up(up2_, h, full);
  return tail_(h);
}

void ExpertNet::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
  collect_layer(prefix + ".head", head_, out);
  const auto block = [&](const std::string& name, const Resample& b) {
    collect_layer(prefix + "." + name + ".conv1", b.first, out);
    collect_layer(prefix + "." + name + ".conv2", b.second, out);
    collect_layer(prefix + "." + name + ".conv3", b.third, out);
    collect_layer(prefix + "." + name + ".skip", b.skip, out);
  };
  block("down1", down1_);
  block("down2", down2_);
  for (std::size_t i = 0; i < dilated_.size(); ++i) {
    collect_layer(prefix + ".dilated" + std::to_string(i) + ".conv1", dilated_[i].first, out);
    collect_layer(prefix + ".dilated" + std::to_string(i) + ".conv2", dilated_[i].second, out);
  }
  block("up1", up1_);
  block("up2", up2_);
  collect_layer(prefix + ".tail", tail_, out);
}

GateNet::GateNet(std::size_t width, std::size_t outputs) : outputs_(outputs) {
  if (width == 0 || outputs == 0) throw Error(Errc::invalid_argument, "gate width must be positive");
  spatial_ = {conv2(1, width, 3), conv2(width, width, 3)};
  for (auto& c : sas_spatial_) c = conv2(width, width, 3);
  for (auto& c : sas_angular_) c = conv2(width, width, 3);
  for (std::size_t i = 0; i < volume_.size(); ++i)
    volume_[i] = ConvLayer(ConvSpec::same(3, width, i + 1 == volume_.size() ? outputs : width, 3));
}

Tensor GateNet::forward(const Tensor& y) const {
  if (y.rank() != 4) throw Error(Errc::dimension_mismatch, "gate input must be [S, T, U, V]");
  const std::size_t S = y.dim(0), T = y.dim(1), U = y.dim(2), V = y.dim(3);
  const std::size_t G = spatial_[0].spec.out_channels;
  // SAI arrangement: [S*T, C, U, V]; MI arrangement: [U*V, C, S, T].
  // Permutation (3,4,2,0,1) swaps the two as 5D tensors.
  static const std::vector<std::size_t> kSwap = {3, 4, 2, 0, 1};
  Tensor h = nn::reshape(y, {S * T, 1, U, V});
  for (const auto& c : spatial_) h = nn::relu(c(h));
  for (std::size_t i = 0; i < sas_spatial_.size(); ++i) {
    h = nn::relu(sas_spatial_[i](h));
    h = nn::reshape(nn::permute(nn::reshape(h, {S, T, G, U, V}), kSwap), {U * V, G, S, T});
    h = nn::relu(sas_angular_[i](h));
    h = nn::reshape(nn::permute(nn::reshape(h, {U, V, G, S, T}), kSwap), {S * T, G, U, V});
  }
  h = nn::reshape(nn::permute(nn::reshape(h, {S, T, G, U, V}), {2, 0, 1, 3, 4}), {1, G, S * T, U, V});
  for (std::size_t i = 0; i < volume_.size(); ++i) {
    h = volume_[i](h);
    if (i + 1 < volume_.size()) h = nn::relu(h);
  }
  h = nn::softmax(h, 1);
  return nn::permute(nn::reshape(h, {outputs_, S, T, U, V}), {1, 2, 3, 4, 0});
}

void GateNet::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
  for (std::size_t i = 0; i < spatial_.size(); ++i) collect_layer(prefix + ".spatial" + std::to_string(i), spatial_[i], out);
  for (std::size_t i = 0; i < sas_spatial_.size(); ++i) {
    collect_layer(prefix + ".sas" + std::to_string(i) + ".spatial", sas_spatial_[i], out);
    collect_layer(prefix + ".sas" + std::to_string(i) + ".angular", sas_angular_[i], out);
  }
  for (std::size_t i = 0; i < volume_.size(); ++i) collect_layer(prefix + ".volume" + std::to_string(i), volume_[i], out);
}

// --- DNetModel ---------------------------------------------------------------

DNetModel::DNetModel(Variant variant, Widths widths, Tau tau, std::array<std::size_t, 2> angular_crop)
    : variant_(variant),
      widths_(widths),
      tau_(tau),
      angular_crop_(angular_crop),
      reps_(llfz::representations(variant)),
      gate_(widths.gate, reps_.size()) {
  if (widths.sai < 2 || widths.sai % 2 != 0)
    throw Error(Errc::invalid_argument, "SAI width must be an even number >= 2");
  for (auto k : reps_) experts_.emplace_back(ExpertConfig::make(k, widths_));
}

const ExpertNet& DNetModel::expert(Representation k) const {
  for (std::size_t i = 0; i < reps_.size(); ++i)
    if (reps_[i] == k) return experts_[i];
  throw Error(Errc::invalid_argument, "model has no " + std::string(name(k)) + " expert");
}

ExpertNet& DNetModel::expert(Representation k) {
  return const_cast<ExpertNet&>(std::as_const(*this).expert(k));
}

std::vector<NamedParam> DNetModel::parameters() const {
  std::vector<NamedParam> out;
  for (std::size_t i = 0; i < reps_.size(); ++i) experts_[i].collect("expert." + std::string(name(reps_[i])), out);
  gate_.collect("gate", out);
  return out;
}

std::size_t DNetModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.tensor.numel();
  return n;
}

void DNetModel::init(std::uint64_t seed, bool zero_output_layers) {
  nn::Rng rng(seed);
  for (auto& p : parameters()) {
    Tensor t = p.tensor;
    if (t.rank() == 1) {
      std::fill(t.mutable_data().begin(), t.mutable_data().end(), 0.0);
    } else {
      nn::he_normal(t, rng);
    }
  }
  if (zero_output_layers) {
    const auto zero = [](ConvLayer& layer) {
      for (Tensor* t : {&layer.weight, &layer.bias})
        std::fill(t->mutable_data().begin(), t->mutable_data().end(), 0.0);
    };
    for (auto& e : experts_) zero(e.tail());
    zero(gate_.final_layer());
  }
}

DNetModel DNetModel::clone() const {
  DNetModel copy(variant_, widths_, tau_, angular_crop_);
  const auto src = parameters();
  auto dst = copy.parameters();
  for (std::size_t i = 0; i < src.size(); ++i)
    std::copy(src[i].tensor.data().begin(), src[i].tensor.data().end(), dst[i].tensor.mutable_data().begin());
  return copy;
}

namespace {
constexpr double kManifestVersion = 1;
}

std::vector<std::uint8_t> DNetModel::serialize() const {
  std::vector<nn::Record> records;
  const double variant_code = variant_ == Variant::r1 ? 1 : variant_ == Variant::r3 ? 3 : 4;
  records.push_back({"manifest",
                     {7},
                     {kManifestVersion, variant_code, static_cast<double>(widths_.sai),
                      static_cast<double>(widths_.gate), static_cast<double>(tau_.value),
                      static_cast<double>(angular_crop_[0]), static_cast<double>(angular_crop_[1])}});
  for (const auto& p : parameters())
    records.push_back({p.name, p.tensor.shape(), {p.tensor.data().begin(), p.tensor.data().end()}});
  return nn::serialize_records(records);
}

DNetModel DNetModel::parse(std::span<const std::uint8_t> bytes) {
  const auto records = nn::parse_records(bytes);
  if (records.empty() || records[0].name != "manifest" || records[0].values.size() != 7)
    throw Error(Errc::model_mismatch, "LFM1 file has no manifest record");
  const auto& m = records[0].values;
  if (m[0] != kManifestVersion) throw Error(Errc::model_mismatch, "unsupported model manifest version");
  const auto as_size = [](double v) {
    if (v < 0 || v != std::floor(v) || v > 1e9) throw Error(Errc::model_mismatch, "bad manifest field");
    return static_cast<std::size_t>(v);
  };
  Variant variant;
  switch (as_size(m[1])) {
    case 1: variant = Variant::r1; break;
    case 3: variant = Variant::r3; break;
    case 4: variant = Variant::r4; break;
    default: throw Error(Errc::model_mismatch, "unknown variant in manifest");
  }
  const std::size_t tau = as_size(m[4]);
  if (tau > 255) throw Error(Errc::model_mismatch, "manifest tau out of range");
  DNetModel model(variant, Widths{as_size(m[2]), as_size(m[3])}, Tau(static_cast<int>(tau)),
                  {as_size(m[5]), as_size(m[6])});
  auto params = model.parameters();
  if (records.size() != params.size() + 1)
    throw Error(Errc::model_mismatch, "model file has " + std::to_string(records.size() - 1) +
                                          " tensors, architecture expects " + std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& r = records[i + 1];
    if (r.name != params[i].name || r.shape != params[i].tensor.shape())
      throw Error(Errc::model_mismatch, "model record '" + r.name + "' " + nn::to_string(r.shape) +
                                            " does not match '" + params[i].name + "' " +
                                            nn::to_string(params[i].tensor.shape()));
    std::copy(r.values.begin(), r.values.end(), params[i].tensor.mutable_data().begin());
  }
  return model;
}

void DNetModel::save(const std::filesystem::path& path) const { write_file(path, serialize()); }

DNetModel DNetModel::load(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return parse(bytes);
}

// --- Forward pieces ------------------------------------------------------------

Tensor to_tensor(const LightField& lf, double scale) {
  std::vector<double> data(lf.samples().size());
  std::transform(lf.samples().begin(), lf.samples().end(), data.begin(),
                 [scale](std::uint8_t v) { return v * scale; });
  const auto e = lf.dims().extents();
  return Tensor::from_data({e[0], e[1], e[2], e[3]}, std::move(data));
}

Tensor to_planes(const Tensor& lf, Representation k) {
  if (lf.rank() != 4) throw Error(Errc::dimension_mismatch, "to_planes expects [S, T, U, V]");
  const auto order = axis_order(k);
  const std::vector<std::size_t> perm(order.begin(), order.end());
  Tensor p = nn::permute(lf, perm);
  return nn::reshape(p, {p.dim(0) * p.dim(1), 1, p.dim(2), p.dim(3)});
}

Tensor from_planes(const Tensor& planes, const Dims& dims, Representation k) {
  const auto order = axis_order(k);
  const auto ext = dims.extents();
  Tensor p = nn::reshape(planes, {ext[order[0]], ext[order[1]], ext[order[2]], ext[order[3]]});
  std::vector<std::size_t> inverse(4);
  for (std::size_t i = 0; i < 4; ++i) inverse[order[i]] = i;
  return nn::permute(p, inverse);
}

namespace {
Dims dims_of(const Tensor& t) {
  return Dims{static_cast<std::uint32_t>(t.dim(0)), static_cast<std::uint32_t>(t.dim(1)),
              static_cast<std::uint32_t>(t.dim(2)), static_cast<std::uint32_t>(t.dim(3))};
}
}  // namespace

Tensor expert_forward(const Tensor& y_normalized, const ExpertNet& expert) {
  const Representation k = expert.config().repr;
  return from_planes(expert.forward(to_planes(y_normalized, k)), dims_of(y_normalized), k);
}

Tensor gate_forward(const Tensor& y_normalized, const GateNet& gate) { return gate.forward(y_normalized); }

Tensor fuse_real(const Tensor& y, std::span<const Tensor> residuals, const Tensor& weights, Tau tau) {
  if (weights.rank() != 5 || weights.dim(4) != residuals.size())
    throw Error(Errc::dimension_mismatch, "fusion weights do not match the residual count");
  Tensor total = y;
  for (std::size_t k = 0; k < residuals.size(); ++k)
    total = nn::add(total, nn::mul(nn::select(weights, 4, k), residuals[k]));
  std::vector<double> lo(y.data().begin(), y.data().end()), hi = lo;
  for (std::size_t i = 0; i < lo.size(); ++i) {
    lo[i] = std::max(lo[i] - tau.value, 0.0);
    hi[i] = std::min(hi[i] + tau.value, 255.0);
  }
  return nn::clamp(total, Tensor::from_data(y.shape(), std::move(lo)), Tensor::from_data(y.shape(), std::move(hi)));
}

namespace {
LightField round_to_lightfield(const Tensor& t, const Dims& dims) {
  std::vector<std::uint8_t> samples(t.numel());
  const auto d = t.data();
  for (std::size_t i = 0; i < samples.size(); ++i)
    samples[i] = static_cast<std::uint8_t>(std::clamp(std::round(d[i]), 0.0, 255.0));
  return LightField(dims, std::move(samples));
}
}  // namespace

LightField fuse(const LightField& y, std::span<const Tensor> residuals, const Tensor& weights, Tau tau) {
  nn::NoGradGuard guard;
  return round_to_lightfield(fuse_real(to_tensor(y), residuals, weights, tau), y.dims());
}

ForwardResult model_forward(const LightField& y, const DNetModel& model) {
  const Tensor y_pixels = to_tensor(y);
  const Tensor y_norm = to_tensor(y, 1.0 / 255.0);
  ForwardResult out;
  for (auto k : model.representations())
    out.residuals.push_back(nn::scale(expert_forward(y_norm, model.expert(k)), 255.0));
  out.weights = gate_forward(y_norm, model.gate());
  out.restored = fuse_real(y_pixels, out.residuals, out.weights, model.tau());
  return out;
}

Restoration restore_with_weights(const LightField& y, const DNetModel& model, Tau stream_tau) {
  if (stream_tau != model.tau())
    throw Error(Errc::tau_mismatch, "model trained for tau=" + std::to_string(model.tau().value) +
                                        " but stream has tau=" + std::to_string(stream_tau.value));
  nn::NoGradGuard guard;
  ForwardResult f = model_forward(y, model);
  return {round_to_lightfield(f.restored, y.dims()), f.weights};
}

LightField restore(const LightField& y, const DNetModel& model, Tau stream_tau) {
  return restore_with_weights(y, model, stream_tau).restored;
}

std::map<Representation, double> contributions(const Tensor& weights, std::span<const Representation> reps) {
  if (weights.rank() != 5 || weights.dim(4) != reps.size())
    throw Error(Errc::dimension_mismatch, "weights do not match the representation list");
  const std::size_t K = reps.size();
  std::vector<double> per(K, 0.0);
  const auto w = weights.data();
  for (std::size_t i = 0; i < w.size(); ++i) per[i % K] += w[i];
  const double total = std::accumulate(per.begin(), per.end(), 0.0);
  std::map<Representation, double> out;
  for (std::size_t k = 0; k < K; ++k) out[reps[k]] = total > 0 ? per[k] / total : 0.0;
  return out;
}

std::vector<std::vector<std::uint8_t>> weight_maps(const Tensor& weights, std::size_t s, std::size_t t) {
  if (weights.rank() != 5) throw Error(Errc::dimension_mismatch, "weights must be [S, T, U, V, K]");
  if (s >= weights.dim(0) || t >= weights.dim(1)) throw Error(Errc::out_of_bounds, "view out of range");
  const std::size_t T = weights.dim(1), U = weights.dim(2), V = weights.dim(3), K = weights.dim(4);
  std::vector<std::vector<std::uint8_t>> maps(K, std::vector<std::uint8_t>(U * V));
  const auto w = weights.data();
  for (std::size_t p = 0; p < U * V; ++p)
    for (std::size_t k = 0; k < K; ++k) {
      const double v = w[((s * T + t) * U * V + p) * K + k];
      maps[k][p] = static_cast<std::uint8_t>(std::clamp(std::round(255.0 * v), 0.0, 255.0));
    }
  return maps;
}

void export_weight_maps(const Tensor& weights, std::span<const Representation> reps, std::size_t s,
                        std::size_t t, const std::filesystem::path& dir) {
  const auto maps = weight_maps(weights, s, t);
  if (maps.size() != reps.size()) throw Error(Errc::dimension_mismatch, "weights do not match representations");
  std::filesystem::create_directories(dir);
  for (std::size_t k = 0; k < maps.size(); ++k)
    write_pgm(dir / ("weight_" + std::string(name(reps[k])) + ".pgm"), weights.dim(2), weights.dim(3), maps[k]);
}

// --- Training --------------------------------------------------------------------

double TrainReport::running_loss() const {
  if (losses.empty()) return 0.0;
  const std::size_t n = std::min(std::max<std::size_t>(window, 1), losses.size());
  return std::accumulate(losses.end() - static_cast<std::ptrdiff_t>(n), losses.end(), 0.0) / static_cast<double>(n);
}

DNetModel train(std::span<const TrainPair> dataset, Tau tau, const TrainConfig& cfg, TrainReport* report,
                const CheckpointFn& checkpoint) {
  if (dataset.empty()) throw Error(Errc::invalid_argument, "training set is empty");
  if (cfg.patch == 0 || cfg.batch == 0) throw Error(Errc::invalid_argument, "patch and batch must be positive");
  for (const auto& pair : dataset)
    if (pair.original.dims() != pair.decoded.dims())
      throw Error(Errc::dimension_mismatch, "training pair extents differ");

  const auto crop_of = [&](const Dims& d) {
    return Dims{static_cast<std::uint32_t>(cfg.angular_crop[0] ? cfg.angular_crop[0] : d.s),
                static_cast<std::uint32_t>(cfg.angular_crop[1] ? cfg.angular_crop[1] : d.t),
                static_cast<std::uint32_t>(cfg.patch), static_cast<std::uint32_t>(cfg.patch)};
  };
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const Dims d = dataset[i].original.dims();
    const Dims c = crop_of(d);
    if (c.s <= d.s && c.t <= d.t && c.u <= d.u && c.v <= d.v) usable.push_back(i);
  }
  if (usable.empty()) throw Error(Errc::invalid_argument, "patch is larger than every light field in the set");

  DNetModel model(cfg.variant, cfg.widths, tau, cfg.angular_crop);
  model.init(cfg.seed, cfg.zero_output_layers);
  std::vector<Tensor> params;
  for (auto& p : model.parameters()) params.push_back(p.tensor);
  nn::Adam adam(params, {.lr = cfg.lr});
  nn::Rng sampler(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  TrainReport local;
  TrainReport& rep = report ? *report : local;
  rep.losses.clear();
  rep.window = cfg.loss_window;
  const auto drop_step = static_cast<std::size_t>(std::llround(cfg.lr_drop_fraction * static_cast<double>(cfg.steps)));

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    adam.set_lr(step < drop_step ? cfg.lr : cfg.lr_final);
    adam.zero_grad();
    double step_loss = 0;
    for (std::size_t b = 0; b < cfg.batch; ++b) {
      const TrainPair& pair = dataset[usable[sampler.below(usable.size())]];
      const Dims d = pair.original.dims();
      const Dims c = crop_of(d);
      const Dims origin{static_cast<std::uint32_t>(sampler.below(d.s - c.s + 1)),
                        static_cast<std::uint32_t>(sampler.below(d.t - c.t + 1)),
                        static_cast<std::uint32_t>(sampler.below(d.u - c.u + 1)),
                        static_cast<std::uint32_t>(sampler.below(d.v - c.v + 1))};
      const LightField x = extract_patch(pair.original, origin, c);
      const LightField y = extract_patch(pair.decoded, origin, c);
      const ForwardResult f = model_forward(y, model);
      Tensor loss = nn::l2_loss(f.restored, to_tensor(x));
      if (cfg.batch > 1) loss = nn::scale(loss, 1.0 / static_cast<double>(cfg.batch));
      loss.backward();
      step_loss += loss.item();
    }
    rep.losses.push_back(step_loss);
    adam.step();
    if (checkpoint && cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0) checkpoint(step + 1, model);
  }
  return model;
}

}  // namespace llfz
