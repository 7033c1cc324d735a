#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "llfz/codec.hpp"
#include "llfz/lightfield.hpp"
#include "llfz/nn/ops.hpp"
#include "llfz/nn/tensor.hpp"

namespace llfz {

/// Which representations the model mixes: 1R = {MI}, 3R = {EPI-H, EPI-V,
/// MI}, 4R = all four.
enum class Variant { r1, r3, r4 };

std::string_view name(Variant v);
Variant parse_variant(std::string_view text);
std::vector<Representation> representations(Variant v);

/// Channel widths. Non-SAI experts always use half the SAI width.
struct Widths {
  std::size_t sai = 32;
  std::size_t gate = 16;

  std::size_t other() const { return sai / 2; }
};

struct ExpertConfig {
  Representation repr = Representation::sai;
  std::size_t base_channels = 32;
  /// Pool/upsample factor per plane axis; angular axes are never scaled.
  std::array<std::size_t, 2> scale_factors{2, 2};

  static ExpertConfig make(Representation k, const Widths& widths);
};

/// One convolution with its parameters.
struct ConvLayer {
  nn::ConvSpec spec;
  nn::Tensor weight;
  nn::Tensor bias;

  ConvLayer() = default;
  explicit ConvLayer(nn::ConvSpec s);
  nn::Tensor operator()(const nn::Tensor& x) const;
};

struct NamedParam {
  std::string name;
  nn::Tensor tensor;
};

/// Encoder-decoder residual network over the planes of one representation:
/// 3x3 head, Down, Down, Dilated x4, Up, Up, 1x1 tail.
class ExpertNet {
 public:
  explicit ExpertNet(ExpertConfig cfg);

  const ExpertConfig& config() const { return cfg_; }

  /// planes [N, 1, H, W] normalised to [0, 1] -> residual [N, 1, H, W].
  nn::Tensor forward(const nn::Tensor& planes) const;

  void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
  ConvLayer& tail() { return tail_; }

 private:
  struct Resample {  // Down or Up block
    ConvLayer first, second, third, skip;
  };
  struct Dilated {
    ConvLayer first, second;
  };

  nn::Tensor down(const Resample& b, const nn::Tensor& x) const;
  nn::Tensor up(const Resample& b, const nn::Tensor& x, const std::vector<std::size_t>& target) const;

  ExpertConfig cfg_;
  ConvLayer head_;
  Resample down1_, down2_, up1_, up2_;
  std::array<Dilated, 4> dilated_;
  ConvLayer tail_;
};

/// Per-pixel mixing weights from spatial-angular separable features and
/// 3D convolutions over (S*T, U, V).
class GateNet {
 public:
  GateNet(std::size_t width, std::size_t outputs);

  std::size_t outputs() const { return outputs_; }

  /// y [S, T, U, V] normalised -> W [S, T, U, V, outputs], softmax-normalised.
  nn::Tensor forward(const nn::Tensor& y) const;

  void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
  ConvLayer& final_layer() { return volume_.back(); }

 private:
  std::size_t outputs_;
  std::array<ConvLayer, 2> spatial_;
  std::array<ConvLayer, 3> sas_spatial_, sas_angular_;
  std::array<ConvLayer, 4> volume_;
};

class DNetModel {
 public:
  DNetModel(Variant variant, Widths widths, Tau tau, std::array<std::size_t, 2> angular_crop = {0, 0});
  DNetModel(DNetModel&&) noexcept = default;
  DNetModel& operator=(DNetModel&&) noexcept = default;

  /// He-normal weights, zero biases. With zero_output_layers the expert
  /// tails and the final gate conv start at zero, so restore() begins as
  /// the identity with uniform gating.
  void init(std::uint64_t seed, bool zero_output_layers = true);

  DNetModel clone() const;

  Variant variant() const { return variant_; }
  const Widths& widths() const { return widths_; }
  Tau tau() const { return tau_; }
  std::array<std::size_t, 2> angular_crop() const { return angular_crop_; }
  const std::vector<Representation>& representations() const { return reps_; }

  const ExpertNet& expert(Representation k) const;
  ExpertNet& expert(Representation k);
  const GateNet& gate() const { return gate_; }
  GateNet& gate() { return gate_; }

  std::vector<NamedParam> parameters() const;
  std::size_t parameter_count() const;

  std::vector<std::uint8_t> serialize() const;
  static DNetModel parse(std::span<const std::uint8_t> bytes);
  void save(const std::filesystem::path& path) const;
  static DNetModel load(const std::filesystem::path& path);

 private:
  Variant variant_;
  Widths widths_;
  Tau tau_;
  std::array<std::size_t, 2> angular_crop_;
  std::vector<Representation> reps_;
  std::vector<ExpertNet> experts_;  // parallel to reps_
  GateNet gate_;
};

// --- Tensor-level pieces ------------------------------------------------------

/// [S, T, U, V] tensor of samples * scale.
nn::Tensor to_tensor(const LightField& lf, double scale = 1.0);

/// Rearranges [S, T, U, V] into plane batch [N, 1, rows, cols] (reshape_to
/// ordering) and back.
nn::Tensor to_planes(const nn::Tensor& lf, Representation k);
nn::Tensor from_planes(const nn::Tensor& planes, const Dims& dims, Representation k);

/// Residual in normalised units, [S, T, U, V].
nn::Tensor expert_forward(const nn::Tensor& y_normalized, const ExpertNet& expert);
nn::Tensor gate_forward(const nn::Tensor& y_normalized, const GateNet& gate);

/// clamp(y + sum_k w_k * r_k, max(y - tau, 0), min(y + tau, 255)) in pixel
/// units, real-valued (differentiable).
nn::Tensor fuse_real(const nn::Tensor& y, std::span<const nn::Tensor> residuals,
                     const nn::Tensor& weights, Tau tau);

/// fuse_real rounded half away from zero to 8 bits. ||result - y||_inf <= tau.
LightField fuse(const LightField& y, std::span<const nn::Tensor> residuals, const nn::Tensor& weights,
                Tau tau);

struct ForwardResult {
  nn::Tensor restored;                // real-valued, pixel units
  nn::Tensor weights;                 // [S, T, U, V, K]
  std::vector<nn::Tensor> residuals;  // pixel units, one per representation
};

/// Full differentiable pass from the hard-decoded light field.
ForwardResult model_forward(const LightField& y, const DNetModel& model);

struct Restoration {
  LightField restored;
  nn::Tensor weights;
};

/// Soft decoding. Refuses (Errc::tau_mismatch) when the model was trained
/// for a different tau than the stream.
Restoration restore_with_weights(const LightField& y, const DNetModel& model, Tau stream_tau);
LightField restore(const LightField& y, const DNetModel& model, Tau stream_tau);

/// Relative contribution of each representation: sum of its weights over
/// all pixels divided by the total.
std::map<Representation, double> contributions(const nn::Tensor& weights,
                                               std::span<const Representation> reps);

/// One U x V 8-bit map per representation for view (s, t), weight*255
/// rounded. Throws Errc::out_of_bounds for an invalid view.
std::vector<std::vector<std::uint8_t>> weight_maps(const nn::Tensor& weights, std::size_t s,
                                                   std::size_t t);
void export_weight_maps(const nn::Tensor& weights, std::span<const Representation> reps, std::size_t s,
                        std::size_t t, const std::filesystem::path& dir);

// --- Training -----------------------------------------------------------------

struct TrainConfig {
  std::size_t patch = 64;                       // spatial patch edge
  std::array<std::size_t, 2> angular_crop{0, 0};  // 0 = full angular extent
  std::size_t steps = 0;
  std::size_t batch = 1;  // patches per optimiser step
  double lr = 1e-4;
  double lr_final = 1e-5;
  double lr_drop_fraction = 2.0 / 3.0;  // share of steps run at `lr`
  std::uint64_t seed = 0;
  Variant variant = Variant::r4;
  Widths widths{};
  bool zero_output_layers = true;
  std::size_t checkpoint_every = 0;  // 0 disables checkpoints
  std::size_t loss_window = 20;      // steps averaged into the running loss
};

struct TrainPair {
  LightField original;
  LightField decoded;
};

struct TrainReport {
  std::vector<double> losses;  // one per step, before the update
  std::size_t window = 20;

  double initial_loss() const { return losses.empty() ? 0.0 : losses.front(); }
  double running_loss() const;
};

using CheckpointFn = std::function<void(std::size_t step, const DNetModel& model)>;

DNetModel train(std::span<const TrainPair> dataset, Tau tau, const TrainConfig& cfg,
                TrainReport* report = nullptr, const CheckpointFn& checkpoint = {});

}  // namespace llfz
