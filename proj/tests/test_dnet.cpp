#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "gradcheck.hpp"
#include "llfz/codec.hpp"
#include "llfz/dnet.hpp"
#include "llfz/error.hpp"
#include "llfz/io.hpp"
#include "llfz/metrics.hpp"
#include "llfz/nn/serialize.hpp"
#include "support.hpp"

using namespace llfz;
using testing::gradient_error;
using testing::project;

namespace {

const Widths kToy{4, 4};

DNetModel random_model(Variant v, Tau tau, std::uint64_t seed, Widths w = kToy) {
  DNetModel m(v, w, tau);
  m.init(seed, false);
  return m;
}

// Scales every parameter so that random models produce large residuals.
void amplify(DNetModel& m, double factor) {
  for (auto& p : m.parameters()) {
    nn::Tensor t = p.tensor;
    for (auto& v : t.mutable_data()) v *= factor;
  }
}

std::vector<nn::Tensor> tensors(const DNetModel& m) {
  std::vector<nn::Tensor> out;
  for (const auto& p : m.parameters()) out.push_back(p.tensor);
  return out;
}

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an llfz::Error");
  return Errc::usage;
}

}  // namespace

TEST_CASE("variants and expert configuration") {
  CHECK(representations(Variant::r1) == std::vector{Representation::mi});
  CHECK(representations(Variant::r3).size() == 3);
  CHECK(representations(Variant::r4).size() == 4);
  CHECK(parse_variant("3r") == Variant::r3);
  CHECK(code_of([] { parse_variant("2r"); }) == Errc::invalid_argument);
  const Widths w{32, 16};
  CHECK(ExpertConfig::make(Representation::sai, w).base_channels == 32);
  for (auto k : {Representation::epi_h, Representation::epi_v, Representation::mi})
    CHECK(ExpertConfig::make(k, w).base_channels == 16);
  CHECK(ExpertConfig::make(Representation::sai, w).scale_factors == std::array<std::size_t, 2>{2, 2});
  CHECK(ExpertConfig::make(Representation::epi_h, w).scale_factors == std::array<std::size_t, 2>{1, 2});
  CHECK(ExpertConfig::make(Representation::epi_v, w).scale_factors == std::array<std::size_t, 2>{1, 2});
  CHECK(ExpertConfig::make(Representation::mi, w).scale_factors == std::array<std::size_t, 2>{1, 1});
}

TEST_CASE("parameter count grows with the variant") {
  const Widths w{};
  const std::size_t c1 = DNetModel(Variant::r1, w, Tau(4)).parameter_count();
  const std::size_t c3 = DNetModel(Variant::r3, w, Tau(4)).parameter_count();
  const std::size_t c4 = DNetModel(Variant::r4, w, Tau(4)).parameter_count();
  CHECK(c1 < c3);
  CHECK(c3 < c4);
}

TEST_CASE("planes round trip through the tensor arrangement") {
  const LightField lf = testing::make_noise(Dims{3, 4, 5, 6}, 1);
  const nn::Tensor t = to_tensor(lf);
  for (auto k : kAllRepresentations) {
    const nn::Tensor planes = to_planes(t, k);
    const PlaneStack ps = reshape_to(lf, k);
    REQUIRE(planes.shape() == nn::Shape{ps.plane_count, 1, ps.rows, ps.cols});
    for (std::size_t i = 0; i < ps.data.size(); ++i) REQUIRE(planes.data()[i] == ps.data[i]);
    const nn::Tensor back = from_planes(planes, lf.dims(), k);
    CHECK(std::equal(back.data().begin(), back.data().end(), t.data().begin()));
  }
}

TEST_CASE("zero parameters give zero residuals and uniform gating") {
  const DNetModel m(Variant::r4, kToy, Tau(2));  // constructed with zero tensors
  const LightField y = testing::make_noise(Dims{3, 3, 8, 8}, 2);
  const nn::Tensor yn = to_tensor(y, 1.0 / 255);
  for (auto k : m.representations()) {
    const nn::Tensor r = expert_forward(yn, m.expert(k));
    CHECK(r.shape() == yn.shape());
    for (double v : r.data()) REQUIRE(v == 0.0);
  }
  const nn::Tensor w = gate_forward(yn, m.gate());
  CHECK(w.shape() == nn::Shape{3, 3, 8, 8, 4});
  for (double v : w.data()) REQUIRE(v == 0.25);
}

TEST_CASE("zero-initialised output layers make restore the identity") {
  const LightField y = testing::make_noise(Dims{3, 4, 8, 10}, 3);
  for (auto v : {Variant::r1, Variant::r3, Variant::r4}) {
    DNetModel m(v, kToy, Tau(3));
    m.init(5, true);
    const Restoration r = restore_with_weights(y, m, Tau(3));
    CHECK(r.restored == y);
    const double uniform = 1.0 / static_cast<double>(m.representations().size());
    for (double w : r.weights.data()) REQUIRE(std::abs(w - uniform) <= 1e-12);
    for (const auto& [k, c] : contributions(r.weights, m.representations()))
      CHECK(std::abs(c - uniform) <= 1e-12);
  }
}

TEST_CASE("random gates sum to one per pixel; contributions sum to one") {
  const DNetModel m = random_model(Variant::r4, Tau(2), 7);
  const LightField y = testing::make_noise(Dims{3, 3, 8, 8}, 4);
  const nn::Tensor w = gate_forward(to_tensor(y, 1.0 / 255), m.gate());
  const auto d = w.data();
  for (std::size_t px = 0; px < d.size() / 4; ++px) {
    double sum = 0;
    for (std::size_t k = 0; k < 4; ++k) {
      CHECK(d[px * 4 + k] > 0);
      CHECK(d[px * 4 + k] < 1);
      sum += d[px * 4 + k];
    }
    REQUIRE(std::abs(sum - 1) <= 1e-12);
  }
  double total = 0;
  for (const auto& [k, c] : contributions(w, m.representations())) total += c;
  CHECK(std::abs(total - 1) <= 1e-6);
}

TEST_CASE("contributions of a one-hot gate") {
  const std::vector<Representation> reps = representations(Variant::r4);
  std::vector<double> data(2 * 2 * 3 * 3 * 4, 0.0);
  for (std::size_t px = 0; px < data.size() / 4; ++px) data[px * 4 + 3] = 1.0;  // MI
  const auto c = contributions(nn::Tensor::from_data({2, 2, 3, 3, 4}, data), reps);
  CHECK(c.at(Representation::mi) == 1.0);
  CHECK(c.at(Representation::sai) == 0.0);
}

TEST_CASE("shape preservation on odd extents") {
  const DNetModel m = random_model(Variant::r4, Tau(1), 8);
  for (Dims d : {Dims{3, 3, 8, 8}, Dims{3, 5, 9, 11}, Dims{4, 3, 13, 8}}) {
    const LightField y = testing::make_noise(d, 9);
    CHECK(restore(y, m, Tau(1)).dims() == d);
  }
}

TEST_CASE("fusion clamps to the tau band") {
  const LightField y(Dims{1, 1, 1, 2}, 100);
  const std::vector<nn::Tensor> residuals = {nn::Tensor::from_data({1, 1, 1, 2}, {5.0, -0.4})};
  const nn::Tensor w = nn::Tensor::full({1, 1, 1, 2, 1}, 1.0);
  const LightField x = fuse(y, residuals, w, Tau(2));
  CHECK(x(0, 0, 0, 0) == 102);
  CHECK(x(0, 0, 0, 1) == 100);
  const std::vector<nn::Tensor> zero = {nn::Tensor::zeros({1, 1, 1, 2})};
  CHECK(fuse(y, zero, w, Tau(2)) == y);
}

TEST_CASE("hard 2 tau bound with large random residuals") {
  const LightField x = testing::make_photo();
  const LightField crop = extract_patch(x, Dims{0, 0, 0, 0}, Dims{3, 3, 16, 16});
  for (int tau : {1, 4, 8}) {
    const LightField y = decode(encode(crop, Tau(tau)));
    DNetModel m = random_model(Variant::r4, Tau(tau), 10 + static_cast<std::uint64_t>(tau));
    amplify(m, 3.0);
    const LightField r = restore(y, m, Tau(tau));
    CHECK(pae(r, y) <= tau);
    CHECK(pae(r, crop) <= 2 * tau);
  }
}

TEST_CASE("tau mismatch is refused") {
  DNetModel m(Variant::r1, kToy, Tau(4));
  m.init(1);
  const LightField y(Dims{3, 3, 8, 8}, 10);
  CHECK(code_of([&] { restore(y, m, Tau(3)); }) == Errc::tau_mismatch);
}

TEST_CASE("weight maps") {
  DNetModel m(Variant::r4, kToy, Tau(2));
  m.init(2, true);
  const LightField y = testing::make_noise(Dims{3, 3, 8, 8}, 11);
  const Restoration r = restore_with_weights(y, m, Tau(2));
  const auto maps = weight_maps(r.weights, 1, 2);
  REQUIRE(maps.size() == 4);
  for (const auto& map : maps) {
    CHECK(map.size() == 64);
    for (auto v : map) REQUIRE(v == 64);
  }
  CHECK(code_of([&] { weight_maps(r.weights, 3, 0); }) == Errc::out_of_bounds);

  const auto dir = std::filesystem::temp_directory_path() / "llfz_weight_maps";
  std::filesystem::remove_all(dir);
  export_weight_maps(r.weights, m.representations(), 0, 0, dir);
  const PnmImage img = read_pnm(dir / "weight_mi.pgm");
  CHECK(img.rows == 8);
  CHECK(img.cols == 8);
  std::filesystem::remove_all(dir);
}

TEST_CASE("model serialisation round trip and validation") {
  const DNetModel m = random_model(Variant::r3, Tau(5), 12);
  const auto bytes = m.serialize();
  const DNetModel back = DNetModel::parse(bytes);
  CHECK(back.variant() == Variant::r3);
  CHECK(back.tau() == Tau(5));
  CHECK(back.widths().sai == kToy.sai);
  CHECK(back.serialize() == bytes);
  const LightField y = testing::make_noise(Dims{3, 3, 8, 8}, 13);
  CHECK(restore(y, back, Tau(5)) == restore(y, m, Tau(5)));

  auto cut = bytes;
  cut.resize(cut.size() / 2);
  CHECK_THROWS_AS(DNetModel::parse(cut), Error);

  // A record whose shape disagrees with the manifest architecture.
  auto records = nn::parse_records(bytes);
  records[1].shape[0] += 1;
  records[1].values.resize(nn::numel(records[1].shape), 0.0);
  CHECK(code_of([&] { DNetModel::parse(nn::serialize_records(records)); }) == Errc::model_mismatch);
}

TEST_CASE("clone copies parameters") {
  const DNetModel m = random_model(Variant::r1, Tau(1), 14);
  CHECK(m.clone().serialize() == m.serialize());
}

TEST_CASE("gradient: full expert on a 5x5x8x8 toy input") {
  const Widths w{2, 2};
  const LightField y = testing::make_noise(Dims{5, 5, 8, 8}, 15);
  for (auto k : kAllRepresentations) {
    DNetModel m(Variant::r4, w, Tau(1));
    m.init(16, false);
    const ExpertNet& e = m.expert(k);
    std::vector<NamedParam> params;
    e.collect("e", params);
    std::vector<nn::Tensor> inputs;
    for (const auto& p : params) inputs.push_back(p.tensor);
    testing::jitter_biases(inputs, 40);
    const nn::Tensor base = to_tensor(y, 1.0 / 255);
    const nn::Tensor x = nn::Tensor::from_data(base.shape(), {base.data().begin(), base.data().end()}, true);
    inputs.push_back(x);
    CHECK(gradient_error([&] { return project(expert_forward(x, e), 17); }, inputs, 6) <= 1e-4);
  }
}

TEST_CASE("gradient: gate on a 3x3x8x8 toy input") {
  DNetModel m(Variant::r4, Widths{2, 2}, Tau(1));
  m.init(18, false);
  std::vector<NamedParam> params;
  m.gate().collect("g", params);
  std::vector<nn::Tensor> inputs;
  for (const auto& p : params) inputs.push_back(p.tensor);
  testing::jitter_biases(inputs, 41);
  const LightField y = testing::make_noise(Dims{3, 3, 8, 8}, 19);
  const nn::Tensor base = to_tensor(y, 1.0 / 255);
  const nn::Tensor x = nn::Tensor::from_data(base.shape(), {base.data().begin(), base.data().end()}, true);
  inputs.push_back(x);
  CHECK(gradient_error([&] { return project(gate_forward(x, m.gate()), 20); }, inputs, 8) <= 1e-4);
}

TEST_CASE("gradient: end-to-end loss through fusion") {
  DNetModel m(Variant::r3, Widths{2, 2}, Tau(3));
  m.init(21, false);
  amplify(m, 0.5);
  testing::jitter_biases(tensors(m), 42);
  const LightField x = testing::make_noise(Dims{3, 3, 8, 8}, 22);
  const LightField y = decode(encode(x, Tau(3)));
  CHECK(gradient_error([&] { return nn::l2_loss(model_forward(y, m).restored, to_tensor(x)); }, tensors(m), 4) <=
        1e-4);
}

TEST_CASE("training: zero steps, initial loss and reproducibility") {
  const LightField x = extract_patch(testing::make_photo(), Dims{0, 0, 0, 0}, Dims{3, 3, 16, 16});
  const LightField y = decode(encode(x, Tau(4)));
  const std::vector<TrainPair> data = {{x, y}};
  TrainConfig cfg;
  cfg.patch = 16;
  cfg.widths = Widths{4, 4};
  cfg.seed = 3;
  cfg.steps = 0;
  TrainReport report;
  const DNetModel untrained = train(data, Tau(4), cfg, &report);
  CHECK(report.losses.empty());
  DNetModel fresh(cfg.variant, cfg.widths, Tau(4));
  fresh.init(cfg.seed, true);
  CHECK(untrained.serialize() == fresh.serialize());

  cfg.steps = 4;
  std::size_t checkpoints = 0;
  cfg.checkpoint_every = 2;
  const DNetModel a = train(data, Tau(4), cfg, &report, [&](std::size_t, const DNetModel&) { ++checkpoints; });
  CHECK(checkpoints == 2);
  REQUIRE(report.losses.size() == 4);
  double mse = 0;
  for (std::size_t i = 0; i < x.samples().size(); ++i) {
    const double d = double(x.samples()[i]) - double(y.samples()[i]);
    mse += d * d;
  }
  CHECK(report.losses[0] == doctest::Approx(mse / static_cast<double>(x.samples().size())).epsilon(1e-12));
  const DNetModel b = train(data, Tau(4), cfg);
  CHECK(a.serialize() == b.serialize());
}

TEST_CASE("training rejects bad inputs") {
  TrainConfig cfg;
  cfg.patch = 64;
  cfg.steps = 1;
  const LightField x(Dims{3, 3, 16, 16}, 3);
  const std::vector<TrainPair> data = {{x, x}};
  CHECK(code_of([&] { train({}, Tau(1), cfg); }) == Errc::invalid_argument);
  CHECK(code_of([&] { train(data, Tau(1), cfg); }) == Errc::invalid_argument);
}
