#include <doctest.h>

#include <cmath>
#include <random>

#include "llfz/error.hpp"
#include "llfz/io.hpp"
#include "llfz/lightfield.hpp"
#include "support.hpp"

using namespace llfz;

namespace {

LightField indexed_2222() {
  LightField lf(Dims{2, 2, 2, 2});
  for (std::size_t s = 0; s < 2; ++s)
    for (std::size_t t = 0; t < 2; ++t)
      for (std::size_t u = 0; u < 2; ++u)
        for (std::size_t v = 0; v < 2; ++v) lf(s, t, u, v) = static_cast<std::uint8_t>(8 * s + 4 * t + 2 * u + v);
  return lf;
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

TEST_CASE("plane counts and extents per representation") {
  const LightField lf = testing::make_noise(Dims{3, 4, 5, 6}, 1);
  struct Expect {
    Representation k;
    std::size_t count, rows, cols;
  };
  for (auto e : {Expect{Representation::sai, 12, 5, 6}, Expect{Representation::epi_h, 15, 4, 6},
                 Expect{Representation::epi_v, 24, 3, 5}, Expect{Representation::mi, 30, 3, 4}}) {
    const PlaneStack ps = reshape_to(lf, e.k);
    CHECK(ps.plane_count == e.count);
    CHECK(ps.rows == e.rows);
    CHECK(ps.cols == e.cols);
    CHECK(ps.data.size() == lf.dims().count());
  }
}

TEST_CASE("SAI count for a 15x15x434x625 capture") {
  const LightField lf(Dims{15, 15, 434, 625});
  const PlaneStack ps = reshape_to(lf, Representation::sai);
  CHECK(ps.plane_count == 225);
  CHECK(ps.rows == 434);
  CHECK(ps.cols == 625);
}

TEST_CASE("degenerate 1x1x1x1 light field") {
  const LightField lf(Dims{1, 1, 1, 1}, 42);
  for (auto k : kAllRepresentations) {
    const PlaneStack ps = reshape_to(lf, k);
    CHECK(ps.plane_count == 1);
    CHECK(ps.rows == 1);
    CHECK(ps.cols == 1);
    CHECK(ps.at(0, 0, 0) == 42);
  }
}

TEST_CASE("MI plane at (u,v) = (0,1) of the indexed 2x2x2x2 field") {
  const PlaneStack ps = reshape_to(indexed_2222(), Representation::mi);
  // Planes are raster over (u,v): (0,1) is plane 1.
  CHECK(ps.at(1, 0, 0) == 1);
  CHECK(ps.at(1, 0, 1) == 5);
  CHECK(ps.at(1, 1, 0) == 9);
  CHECK(ps.at(1, 1, 1) == 13);
}

TEST_CASE("every representation matches a direct enumeration oracle") {
  const LightField lf = testing::make_noise(Dims{2, 3, 4, 5}, 7);
  const std::array<std::size_t, 4> ext = lf.dims().extents();
  for (auto k : kAllRepresentations) {
    const auto order = axis_order(k);
    const PlaneStack ps = reshape_to(lf, k);
    std::array<std::size_t, 4> idx{};
    for (idx[0] = 0; idx[0] < ext[0]; ++idx[0])
      for (idx[1] = 0; idx[1] < ext[1]; ++idx[1])
        for (idx[2] = 0; idx[2] < ext[2]; ++idx[2])
          for (idx[3] = 0; idx[3] < ext[3]; ++idx[3]) {
            const std::size_t plane = idx[order[0]] * ext[order[1]] + idx[order[1]];
            REQUIRE(ps.at(plane, idx[order[2]], idx[order[3]]) == lf(idx[0], idx[1], idx[2], idx[3]));
          }
  }
}

TEST_CASE("reshape round trips") {
  const LightField lf = testing::make_noise(Dims{3, 2, 7, 5}, 3);
  for (auto k : kAllRepresentations) CHECK(reshape_from(reshape_to(lf, k), lf.dims()) == lf);
  LightField chained = lf;
  for (auto k : kAllRepresentations) chained = reshape_from(reshape_to(chained, k), lf.dims());
  CHECK(chained == lf);
}

TEST_CASE("reshape_from rejects inconsistent stacks") {
  const LightField lf = testing::make_noise(Dims{2, 2, 3, 3}, 5);
  PlaneStack ps = reshape_to(lf, Representation::sai);
  ps.plane_count = 3;
  CHECK(code_of([&] { reshape_from(ps, lf.dims()); }) == Errc::dimension_mismatch);
  CHECK(code_of([&] { reshape_from(reshape_to(lf, Representation::mi), Dims{2, 2, 3, 4}); }) ==
        Errc::dimension_mismatch);
}

TEST_CASE("extract_patch copies the addressed crop") {
  const LightField lf = testing::make_noise(Dims{4, 4, 10, 12}, 9);
  const LightField p = extract_patch(lf, Dims{1, 2, 3, 4}, Dims{2, 2, 5, 6});
  for (std::size_t s = 0; s < 2; ++s)
    for (std::size_t t = 0; t < 2; ++t)
      for (std::size_t u = 0; u < 5; ++u)
        for (std::size_t v = 0; v < 6; ++v) REQUIRE(p(s, t, u, v) == lf(s + 1, t + 2, u + 3, v + 4));
  CHECK(extract_patch(lf, Dims{0, 0, 0, 0}, lf.dims()) == lf);
  CHECK(code_of([&] { extract_patch(lf, Dims{0, 0, 6, 0}, Dims{1, 1, 5, 1}); }) == Errc::out_of_bounds);
}

TEST_CASE("gray preparation values") {
  const PrepConfig cfg;
  CHECK(prepare_gray(1.0, cfg) == 255);
  CHECK(prepare_gray(0.0, cfg) == 0);
  CHECK(prepare_gray(0.5, cfg) == 187);
  PrepConfig linear;
  linear.gamma = 1.0;
  CHECK(prepare_gray(0.5, linear) == 128);  // 127.5 rounds away from zero
}

TEST_CASE("prepare applies luma then gamma") {
  PrepConfig cfg;
  cfg.source_bit_depth = 10;
  RawView view{1, 2, 3, {1023, 0, 0, 512, 512, 512}};
  const std::vector<RawView> views{view};
  const LightField lf = prepare(views, 1, 1, cfg);
  const auto expect = [&](double r, double g, double b) {
    const double y = 0.299 * r + 0.587 * g + 0.114 * b;
    return static_cast<int>(std::floor(255.0 * std::pow(y, 0.45) + 0.5));
  };
  CHECK(lf(0, 0, 0, 0) == expect(1, 0, 0));
  CHECK(lf(0, 0, 0, 1) == expect(512 / 1023.0, 512 / 1023.0, 512 / 1023.0));
}

TEST_CASE("prepare rejects inconsistent views") {
  const PrepConfig cfg;
  std::vector<RawView> views{RawView{2, 2, 1, {0, 0, 0, 0}}, RawView{2, 3, 1, {0, 0, 0, 0, 0, 0}}};
  CHECK(code_of([&] { prepare(views, 1, 2, cfg); }) == Errc::dimension_mismatch);
}

TEST_CASE("lfy and pnm containers round trip") {
  const LightField lf = testing::make_noise(Dims{2, 3, 4, 5}, 11);
  CHECK(parse_lfy(serialize_lfy(lf)) == lf);
  auto bytes = serialize_lfy(lf);
  bytes.pop_back();
  CHECK(code_of([&] { parse_lfy(bytes); }) == Errc::corrupt_stream);

  PnmImage img;
  img.rows = 3;
  img.cols = 2;
  img.channels = 3;
  img.maxval = 1023;
  for (int i = 0; i < 18; ++i) img.values.push_back(static_cast<std::uint16_t>(i * 50));
  const PnmImage back = parse_pnm(serialize_pnm(img));
  CHECK(back.rows == 3);
  CHECK(back.cols == 2);
  CHECK(back.channels == 3);
  CHECK(back.maxval == 1023);
  CHECK(back.values == img.values);
}

TEST_CASE("pnm parser accepts comments") {
  const std::string text = "P5\n# comment\n2 1\n255\n";
  std::vector<std::uint8_t> bytes(text.begin(), text.end());
  bytes.push_back(7);
  bytes.push_back(200);
  const PnmImage img = parse_pnm(bytes);
  CHECK(img.cols == 2);
  CHECK(img.values == std::vector<std::uint16_t>{7, 200});
}
