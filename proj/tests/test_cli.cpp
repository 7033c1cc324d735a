#include <doctest.h>

#include <cmath>

#include "cli_runner.hpp"
#include "llfz/codec.hpp"
#include "llfz/dnet.hpp"
#include "llfz/io.hpp"
#include "llfz/metrics.hpp"
#include "support.hpp"

using namespace llfz;
using testing::run_cli;
using testing::slurp;

namespace fs = std::filesystem;

namespace {

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

struct Fixture {
  fs::path dir = testing::scratch_dir("cli");
  fs::path x = dir / "x.lfy";
  LightField lf = extract_patch(testing::make_photo(), Dims{0, 0, 0, 0}, Dims{3, 3, 24, 24});
  Fixture() { write_lfy(x, lf); }
  testing::RunResult run(const std::string& args) const { return run_cli(args, dir); }
};

}  // namespace

TEST_CASE_FIXTURE(Fixture, "lossless encode and decode through the CLI") {
  const auto y = dir / "y.lfz", z = dir / "z.lfy";
  REQUIRE(run("encode --tau 0 " + q(x) + " " + q(y)).code == 0);
  REQUIRE(run("decode " + q(y) + " " + q(z)).code == 0);
  CHECK(slurp(z) == slurp(x));
  // The CLI adds nothing on top of the library.
  const auto lib = encode(lf, Tau(0)).serialize();
  CHECK(slurp(y) == std::string(lib.begin(), lib.end()));
}

TEST_CASE_FIXTURE(Fixture, "verify reports the bound") {
  const auto y = dir / "y.lfz", z = dir / "z.lfy";
  REQUIRE(run("encode --tau 4 " + q(x) + " " + q(y)).code == 0);
  REQUIRE(run("decode " + q(y) + " " + q(z)).code == 0);
  const auto r = run("verify --orig " + q(x) + " --decoded " + q(z) + " --tau 4");
  CHECK(r.code == 0);
  REQUIRE(r.out.rfind("max_abs_error ", 0) == 0);
  CHECK(std::stoi(r.out.substr(14)) <= 4);
  const auto fail = run("verify --orig " + q(x) + " --decoded " + q(z) + " --tau 1");
  CHECK(fail.code == 2);
  CHECK(fail.err.rfind("ERROR:bound_violation:", 0) == 0);
}

TEST_CASE_FIXTURE(Fixture, "usage errors exit 1") {
  const auto r = run("encode --bogus 3 " + q(x) + " " + q(dir / "o.lfz"));
  CHECK(r.code == 1);
  CHECK(r.err.rfind("ERROR:usage:", 0) == 0);
  CHECK(r.err.find("Usage") != std::string::npos);
  CHECK(run("frobnicate").code == 1);
  CHECK(run("").code == 1);
  CHECK(run("encode --tau 300 " + q(x) + " " + q(dir / "o.lfz")).code == 1);
}

TEST_CASE_FIXTURE(Fixture, "data errors exit 2") {
  const auto bad = dir / "bad.lfz";
  std::ofstream(bad) << "LFZ9 not a stream";
  const auto r = run("decode " + q(bad) + " " + q(dir / "o.lfy"));
  CHECK(r.code == 2);
  CHECK(r.err.rfind("ERROR:corrupt_stream:", 0) == 0);
  CHECK_FALSE(fs::exists(dir / "o.lfy"));
  CHECK(run("decode " + q(dir / "missing.lfz") + " " + q(dir / "o.lfy")).code == 2);

  DNetModel m(Variant::r1, Widths{4, 4}, Tau(3));
  m.init(1);
  m.save(dir / "m.lfm");
  REQUIRE(run("encode --tau 2 " + q(x) + " " + q(dir / "y.lfz")).code == 0);
  const auto mismatch = run("restore --model " + q(dir / "m.lfm") + " " + q(dir / "y.lfz") + " " + q(dir / "r.lfy"));
  CHECK(mismatch.code == 2);
  CHECK(mismatch.err.rfind("ERROR:tau_mismatch:", 0) == 0);
}

TEST_CASE_FIXTURE(Fixture, "restore, weight maps and info") {
  DNetModel m(Variant::r4, Widths{4, 4}, Tau(2));
  m.init(2);
  m.save(dir / "m.lfm");
  REQUIRE(run("encode --tau 2 " + q(x) + " " + q(dir / "y.lfz")).code == 0);
  REQUIRE(run("restore --model " + q(dir / "m.lfm") + " --weight-maps " + q(dir / "maps") + " --view 1,1 " +
              q(dir / "y.lfz") + " " + q(dir / "r.lfy"))
              .code == 0);
  CHECK(read_lfy(dir / "r.lfy") == decode(Bitstream::parse(read_file(dir / "y.lfz"))));
  for (const char* k : {"sai", "epi_h", "epi_v", "mi"}) CHECK(fs::exists(dir / "maps" / (std::string("weight_") + k + ".pgm")));
  CHECK(run("restore --model " + q(dir / "m.lfm") + " --weight-maps " + q(dir / "maps") + " --view 9,9 " +
            q(dir / "y.lfz") + " " + q(dir / "r.lfy"))
            .code == 2);

  const auto iz = run("info " + q(dir / "y.lfz"));
  CHECK(iz.code == 0);
  CHECK(iz.out.find("format lfz") != std::string::npos);
  CHECK(iz.out.find("tau 2") != std::string::npos);
  CHECK(iz.out.find("dims 3x3x24x24") != std::string::npos);
  CHECK(run("info " + q(x)).out.find("format lfy") != std::string::npos);
  const auto im = run("info " + q(dir / "m.lfm"));
  CHECK(im.out.find("variant 4r") != std::string::npos);
  CHECK(im.out.find("parameters " + std::to_string(m.parameter_count())) != std::string::npos);
}

TEST_CASE_FIXTURE(Fixture, "prepare imports a view directory") {
  const auto views = dir / "views";
  fs::create_directories(views);
  const LightField small = extract_patch(lf, Dims{0, 0, 0, 0}, Dims{2, 3, 5, 4});
  for (std::size_t s = 0; s < 2; ++s)
    for (std::size_t t = 0; t < 3; ++t) {
      std::vector<std::uint8_t> px(20);
      for (std::size_t i = 0; i < 20; ++i) px[i] = small(s, t, i / 4, i % 4);
      write_pgm(views / ("view_" + std::to_string(s) + "_" + std::to_string(t) + ".pgm"), 5, 4, px);
    }
  REQUIRE(run("prepare --gamma 1 " + q(views) + " " + q(dir / "p.lfy")).code == 0);
  CHECK(read_lfy(dir / "p.lfy") == small);
  REQUIRE(run("prepare " + q(views) + " " + q(dir / "g.lfy")).code == 0);
  const LightField g = read_lfy(dir / "g.lfy");
  CHECK(g(1, 2, 3, 1) == prepare_gray(small(1, 2, 3, 1) / 255.0, PrepConfig{}));
  fs::remove(views / "view_1_1.pgm");
  CHECK(run("prepare " + q(views) + " " + q(dir / "h.lfy")).code == 2);
}

TEST_CASE_FIXTURE(Fixture, "train, eval and plot are reproducible") {
  const auto data = dir / "data";
  fs::create_directories(data);
  write_lfy(data / "a.lfy", lf);
  const std::string train_args = "--seed 5 train --tau 2 --steps 3 --patch 16 --sai-width 4 --gate-width 4 " +
                                 q(data) + " ";
  REQUIRE(run(train_args + q(dir / "m1.lfm")).code == 0);
  REQUIRE(run("--workers 3 " + train_args + q(dir / "m2.lfm")).code == 0);
  REQUIRE(run("train --seed 5 --tau 2 --steps 3 --patch 16 --sai-width 4 --gate-width 4 " + q(data) + " " +
              q(dir / "m3.lfm"))
              .code == 0);
  CHECK(slurp(dir / "m1.lfm") == slurp(dir / "m2.lfm"));
  CHECK(slurp(dir / "m1.lfm") == slurp(dir / "m3.lfm"));

  const std::string eval = "eval --input " + q(x) + " --taus 1-3 --model " + q(dir / "m1.lfm") + " --out ";
  REQUIRE(run(eval + q(dir / "r1.csv")).code == 0);
  REQUIRE(run("--workers 2 " + eval + q(dir / "r2.csv")).code == 0);
  CHECK(slurp(dir / "r1.csv") == slurp(dir / "r2.csv"));
  const auto rows = parse_csv(slurp(dir / "r1.csv"));
  REQUIRE(rows.size() == 3);
  CHECK(rows[1].psnr_restored.has_value());
  CHECK_FALSE(rows[0].psnr_restored.has_value());

  REQUIRE(run("plot " + q(dir / "r1.csv") + " --psnr " + q(dir / "p.svg") + " --pae " + q(dir / "e.svg")).code == 0);
  const std::string svg = slurp(dir / "p.svg");
  CHECK(svg.rfind("<svg", 0) == 0);
  REQUIRE(run("plot " + q(dir / "r2.csv") + " --psnr " + q(dir / "p2.svg")).code == 0);
  CHECK(slurp(dir / "p2.svg") == svg);

  CHECK(run("eval --input " + q(x) + " --taus 5,6 --model " + q(dir / "m1.lfm") + " --out " + q(dir / "r3.csv")).code ==
        2);
}
