// llfz: near-lossless light-field codec and soft decoder.

#include <CLI11.hpp>

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "llfz/codec.hpp"
#include "llfz/dnet.hpp"
#include "llfz/error.hpp"
#include "llfz/io.hpp"
#include "llfz/lightfield.hpp"
#include "llfz/metrics.hpp"
#include "llfz/nn/serialize.hpp"
#include "llfz/parallel.hpp"

namespace fs = std::filesystem;
using namespace llfz;

namespace {

struct Global {
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  bool verbose = false;
};

void log(const Global& g, const std::string& msg) {
  if (g.verbose) std::cerr << msg << "\n";
}

Bitstream read_lfz(const fs::path& path) { return Bitstream::parse(read_file(path)); }

std::string magic_of(const fs::path& path) {
  const auto bytes = read_file(path);
  if (bytes.size() < 4) throw Error(Errc::corrupt_stream, "file too short to identify: " + path.string());
  return std::string(bytes.begin(), bytes.begin() + 4);
}

// "a,b" -> {a, b}
std::array<std::size_t, 2> parse_pair(const std::string& text, const char* what) {
  std::size_t a = 0, b = 0;
  char sep = 0;
  std::istringstream in(text);
  if (!(in >> a >> sep >> b) || (sep != ',' && sep != 'x') || !in.eof())
    throw Error(Errc::usage, std::string(what) + " must look like 'A,B', got '" + text + "'");
  return {a, b};
}

// "1-8" or "1,2,4"
std::vector<int> parse_taus(const std::string& text) {
  std::vector<int> taus;
  const auto dash = text.find('-');
  try {
    if (dash != std::string::npos) {
      const int lo = std::stoi(text.substr(0, dash)), hi = std::stoi(text.substr(dash + 1));
      if (lo > hi) throw Error(Errc::usage, "empty tau range '" + text + "'");
      for (int t = lo; t <= hi; ++t) taus.push_back(t);
    } else {
      std::istringstream in(text);
      std::string item;
      while (std::getline(in, item, ',')) taus.push_back(std::stoi(item));
    }
  } catch (const std::logic_error&) {
    throw Error(Errc::usage, "bad tau list '" + text + "'");
  }
  if (taus.empty()) throw Error(Errc::usage, "tau list is empty");
  for (int t : taus) make_tau(t);
  return taus;
}

// --- subcommands --------------------------------------------------------------

struct PrepareArgs {
  std::string dir, out;
  double gamma = 0.45;
  int bit_depth = 0;
};

void run_prepare(const PrepareArgs& a, const Global& g) {
  const ViewSet set = read_view_directory(a.dir);
  PrepConfig cfg;
  cfg.gamma = a.gamma;
  std::uint32_t maxval = 0;
  for (const auto& v : set.views) maxval = std::max(maxval, v.maxval);
  cfg.source_bit_depth = a.bit_depth > 0 ? a.bit_depth : static_cast<int>(std::ceil(std::log2(maxval + 1.0)));
  std::vector<RawView> raw;
  for (const auto& v : set.views) raw.push_back({v.rows, v.cols, v.channels, v.values});
  const LightField lf = prepare(raw, set.s_count, set.t_count, cfg);
  write_lfy(a.out, lf);
  log(g, "prepared " + std::to_string(set.views.size()) + " views at " + std::to_string(cfg.source_bit_depth) +
             " bits");
}

struct CodecArgs {
  std::string in, out;
  int tau = 0;
};

void run_encode(const CodecArgs& a, const Global& g) {
  const LightField lf = read_lfy(a.in);
  const Bitstream bs = encode(lf, make_tau(a.tau));
  write_file(a.out, bs.serialize());
  log(g, "encoded " + std::to_string(bs.size_bytes()) + " bytes, " + std::to_string(bpp(bs)) + " bpp");
}

void run_decode(const CodecArgs& a, const Global&) { write_lfy(a.out, decode(read_lfz(a.in))); }

struct RestoreArgs {
  std::string in, out, model, weight_dir, view = "0,0";
};

void run_restore(const RestoreArgs& a, const Global& g) {
  const Bitstream bs = read_lfz(a.in);
  const DNetModel model = DNetModel::load(a.model);
  const LightField y = decode(bs);
  const Restoration r = restore_with_weights(y, model, bs.tau);
  write_lfy(a.out, r.restored);
  if (!a.weight_dir.empty()) {
    const auto [s, t] = parse_pair(a.view, "--view");
    export_weight_maps(r.weights, model.representations(), s, t, a.weight_dir);
  }
  for (const auto& [k, c] : contributions(r.weights, model.representations()))
    log(g, "contribution " + std::string(name(k)) + " = " + std::to_string(c));
}

struct VerifyArgs {
  std::string orig, decoded;
  int tau = 0;
};

int run_verify(const VerifyArgs& a, const Global&) {
  const BoundCheck check = verify_bound(read_lfy(a.orig), read_lfy(a.decoded), make_tau(a.tau));
  std::cout << "max_abs_error " << check.max_abs_error << "\n";
  if (!check.pass)
    throw Error(Errc::bound_violation, "max error " + std::to_string(check.max_abs_error) + " exceeds tau " +
                                           std::to_string(a.tau));
  return 0;
}

struct TrainArgs {
  std::string data, out;
  int tau = 4;
  std::string variant = "4r";
  std::size_t steps = 200, patch = 64, batch = 1, sai_width = 32, gate_width = 16, checkpoint_every = 0;
  double lr = 1e-4, lr_final = 1e-5;
  std::string angular_crop;
};

void run_train(const TrainArgs& a, const Global& g) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(a.data))
    if (e.is_regular_file() && e.path().extension() == ".lfy") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(Errc::io, "no .lfy files in " + a.data);
  const Tau tau = make_tau(a.tau);
  std::vector<TrainPair> dataset;
  for (const auto& f : files) {
    LightField x = read_lfy(f);
    LightField y = decode(encode(x, tau));
    dataset.push_back({std::move(x), std::move(y)});
  }
  TrainConfig cfg;
  cfg.patch = a.patch;
  if (!a.angular_crop.empty()) cfg.angular_crop = parse_pair(a.angular_crop, "--angular-crop");
  cfg.steps = a.steps;
  cfg.batch = a.batch;
  cfg.lr = a.lr;
  cfg.lr_final = a.lr_final;
  cfg.seed = g.seed;
  cfg.variant = parse_variant(a.variant);
  cfg.widths = Widths{a.sai_width, a.gate_width};
  cfg.checkpoint_every = a.checkpoint_every;
  TrainReport report;
  const fs::path out(a.out);
  const DNetModel model = train(dataset, tau, cfg, &report, [&](std::size_t step, const DNetModel& m) {
    fs::path ck = out;
    ck.replace_extension(".step" + std::to_string(step) + out.extension().string());
    m.save(ck);
    log(g, "step " + std::to_string(step) + " running loss " + std::to_string(report.running_loss()));
  });
  model.save(out);
  std::cout << "initial_loss " << report.initial_loss() << "\nrunning_loss " << report.running_loss() << "\n";
}

struct EvalArgs {
  std::string in, out, taus = "1-8";
  std::vector<std::string> models;
};

void run_eval(const EvalArgs& a, const Global&) {
  const LightField lf = read_lfy(a.in);
  const std::vector<int> taus = parse_taus(a.taus);
  std::vector<DNetModel> loaded;
  for (const auto& m : a.models) loaded.push_back(DNetModel::load(m));
  std::vector<const DNetModel*> per_tau(a.models.empty() ? 0 : taus.size(), nullptr);
  for (const auto& m : loaded) {
    const auto it = std::find(taus.begin(), taus.end(), m.tau().value);
    if (it == taus.end())
      throw Error(Errc::tau_mismatch, "model for tau=" + std::to_string(m.tau().value) + " is not in the sweep");
    auto& slot = per_tau[static_cast<std::size_t>(it - taus.begin())];
    if (slot) throw Error(Errc::usage, "two models given for tau=" + std::to_string(m.tau().value));
    slot = &m;
  }
  const auto rows = rd_sweep(lf, taus, per_tau);
  const std::string csv = to_csv(rows);
  write_file(a.out, std::span(reinterpret_cast<const std::uint8_t*>(csv.data()), csv.size()));
}

struct PlotArgs {
  std::string csv, psnr_out, pae_out, title = "rate-distortion";
};

void run_plot(const PlotArgs& a, const Global&) {
  const auto bytes = read_file(a.csv);
  const auto rows = parse_csv(std::string(bytes.begin(), bytes.end()));
  const auto put = [](const std::string& path, const std::string& text) {
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  };
  if (!a.psnr_out.empty()) put(a.psnr_out, psnr_svg(rows, a.title));
  if (!a.pae_out.empty()) put(a.pae_out, pae_svg(rows, a.title));
}

void run_info(const std::string& path, const Global&) {
  const std::string magic = magic_of(path);
  const auto dims_text = [](const Dims& d) {
    return std::to_string(d.s) + "x" + std::to_string(d.t) + "x" + std::to_string(d.u) + "x" + std::to_string(d.v);
  };
  if (magic == "LFY1") {
    const LightField lf = read_lfy(path);
    std::cout << "format lfy\ndims " << dims_text(lf.dims()) << "\nsamples " << lf.dims().count() << "\n";
  } else if (magic == "LFM1") {
    const DNetModel m = DNetModel::load(path);
    std::cout << "format lfm\nvariant " << name(m.variant()) << "\ntau " << m.tau().value << "\nsai_width "
              << m.widths().sai << "\nother_width " << m.widths().other() << "\ngate_width " << m.widths().gate
              << "\nparameters " << m.parameter_count() << "\n";
  } else {
    const Bitstream bs = read_lfz(path);
    std::cout << "format lfz\nversion " << int{Bitstream::kVersion} << "\ndims " << dims_text(bs.dims) << "\ntau "
              << bs.tau.value << "\nchunks " << bs.chunk_lengths.size() << "\nheader_bytes " << bs.header_size()
              << "\ntotal_bytes " << bs.size_bytes() << "\nbpp " << bpp(bs) << "\n";
  }
}

int exit_code(Errc c) { return c == Errc::usage || c == Errc::invalid_argument ? 1 : 2; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"llfz: near-lossless light-field codec with a mixture-of-experts soft decoder"};
  app.require_subcommand(1);
  app.fallthrough();
  Global g;
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--workers", g.workers, "Worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--verbose", g.verbose, "Progress on stderr");

  PrepareArgs prep;
  auto* c_prep = app.add_subcommand("prepare", "Convert a directory of view_<s>_<t>.pgm/.ppm files to .lfy");
  c_prep->add_option("views", prep.dir, "View directory")->required();
  c_prep->add_option("output", prep.out, "Output .lfy")->required();
  c_prep->add_option("--gamma", prep.gamma, "Gamma exponent");
  c_prep->add_option("--bit-depth", prep.bit_depth, "Source bit depth (default: from maxval)");

  CodecArgs enc, dec;
  auto* c_enc = app.add_subcommand("encode", "Encode .lfy to .lfz");
  c_enc->add_option("--tau", enc.tau, "Maximum absolute error")->required();
  c_enc->add_option("input", enc.in)->required();
  c_enc->add_option("output", enc.out)->required();
  auto* c_dec = app.add_subcommand("decode", "Decode .lfz to .lfy");
  c_dec->add_option("input", dec.in)->required();
  c_dec->add_option("output", dec.out)->required();

  RestoreArgs res;
  auto* c_res = app.add_subcommand("restore", "Decode .lfz and apply the soft decoder");
  c_res->add_option("--model", res.model, "Model .lfm")->required();
  c_res->add_option("--weight-maps", res.weight_dir, "Write gate weight maps as PGM into this directory");
  c_res->add_option("--view", res.view, "View s,t for the weight maps");
  c_res->add_option("input", res.in)->required();
  c_res->add_option("output", res.out)->required();

  VerifyArgs ver;
  auto* c_ver = app.add_subcommand("verify", "Check the per-sample error bound");
  c_ver->add_option("--orig", ver.orig)->required();
  c_ver->add_option("--decoded", ver.decoded)->required();
  c_ver->add_option("--tau", ver.tau, "Maximum absolute error")->required();

  TrainArgs tr;
  auto* c_tr = app.add_subcommand("train", "Train a soft decoder on the .lfy files of a directory");
  c_tr->add_option("data_dir", tr.data, "Directory of original .lfy files")->required();
  c_tr->add_option("output", tr.out, "Output .lfm")->required();
  c_tr->add_option("--tau", tr.tau, "Error bound of the training streams")->capture_default_str();
  c_tr->add_option("--variant", tr.variant, "1r, 3r or 4r")->capture_default_str();
  c_tr->add_option("--steps", tr.steps, "Optimizer steps")->capture_default_str();
  c_tr->add_option("--patch", tr.patch, "Spatial patch edge")->capture_default_str();
  c_tr->add_option("--angular-crop", tr.angular_crop, "Angular patch S,T (default: full)");
  c_tr->add_option("--batch", tr.batch, "Patches per step")->capture_default_str();
  c_tr->add_option("--lr", tr.lr, "Adam learning rate")->capture_default_str();
  c_tr->add_option("--lr-final", tr.lr_final, "Learning rate after the drop")->capture_default_str();
  c_tr->add_option("--sai-width", tr.sai_width, "SAI expert width; other experts use half")->capture_default_str();
  c_tr->add_option("--gate-width", tr.gate_width, "Gate width")->capture_default_str();
  c_tr->add_option("--checkpoint-every", tr.checkpoint_every, "Write a checkpoint every N steps (0: off)")->capture_default_str();

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("eval", "Rate-distortion sweep to CSV");
  c_ev->add_option("--input", ev.in, "Original .lfy")->required();
  c_ev->add_option("--out", ev.out, "Output CSV")->required();
  c_ev->add_option("--taus", ev.taus, "Range 'a-b' or list 'a,b,c'");
  c_ev->add_option("--model", ev.models, "Model .lfm (repeatable, one per tau)");

  PlotArgs pl;
  auto* c_pl = app.add_subcommand("plot", "Render a sweep CSV to SVG");
  c_pl->add_option("csv", pl.csv)->required();
  c_pl->add_option("--psnr", pl.psnr_out, "PSNR plot output");
  c_pl->add_option("--pae", pl.pae_out, "PAE plot output");
  c_pl->add_option("--title", pl.title);

  std::string info_path;
  auto* c_info = app.add_subcommand("info", "Print header fields of .lfy, .lfz or .lfm");
  c_info->add_option("file", info_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "ERROR:usage:" << e.what() << "\n" << app.help();
    return 1;
  }

  try {
    set_workers(g.workers);
    if (*c_prep) run_prepare(prep, g);
    else if (*c_enc) run_encode(enc, g);
    else if (*c_dec) run_decode(dec, g);
    else if (*c_res) run_restore(res, g);
    else if (*c_ver) return run_verify(ver, g);
    else if (*c_tr) run_train(tr, g);
    else if (*c_ev) run_eval(ev, g);
    else if (*c_pl) run_plot(pl, g);
    else if (*c_info) run_info(info_path, g);
  } catch (const Error& e) {
    std::cerr << "ERROR:" << to_string(e.code()) << ":" << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "ERROR:io:" << e.what() << "\n";
    return 2;
  }
  return 0;
}
