#include "llfz/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "llfz/dnet.hpp"
#include "llfz/error.hpp"

namespace llfz {

namespace {

void require_same_dims(const LightField& a, const LightField& b) {
  if (a.dims() != b.dims()) throw Error(Errc::dimension_mismatch, "light fields have different extents");
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace

double psnr(const LightField& a, const LightField& b) {
  require_same_dims(a, b);
  const auto x = a.samples(), y = b.samples();
  if (x.empty()) throw Error(Errc::dimension_mismatch, "empty light field");
  std::uint64_t sse = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const int d = int{x[i]} - int{y[i]};
    sse += static_cast<std::uint64_t>(d * d);
  }
  if (sse == 0) return std::numeric_limits<double>::infinity();
  const double mse = static_cast<double>(sse) / static_cast<double>(x.size());
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

int pae(const LightField& a, const LightField& b) {
  require_same_dims(a, b);
  const auto x = a.samples(), y = b.samples();
  int m = 0;
  for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(int{x[i]} - int{y[i]}));
  return m;
}

double bpp(std::size_t container_bytes, const Dims& dims) {
  return static_cast<double>(container_bytes) * 8.0 / static_cast<double>(dims.count());
}

double bpp(const Bitstream& bs) { return bpp(bs.size_bytes(), bs.dims); }

RDCurve RDCurve::from_points(std::vector<RDPoint> points) {
  std::sort(points.begin(), points.end(), [](const RDPoint& a, const RDPoint& b) { return a.rate < b.rate; });
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!(points[i].rate > 0)) throw Error(Errc::invalid_argument, "RD point rate must be positive");
    if (i > 0 && points[i].rate == points[i - 1].rate)
      throw Error(Errc::invalid_argument, "RD curve has two points at the same rate");
  }
  return RDCurve{std::move(points)};
}

// --- Bjontegaard deltas ------------------------------------------------------

std::vector<double> polyfit(std::span<const double> x, std::span<const double> y, std::size_t degree) {
  if (x.size() != y.size() || x.size() <= degree)
    throw Error(Errc::invalid_argument, "polynomial fit needs more points than its degree");
  Eigen::MatrixXd a(x.size(), degree + 1);
  Eigen::VectorXd b(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double p = 1;
    for (std::size_t j = 0; j <= degree; ++j, p *= x[i]) a(i, j) = p;
    b(i) = y[i];
  }
  const Eigen::VectorXd c = a.colPivHouseholderQr().solve(b);
  return {c.data(), c.data() + c.size()};
}

double polyval(std::span<const double> coeffs, double x) {
  double r = 0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) r = r * x + *it;
  return r;
}

namespace {

std::size_t fit_degree(std::size_t n) { return std::min<std::size_t>(3, n - 1); }

// Mean of (q - p) over [lo, hi], integrated analytically.
double mean_difference(std::span<const double> p, std::span<const double> q, double lo, double hi) {
  const std::size_t n = std::max(p.size(), q.size());
  double integral = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = (i < q.size() ? q[i] : 0.0) - (i < p.size() ? p[i] : 0.0);
    if (d == 0) continue;
    const double k = static_cast<double>(i + 1);
    integral += d * (std::pow(hi, k) - std::pow(lo, k)) / k;
  }
  return integral / (hi - lo);
}

struct Axis {
  std::vector<double> x, y;
};

void check_curve(const RDCurve& c) {
  if (c.points.size() < 2) throw Error(Errc::invalid_argument, "BD metrics need at least two points per curve");
  for (const auto& p : c.points)
    if (!std::isfinite(p.psnr) || !(p.rate > 0))
      throw Error(Errc::invalid_argument, "BD metrics need finite PSNR and positive rate");
}

BdResult bd(const RDCurve& a, const RDCurve& b, bool rate_axis) {
  check_curve(a);
  check_curve(b);
  const auto axes = [rate_axis](const RDCurve& c) {
    Axis ax;
    for (const auto& p : c.points) {
      const double lr = std::log10(p.rate);
      ax.x.push_back(rate_axis ? p.psnr : lr);
      ax.y.push_back(rate_axis ? lr : p.psnr);
    }
    return ax;
  };
  const Axis pa = axes(a), pb = axes(b);
  const auto [alo, ahi] = std::minmax_element(pa.x.begin(), pa.x.end());
  const auto [blo, bhi] = std::minmax_element(pb.x.begin(), pb.x.end());
  const double lo = std::max(*alo, *blo), hi = std::min(*ahi, *bhi);
  if (!(hi > lo)) throw Error(Errc::invalid_argument, "RD curves do not overlap");
  const auto fa = polyfit(pa.x, pa.y, fit_degree(pa.x.size()));
  const auto fb = polyfit(pb.x, pb.y, fit_degree(pb.x.size()));
  const double delta = mean_difference(fa, fb, lo, hi);
  BdResult r;
  r.low_confidence = a.points.size() < 4 || b.points.size() < 4;
  r.value = rate_axis ? (std::pow(10.0, delta) - 1.0) * 100.0 : delta;
  return r;
}

}  // namespace

BdResult bd_psnr(const RDCurve& a, const RDCurve& b) { return bd(a, b, false); }
BdResult bd_rate(const RDCurve& a, const RDCurve& b) { return bd(a, b, true); }

// --- Sweep -------------------------------------------------------------------------

std::vector<SweepRow> rd_sweep(const LightField& lf, std::span<const int> taus,
                               std::span<const DNetModel* const> models) {
  if (!models.empty() && models.size() != taus.size())
    throw Error(Errc::invalid_argument, "model list must be empty or match the tau list");
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < taus.size(); ++i) {
    const Tau tau = make_tau(taus[i]);
    const Bitstream bs = encode(lf, tau);
    const LightField y = decode(bs);
    SweepRow row;
    row.tau = tau.value;
    row.bpp = bpp(bs);
    row.psnr_hard = psnr(lf, y);
    row.pae_hard = pae(lf, y);
    if (!models.empty() && models[i] != nullptr) {
      const LightField xr = restore(y, *models[i], tau);
      row.psnr_restored = psnr(lf, xr);
      row.pae_restored = pae(lf, xr);
    }
    rows.push_back(row);
  }
  return rows;
}

RDCurve hard_curve(std::span<const SweepRow> rows) {
  std::vector<RDPoint> pts;
  for (const auto& r : rows) pts.push_back({r.bpp, r.psnr_hard, r.pae_hard});
  return RDCurve::from_points(std::move(pts));
}

RDCurve restored_curve(std::span<const SweepRow> rows) {
  std::vector<RDPoint> pts;
  for (const auto& r : rows)
    if (r.psnr_restored) pts.push_back({r.bpp, *r.psnr_restored, r.pae_restored.value_or(0)});
  return RDCurve::from_points(std::move(pts));
}

// --- CSV ---------------------------------------------------------------------------

namespace {

constexpr const char* kCsvHeader = "tau,bpp,psnr_hard,psnr_restored,pae_hard,pae_restored";

std::string psnr_text(double v) { return std::isinf(v) ? "inf" : fmt("%.6f", v); }

double parse_double(const std::string& field, std::size_t line) {
  if (field == "inf") return std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    const double v = std::stod(field, &used);
    if (used == field.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(Errc::corrupt_stream, "CSV line " + std::to_string(line) + ": bad number '" + field + "'");
}

int parse_int(const std::string& field, std::size_t line) {
  const double v = parse_double(field, line);
  if (v != std::floor(v) || std::abs(v) > 1e9)
    throw Error(Errc::corrupt_stream, "CSV line " + std::to_string(line) + ": bad integer '" + field + "'");
  return static_cast<int>(v);
}

}  // namespace

std::string to_csv(std::span<const SweepRow> rows) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& r : rows) {
    out += std::to_string(r.tau) + "," + fmt("%.6f", r.bpp) + "," + psnr_text(r.psnr_hard) + ",";
    if (r.psnr_restored) out += psnr_text(*r.psnr_restored);
    out += "," + std::to_string(r.pae_hard) + ",";
    if (r.pae_restored) out += std::to_string(*r.pae_restored);
    out += "\n";
  }
  return out;
}

std::vector<SweepRow> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader)
    throw Error(Errc::corrupt_stream, "CSV header must be " + std::string(kCsvHeader));
  std::vector<SweepRow> rows;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) f.push_back(field);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 6) throw Error(Errc::corrupt_stream, "CSV line " + std::to_string(number) + " needs 6 fields");
    SweepRow r;
    r.tau = parse_int(f[0], number);
    r.bpp = parse_double(f[1], number);
    r.psnr_hard = parse_double(f[2], number);
    if (!f[3].empty()) r.psnr_restored = parse_double(f[3], number);
    r.pae_hard = parse_int(f[4], number);
    if (!f[5].empty()) r.pae_restored = parse_int(f[5], number);
    rows.push_back(r);
  }
  return rows;
}

// --- SVG ---------------------------------------------------------------------------

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 55;

struct Series {
  std::string label;
  std::string color;
  std::vector<std::pair<double, double>> points;  // already in axis units
};

std::vector<double> nice_ticks(double lo, double hi) {
  const double span = hi - lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  std::vector<double> ticks;
  for (double t = std::ceil(lo / step) * step; t <= hi + step * 1e-9; t += step) ticks.push_back(t);
  return ticks;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

// `log_y` means the y values are log10 of the plotted quantity.
std::string render(const std::vector<Series>& series, const std::string& title, const std::string& ylabel,
                   bool log_y) {
  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo, ylo = xlo, yhi = -xlo;
  for (const auto& s : series)
    for (auto [x, y] : s.points) {
      xlo = std::min(xlo, x), xhi = std::max(xhi, x);
      ylo = std::min(ylo, y), yhi = std::max(yhi, y);
    }
  if (!std::isfinite(xlo)) xlo = 0, xhi = 1, ylo = 0, yhi = 1;
  if (log_y) {
    ylo = std::floor(ylo), yhi = std::ceil(yhi);
  }
  if (xhi - xlo < 1e-9) xlo -= 0.5, xhi += 0.5;
  if (yhi - ylo < 1e-9) ylo -= 0.5, yhi += 0.5;
  const double xpad = (xhi - xlo) * 0.05;
  xlo -= xpad, xhi += xpad;
  if (!log_y) {
    const double ypad = (yhi - ylo) * 0.05;
    ylo -= ypad, yhi += ypad;
  }
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  const auto px = [&](double x) { return kLeft + (x - xlo) / (xhi - xlo) * pw; };
  const auto py = [&](double y) { return kTop + (yhi - y) / (yhi - ylo) * ph; };

  std::string o;
  o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt("%.0f", kWidth) + "\" height=\"" +
       fmt("%.0f", kHeight) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o += "<text x=\"" + fmt("%.1f", kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" +
       escape(title) + "</text>\n";
  o += "<rect x=\"" + fmt("%.1f", kLeft) + "\" y=\"" + fmt("%.1f", kTop) + "\" width=\"" + fmt("%.1f", pw) +
       "\" height=\"" + fmt("%.1f", ph) + "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double t : nice_ticks(xlo, xhi)) {
    o += "<line x1=\"" + fmt("%.2f", px(t)) + "\" y1=\"" + fmt("%.2f", kTop + ph) + "\" x2=\"" + fmt("%.2f", px(t)) +
         "\" y2=\"" + fmt("%.2f", kTop + ph + 5) + "\" stroke=\"black\"/>\n";
    o += "<text x=\"" + fmt("%.2f", px(t)) + "\" y=\"" + fmt("%.2f", kTop + ph + 18) +
         "\" text-anchor=\"middle\">" + fmt("%g", t) + "</text>\n";
  }
  const std::vector<double> yt = [&] {
    if (!log_y) return nice_ticks(ylo, yhi);
    std::vector<double> t;
    for (double e = ylo; e <= yhi + 1e-9; e += 1)
      for (double m : {1.0, 2.0, 5.0}) {
        const double v = e + std::log10(m);
        if (v <= yhi + 1e-9) t.push_back(v);
      }
    return t;
  }();
  for (double t : yt) {
    const double label = log_y ? std::pow(10.0, t) : t;
    o += "<line x1=\"" + fmt("%.2f", kLeft - 5) + "\" y1=\"" + fmt("%.2f", py(t)) + "\" x2=\"" +
         fmt("%.2f", kLeft) + "\" y2=\"" + fmt("%.2f", py(t)) + "\" stroke=\"black\"/>\n";
    o += "<text x=\"" + fmt("%.2f", kLeft - 8) + "\" y=\"" + fmt("%.2f", py(t) + 4) + "\" text-anchor=\"end\">" +
         fmt("%g", std::round(label * 1e6) / 1e6) + "</text>\n";
  }
  o += "<text x=\"" + fmt("%.1f", kLeft + pw / 2) + "\" y=\"" + fmt("%.1f", kHeight - 12) +
       "\" text-anchor=\"middle\">bits per pixel</text>\n";
  o += "<text transform=\"translate(18," + fmt("%.1f", kTop + ph / 2) +
       ") rotate(-90)\" text-anchor=\"middle\">" + escape(ylabel) + "</text>\n";
  double legend_y = kTop + 16;
  for (const auto& s : series) {
    if (s.points.empty()) continue;
    std::string pts;
    for (auto [x, y] : s.points) pts += fmt("%.2f", px(x)) + "," + fmt("%.2f", py(y)) + " ";
    pts.pop_back();
    o += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"2\" points=\"" + pts + "\"/>\n";
    for (auto [x, y] : s.points)
      o += "<circle cx=\"" + fmt("%.2f", px(x)) + "\" cy=\"" + fmt("%.2f", py(y)) + "\" r=\"3\" fill=\"" +
           s.color + "\"/>\n";
    o += "<text x=\"" + fmt("%.1f", kLeft + pw - 10) + "\" y=\"" + fmt("%.1f", legend_y) +
         "\" text-anchor=\"end\" fill=\"" + s.color + "\">" + escape(s.label) + "</text>\n";
    legend_y += 16;
  }
  o += "</svg>\n";
  return o;
}

std::vector<SweepRow> by_rate(std::span<const SweepRow> rows) {
  std::vector<SweepRow> sorted(rows.begin(), rows.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const SweepRow& a, const SweepRow& b) { return a.bpp < b.bpp; });
  return sorted;
}

}  // namespace

std::string psnr_svg(std::span<const SweepRow> rows, const std::string& title) {
  Series hard{"hard decoded", "#1f77b4", {}}, soft{"restored", "#d62728", {}};
  for (const auto& r : by_rate(rows)) {
    if (std::isfinite(r.psnr_hard)) hard.points.emplace_back(r.bpp, r.psnr_hard);
    if (r.psnr_restored && std::isfinite(*r.psnr_restored)) soft.points.emplace_back(r.bpp, *r.psnr_restored);
  }
  return render({hard, soft}, title, "PSNR (dB)", false);
}

std::string pae_svg(std::span<const SweepRow> rows, const std::string& title) {
  Series hard{"hard decoded", "#1f77b4", {}}, soft{"restored", "#d62728", {}};
  for (const auto& r : by_rate(rows)) {
    if (r.pae_hard > 0) hard.points.emplace_back(r.bpp, std::log10(r.pae_hard));
    if (r.pae_restored && *r.pae_restored > 0) soft.points.emplace_back(r.bpp, std::log10(*r.pae_restored));
  }
  return render({hard, soft}, title, "peak absolute error", true);
}

}  // namespace llfz
