#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "llfz/codec.hpp"
#include "llfz/lightfield.hpp"

namespace llfz {

class DNetModel;

/// 10 log10(255^2 / MSE) over every sample; +inf for identical inputs.
double psnr(const LightField& a, const LightField& b);

/// Peak absolute error, max |a - b|.
int pae(const LightField& a, const LightField& b);

/// Container bytes * 8 / samples, header included.
double bpp(std::size_t container_bytes, const Dims& dims);
double bpp(const Bitstream& bs);

struct RDPoint {
  double rate = 0;  // bpp
  double psnr = 0;  // dB
  int pae = 0;
};

/// Points in strictly increasing rate.
struct RDCurve {
  std::vector<RDPoint> points;

  /// Sorts by rate; throws invalid_argument on repeated or non-positive rates.
  static RDCurve from_points(std::vector<RDPoint> points);
};

struct BdResult {
  double value = 0;
  /// Set when a curve has fewer than four points and the fit degrades to
  /// linear or quadratic.
  bool low_confidence = false;
};

/// Least-squares polynomial fit; coefficients in increasing degree.
std::vector<double> polyfit(std::span<const double> x, std::span<const double> y, std::size_t degree);
double polyval(std::span<const double> coeffs, double x);

/// Mean PSNR gain of b over a across the shared log10-rate interval, dB.
BdResult bd_psnr(const RDCurve& a, const RDCurve& b);
/// Mean rate change of b relative to a across the shared PSNR interval, percent.
BdResult bd_rate(const RDCurve& a, const RDCurve& b);

struct SweepRow {
  int tau = 0;
  double bpp = 0;
  double psnr_hard = 0;
  std::optional<double> psnr_restored;
  int pae_hard = 0;
  std::optional<int> pae_restored;
};

/// Encode, decode and optionally restore at each tau. `models` is either
/// empty or parallel to `taus`, with null entries for taus that have no model.
std::vector<SweepRow> rd_sweep(const LightField& lf, std::span<const int> taus,
                               std::span<const DNetModel* const> models = {});

RDCurve hard_curve(std::span<const SweepRow> rows);
RDCurve restored_curve(std::span<const SweepRow> rows);  // rows with a restored value only

/// CSV with header tau,bpp,psnr_hard,psnr_restored,pae_hard,pae_restored.
/// Missing restored values are empty fields; infinite PSNR is "inf".
std::string to_csv(std::span<const SweepRow> rows);
std::vector<SweepRow> parse_csv(const std::string& text);

/// PSNR against bpp, linear axes.
std::string psnr_svg(std::span<const SweepRow> rows, const std::string& title);
/// PAE against bpp, logarithmic PAE axis; zero PAE points are omitted.
std::string pae_svg(std::span<const SweepRow> rows, const std::string& title);

}  // namespace llfz
