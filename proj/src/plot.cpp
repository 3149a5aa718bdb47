#include "ekgdipole/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace ekgdipole {

namespace {

constexpr int kPlotWidth = 1000;
constexpr int kRowHeight = 64;
constexpr int kMarginLeft = 56;
constexpr int kMarginTop = 28;
constexpr int kMaxPointsPerTrace = 1200;

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

// Emits one <polyline> per contiguous run of `keep` samples.
void emit_runs(std::ostringstream& svg, const std::vector<double>& xs,
               const std::vector<double>& ys, const std::vector<bool>& keep,
               const std::string& style) {
  std::ostringstream points;
  bool open = false;
  auto flush = [&] {
    if (open) {
      svg << "<polyline fill=\"none\" " << style << " points=\""
          << points.str() << "\"/>\n";
      points.str("");
      open = false;
    }
  };
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (keep[i] && std::isfinite(ys[i])) {
      points << num(xs[i]) << ',' << num(ys[i]) << ' ';
      open = true;
    } else {
      flush();
    }
  }
  flush();
}

}  // namespace

std::string reconstruction_overlay_svg(const EkgRecord& truth,
                                       const Matrix& imputed,
                                       const std::string& model_label) {
  if (imputed.rows() != truth.frames() || imputed.cols() != kNumLeads) {
    throw DimensionMismatch("imputed matrix shape does not match record");
  }
  const int T = truth.frames();
  const int stride = std::max(1, T / kMaxPointsPerTrace);
  const int height = kMarginTop + kNumLeads * kRowHeight + 16;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kPlotWidth
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << kPlotWidth << ' '
      << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kMarginLeft << "\" y=\"18\" font-size=\"14\" "
      << "font-family=\"sans-serif\">" << truth.record_id << " - "
      << model_label
      << " (observed solid, held-out truth dashed, imputation green)"
      << "</text>\n";

  const double plot_w = kPlotWidth - kMarginLeft - 12;
  for (int l = 0; l < kNumLeads; ++l) {
    const double y0 = kMarginTop + l * kRowHeight;
    // Row scale from every finite value involved.
    double lo = 1e300, hi = -1e300;
    for (int t = 0; t < T; ++t) {
      for (double v : {truth.samples(t, l), imputed(t, l)}) {
        if (std::isfinite(v)) {
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
      }
    }
    if (lo > hi) { lo = -1.0; hi = 1.0; }
    if (hi - lo < 1e-9) { hi += 0.5; lo -= 0.5; }
    const double pad = 0.08 * (hi - lo);
    lo -= pad; hi += pad;

    auto to_y = [&](double v) {
      return y0 + kRowHeight - kRowHeight * (v - lo) / (hi - lo);
    };

    std::vector<double> xs, truth_y, imp_y;
    std::vector<bool> observed, heldout, anymask;
    for (int t = 0; t < T; t += stride) {
      xs.push_back(kMarginLeft + plot_w * t / std::max(1, T - 1));
      truth_y.push_back(to_y(truth.samples(t, l)));
      imp_y.push_back(to_y(imputed(t, l)));
      const MaskState m = truth.mask_at(t, l);
      observed.push_back(m == MaskState::Observed);
      heldout.push_back(m == MaskState::HeldOut);
      anymask.push_back(m != MaskState::Observed);
    }

    svg << "<text x=\"6\" y=\"" << num(y0 + kRowHeight / 2.0)
        << "\" font-size=\"12\" font-family=\"sans-serif\">" << lead_names()[l]
        << "</text>\n";
    svg << "<line x1=\"" << kMarginLeft << "\" y1=\"" << num(y0 + kRowHeight)
        << "\" x2=\"" << kPlotWidth - 12 << "\" y2=\"" << num(y0 + kRowHeight)
        << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";

    emit_runs(svg, xs, imp_y, anymask,
              "stroke=\"#2ca02c\" stroke-width=\"1.2\"");
    emit_runs(svg, xs, truth_y, observed,
              "stroke=\"#1f77b4\" stroke-width=\"1\"");
    emit_runs(svg, xs, truth_y, heldout,
              "stroke=\"#d62728\" stroke-width=\"1\" stroke-dasharray=\"4 3\"");
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string median_distribution_svg(const ComparisonTable& table) {
  const int n = static_cast<int>(table.rows.size());
  const int width = 220 + 140 * std::max(1, n);
  const int height = 360;
  const int plot_top = 40, plot_bottom = height - 60;

  double lo = 1e300, hi = -1e300;
  for (const auto& row : table.rows) {
    lo = std::min(lo, row.ci_lo);
    hi = std::max(hi, row.ci_hi);
  }
  if (lo > hi) { lo = 0.0; hi = 1.0; }
  const double pad = 0.15 * std::max(hi - lo, 1e-9);
  lo -= pad; hi += pad;

  auto to_y = [&](double v) {
    return plot_bottom - (plot_bottom - plot_top) * (v - lo) / (hi - lo);
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << ' '
      << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"16\" y=\"22\" font-size=\"14\" "
         "font-family=\"sans-serif\">median held-out RMSE (mV), bootstrap "
         "distribution</text>\n";

  for (int tick = 0; tick <= 4; ++tick) {
    const double v = lo + (hi - lo) * tick / 4.0;
    svg << "<line x1=\"70\" y1=\"" << num(to_y(v)) << "\" x2=\"" << width - 20
        << "\" y2=\"" << num(to_y(v))
        << "\" stroke=\"#eeeeee\" stroke-width=\"1\"/>\n";
    char label[48];
    std::snprintf(label, sizeof(label), "%.4f", v);
    svg << "<text x=\"12\" y=\"" << num(to_y(v) + 4)
        << "\" font-size=\"11\" font-family=\"sans-serif\">" << label
        << "</text>\n";
  }

  for (int m = 0; m < n; ++m) {
    const auto& row = table.rows[m];
    const auto& boot = table.bootstraps.at(row.model);
    const double q25 = percentile(boot.median_samples, 25.0);
    const double q75 = percentile(boot.median_samples, 75.0);
    const double med = percentile(boot.median_samples, 50.0);
    const double cx = 140 + 140 * m;
    const double half = 36;

    svg << "<line x1=\"" << num(cx) << "\" y1=\"" << num(to_y(row.ci_lo))
        << "\" x2=\"" << num(cx) << "\" y2=\"" << num(to_y(row.ci_hi))
        << "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
    svg << "<rect x=\"" << num(cx - half) << "\" y=\"" << num(to_y(q75))
        << "\" width=\"" << num(2 * half) << "\" height=\""
        << num(to_y(q25) - to_y(q75))
        << "\" fill=\"#aec7e8\" stroke=\"#1f77b4\"/>\n";
    svg << "<line x1=\"" << num(cx - half) << "\" y1=\"" << num(to_y(med))
        << "\" x2=\"" << num(cx + half) << "\" y2=\"" << num(to_y(med))
        << "\" stroke=\"#d62728\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << num(cx) << "\" y=\"" << height - 28
        << "\" font-size=\"12\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\">"
        << row.model << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace ekgdipole
