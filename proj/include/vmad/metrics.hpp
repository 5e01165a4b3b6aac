#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "vmad/errors.hpp"
#include "vmad/text.hpp"

namespace vmad {

// Classification convention, used everywhere: an attempt is called
// "morph" when its score is strictly greater than the threshold.

struct LabeledScoreSet {
  std::vector<double> bonafide;
  std::vector<double> morph;
};

// [OP] apcer: fraction of morph attempts classified bona fide (<= thr).
inline double apcer(std::span<const double> morph_scores, double thr) {
  if (morph_scores.empty()) fail(ErrorCode::EmptySet, "apcer: no morph scores");
  size_t n = 0;
  for (double s : morph_scores)
    if (s <= thr) ++n;
  return static_cast<double>(n) / static_cast<double>(morph_scores.size());
}

// [OP] bpcer: fraction of bona fide attempts classified morphed (> thr).
inline double bpcer(std::span<const double> bonafide_scores, double thr) {
  if (bonafide_scores.empty()) fail(ErrorCode::EmptySet, "bpcer: no bona fide scores");
  size_t n = 0;
  for (double s : bonafide_scores)
    if (s > thr) ++n;
  return static_cast<double>(n) / static_cast<double>(bonafide_scores.size());
}

struct DetPoint {
  double threshold = 0.0;
  double apcer = 0.0;
  double bpcer = 0.0;
};

// One operating point per distinct score, plus sentinel thresholds just
// outside the score range so the curve always spans (apcer, bpcer) from
// (0,1) to (1,0). Thresholds strictly increase; apcer is nondecreasing
// and bpcer nonincreasing along the curve.
struct DetCurve {
  std::vector<DetPoint> points;
};

inline DetCurve det_curve(const LabeledScoreSet& set) {
  if (set.bonafide.empty()) fail(ErrorCode::EmptySet, "det_curve: no bona fide scores");
  if (set.morph.empty()) fail(ErrorCode::EmptySet, "det_curve: no morph scores");
  for (double s : set.bonafide)
    if (!std::isfinite(s)) fail(ErrorCode::InvalidArgument, "non-finite bona fide score");
  for (double s : set.morph)
    if (!std::isfinite(s)) fail(ErrorCode::InvalidArgument, "non-finite morph score");

  std::vector<double> bf(set.bonafide), mo(set.morph);
  std::sort(bf.begin(), bf.end());
  std::sort(mo.begin(), mo.end());

  std::vector<double> thresholds;
  thresholds.reserve(bf.size() + mo.size() + 2);
  thresholds.push_back(std::min(bf.front(), mo.front()) - 1.0);
  {
    std::vector<double> u;
    u.reserve(bf.size() + mo.size());
    std::merge(bf.begin(), bf.end(), mo.begin(), mo.end(), std::back_inserter(u));
    u.erase(std::unique(u.begin(), u.end()), u.end());
    thresholds.insert(thresholds.end(), u.begin(), u.end());
  }
  thresholds.push_back(std::max(bf.back(), mo.back()) + 1.0);

  DetCurve curve;
  curve.points.reserve(thresholds.size());
  const double nb = static_cast<double>(bf.size());
  const double nm = static_cast<double>(mo.size());
  for (double t : thresholds) {
    // counts via binary search over the sorted populations
    double a = static_cast<double>(std::upper_bound(mo.begin(), mo.end(), t) - mo.begin()) / nm;
    double b = static_cast<double>(bf.end() - std::upper_bound(bf.begin(), bf.end(), t)) / nb;
    curve.points.push_back({t, a, b});
  }
  return curve;
}

enum class EerConvention {
  Interpolated,  // linear interpolation across the sign change of apcer-bpcer
  StepMidpoint,  // (apcer+bpcer)/2 at the first point where apcer >= bpcer
};

struct EerResult {
  double rate = 0.0;
  double threshold = 0.0;
};

// apcer - bpcer is nondecreasing along the curve, so the equal-error
// point sits at its sign change; with sentinel points the change always
// exists for curves built by det_curve.
inline EerResult eer(const DetCurve& curve, EerConvention convention = EerConvention::Interpolated) {
  const auto& pts = curve.points;
  size_t k = 0;
  while (k < pts.size() && pts[k].apcer - pts[k].bpcer < 0.0) ++k;
  if (k == pts.size())
    fail(ErrorCode::DegenerateCurve, "apcer never reaches bpcer");

  const double dk = pts[k].apcer - pts[k].bpcer;
  if (convention == EerConvention::StepMidpoint)
    return {0.5 * (pts[k].apcer + pts[k].bpcer), pts[k].threshold};

  if (dk == 0.0) return {pts[k].apcer, pts[k].threshold};
  if (k == 0)
    fail(ErrorCode::DegenerateCurve, "curve starts past the equal-error point");
  const DetPoint& p = pts[k - 1];
  const DetPoint& q = pts[k];
  const double dp = p.apcer - p.bpcer;  // < 0
  const double lambda = -dp / (dk - dp);
  return {p.apcer + lambda * (q.apcer - p.apcer), p.threshold + lambda * (q.threshold - p.threshold)};
}

// Lowest bpcer among operating points with apcer not exceeding alpha;
// 1.0 when no point qualifies. alpha = 0.10 / 0.05 / 0.01 give the
// BPCER10 / BPCER20 / BPCER100 operating points.
inline double bpcer_at_apcer(const DetCurve& curve, double alpha) {
  double best = 1.0;
  for (const auto& p : curve.points)
    if (p.apcer <= alpha) best = std::min(best, p.bpcer);
  return best;
}

// Standard-normal-deviate transform used on DET plot axes. Rates are
// clamped away from 0 and 1 to keep the deviate finite; presentation
// only, never used in metric computations.
inline double normal_deviate(double rate) {
  static const boost::math::normal_distribution<double> unit;
  const double p = std::clamp(rate, 1e-9, 1.0 - 1e-9);
  return boost::math::quantile(unit, p);
}

struct SummaryRow {
  std::string strategy;
  double eer = 0.0;
  double bpcer10 = 0.0;
  double bpcer20 = 0.0;
  double bpcer100 = 0.0;
};

inline SummaryRow summarize(const std::string& strategy, const DetCurve& curve,
                            EerConvention convention = EerConvention::Interpolated) {
  SummaryRow row;
  row.strategy = strategy;
  row.eer = eer(curve, convention).rate;
  row.bpcer10 = bpcer_at_apcer(curve, 0.10);
  row.bpcer20 = bpcer_at_apcer(curve, 0.05);
  row.bpcer100 = bpcer_at_apcer(curve, 0.01);
  return row;
}

inline constexpr const char* kSummaryHeader = "strategy,eer,bpcer10,bpcer20,bpcer100";
inline constexpr const char* kDetTableHeader = "threshold,apcer,bpcer,apcer_nd,bpcer_nd";

inline std::string save_summary_table(std::span<const SummaryRow> rows) {
  std::string out;
  out += kSummaryHeader;
  out += "\n";
  for (const auto& r : rows)
    out += r.strategy + "," + format_double(r.eer) + "," + format_double(r.bpcer10) + "," +
           format_double(r.bpcer20) + "," + format_double(r.bpcer100) + "\n";
  return out;
}

inline std::string save_det_table(const DetCurve& curve) {
  std::string out;
  out += kDetTableHeader;
  out += "\n";
  for (const auto& p : curve.points)
    out += format_double(p.threshold) + "," + format_double(p.apcer) + "," +
           format_double(p.bpcer) + "," + format_double(normal_deviate(p.apcer)) + "," +
           format_double(normal_deviate(p.bpcer)) + "\n";
  return out;
}

// Minimal SVG DET plot, both axes in normal-deviate scale.
inline std::string save_det_svg(std::span<const std::pair<std::string, DetCurve>> curves) {
  const double lo = normal_deviate(0.001), hi = normal_deviate(0.999);
  const double W = 640, H = 640, M = 60;
  auto sx = [&](double nd) { return M + (std::clamp(nd, lo, hi) - lo) / (hi - lo) * (W - 2 * M); };
  auto sy = [&](double nd) { return H - M - (std::clamp(nd, lo, hi) - lo) / (hi - lo) * (H - 2 * M); };

  static const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                  "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  static const double kTicks[] = {0.001, 0.01, 0.05, 0.1, 0.2, 0.5, 0.9};

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + format_double(W) +
         "\" height=\"" + format_double(H) + "\">\n";
  svg += "<rect x=\"" + format_double(M) + "\" y=\"" + format_double(M) + "\" width=\"" +
         format_double(W - 2 * M) + "\" height=\"" + format_double(H - 2 * M) +
         "\" fill=\"white\" stroke=\"black\"/>\n";
  for (double t : kTicks) {
    const double nd = normal_deviate(t);
    svg += "<line x1=\"" + format_double(sx(nd)) + "\" y1=\"" + format_double(M) + "\" x2=\"" +
           format_double(sx(nd)) + "\" y2=\"" + format_double(H - M) +
           "\" stroke=\"#dddddd\"/>\n";
    svg += "<line x1=\"" + format_double(M) + "\" y1=\"" + format_double(sy(nd)) + "\" x2=\"" +
           format_double(W - M) + "\" y2=\"" + format_double(sy(nd)) +
           "\" stroke=\"#dddddd\"/>\n";
    svg += "<text x=\"" + format_double(sx(nd)) + "\" y=\"" + format_double(H - M + 16) +
           "\" font-size=\"10\" text-anchor=\"middle\">" + format_double(t, 3) + "</text>\n";
    svg += "<text x=\"" + format_double(M - 6) + "\" y=\"" + format_double(sy(nd) + 3) +
           "\" font-size=\"10\" text-anchor=\"end\">" + format_double(t, 3) + "</text>\n";
  }
  svg += "<text x=\"" + format_double(W / 2) + "\" y=\"" + format_double(H - 14) +
         "\" font-size=\"12\" text-anchor=\"middle\">APCER</text>\n";
  svg += "<text x=\"16\" y=\"" + format_double(H / 2) +
         "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         format_double(H / 2) + ")\">BPCER</text>\n";

  size_t ci = 0;
  for (const auto& [name, curve] : curves) {
    const char* color = kColors[ci % (sizeof(kColors) / sizeof(kColors[0]))];
    std::string pointstr;
    for (const auto& p : curve.points) {
      pointstr += format_double(sx(normal_deviate(p.apcer)), 6) + "," +
                  format_double(sy(normal_deviate(p.bpcer)), 6) + " ";
    }
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" points=\"" + pointstr +
           "\"/>\n";
    svg += "<text x=\"" + format_double(W - M + 4) + "\" y=\"" +
           format_double(M + 14 * static_cast<double>(ci + 1)) + "\" font-size=\"11\" fill=\"" +
           color + "\">" + name + "</text>\n";
    ++ci;
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace vmad
