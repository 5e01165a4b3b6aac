#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "vmad/dataset.hpp"
#include "vmad/errors.hpp"
#include "vmad/image.hpp"

namespace vmad {

// Tunables for the classical quality components. Defaults: native 8-bit
// histogram resolution, 3x3 mean filter, 0-100 output scale.
struct QualityConfig {
  long histogram_bins = 256;
  long filter_radius = 1;  // 3x3
  double scale = 100.0;
};

namespace detail {

inline void check_box(const GrayImage& img, const FaceBox& box, long min_w, long min_h) {
  if (box.w < min_w || box.h < min_h)
    fail(ErrorCode::DegenerateBox, "face box " + std::to_string(box.w) + "x" +
                                       std::to_string(box.h) + " below " +
                                       std::to_string(min_w) + "x" + std::to_string(min_h));
  if (box.x < 0 || box.y < 0 || box.x + box.w > img.width || box.y + box.h > img.height)
    fail(ErrorCode::BoxOutOfBounds,
         "face box exceeds " + std::to_string(img.width) + "x" + std::to_string(img.height));
}

inline std::vector<double> luminance_histogram(const GrayImage& img, long x0, long x1, long y0,
                                               long y1, long bins) {
  std::vector<double> h(static_cast<size_t>(bins), 0.0);
  long count = 0;
  for (long r = y0; r < y1; ++r) {
    for (long c = x0; c < x1; ++c) {
      long b = static_cast<long>(img.at(r, c)) * bins / 256;
      h[static_cast<size_t>(b)] += 1.0;
      ++count;
    }
  }
  if (count > 0)
    for (double& v : h) v /= static_cast<double>(count);
  return h;
}

}  // namespace detail

// Intersection of the normalized luminance histograms of the left and
// right halves of the face box (middle column dropped for odd widths).
// 100 = identical left/right illumination, 0 = disjoint histograms.
inline double illumination_uniformity(const GrayImage& img, const FaceBox& box,
                                      const QualityConfig& cfg = {}) {
  detail::check_box(img, box, /*min_w=*/2, /*min_h=*/1);
  const long half = box.w / 2;
  auto left = detail::luminance_histogram(img, box.x, box.x + half, box.y, box.y + box.h,
                                          cfg.histogram_bins);
  auto right = detail::luminance_histogram(img, box.x + (box.w + 1) / 2, box.x + box.w, box.y,
                                           box.y + box.h, cfg.histogram_bins);
  double inter = 0.0;
  for (size_t b = 0; b < left.size(); ++b) inter += std::min(left[b], right[b]);
  return cfg.scale * inter;
}

// Mean absolute residual between the face box and its mean-filtered
// version (edge replication at the box border), scaled so a constant
// region gives 0. Higher = sharper.
inline double defocus(const GrayImage& img, const FaceBox& box, const QualityConfig& cfg = {}) {
  const long side = 2 * cfg.filter_radius + 1;
  detail::check_box(img, box, side, side);
  const long R = cfg.filter_radius;
  double total = 0.0;
  for (long r = 0; r < box.h; ++r) {
    for (long c = 0; c < box.w; ++c) {
      double sum = 0.0;
      for (long dr = -R; dr <= R; ++dr) {
        for (long dc = -R; dc <= R; ++dc) {
          long rr = std::clamp(r + dr, 0L, box.h - 1);
          long cc = std::clamp(c + dc, 0L, box.w - 1);
          sum += img.at(box.y + rr, box.x + cc);
        }
      }
      double smoothed = sum / static_cast<double>(side * side);
      total += std::abs(static_cast<double>(img.at(box.y + r, box.x + c)) - smoothed);
    }
  }
  double mean_residual = total / (static_cast<double>(box.w) * box.h);
  return cfg.scale * mean_residual / 255.0;
}

// Maps a raw quality track value into a [0,1] fusion weight.
struct QualityNormalization {
  enum class Kind { Identity, DivideBy100, DivideByDatasetMedian };
  Kind kind = Kind::Identity;
  double statistic = 0.0;  // dataset median, for DivideByDatasetMedian

  bool operator==(const QualityNormalization&) const = default;
};

inline double normalize_quality(double raw, const QualityNormalization& norm) {
  double v = raw;
  switch (norm.kind) {
    case QualityNormalization::Kind::Identity:
      break;
    case QualityNormalization::Kind::DivideBy100:
      v = raw / 100.0;
      break;
    case QualityNormalization::Kind::DivideByDatasetMedian:
      if (!(norm.statistic > 0.0))
        fail(ErrorCode::InvalidStatistic, "median statistic must be positive");
      v = raw / norm.statistic;
      break;
  }
  return std::clamp(v, 0.0, 1.0);
}

// Same convention as fuse_med: for even n, mean of the two central
// order statistics.
inline double dataset_median(std::span<const double> values) {
  if (values.empty()) fail(ErrorCode::EmptySet, "dataset_median");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace vmad
