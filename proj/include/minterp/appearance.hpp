#pragma once

#include <array>
#include <cmath>

#include "minterp/geometry.hpp"
#include "minterp/image_ops.hpp"

namespace minterp {

constexpr int kOrientationBins = 8;

// 8 gradient-orientation bins (mod pi) plus mean intensity. Bins are
// L1-normalized unless the window is flat, in which case they are all zero.
struct AppearanceDescriptor {
  std::array<double, kOrientationBins> bins{};
  double mean_intensity = 0.0;
};

inline int orientation_bin(double gx, double gy) {
  double theta = std::atan2(gy, gx);
  if (theta < 0) theta += M_PI;
  if (theta >= M_PI) theta -= M_PI;
  int b = int(theta / (M_PI / kOrientationBins));
  return std::clamp(b, 0, kOrientationBins - 1);
}

inline void l1_normalize(std::array<double, kOrientationBins>& bins) {
  double sum = 0.0;
  for (double v : bins) sum += v;
  if (sum > kEps)
    for (double& v : bins) v /= sum;
  else
    bins.fill(0.0);
}

inline AppearanceDescriptor descriptor_at(const ImagePatch& img, Vec2 center, int window) {
  if (window < 3 || window % 2 == 0)
    throw InvalidArgument("descriptor_at: window must be odd and >= 3");
  int r = window / 2;
  int cx = int(std::lround(center.x));
  int cy = int(std::lround(center.y));
  AppearanceDescriptor d;
  double isum = 0.0;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) {
      int x = cx + dx, y = cy + dy;
      double gx = (img.at_clamped(x + 1, y) - img.at_clamped(x - 1, y)) / 2.0;
      double gy = (img.at_clamped(x, y + 1) - img.at_clamped(x, y - 1)) / 2.0;
      double mag = std::hypot(gx, gy);
      if (mag > kEps) d.bins[orientation_bin(gx, gy)] += mag;
      isum += img.at_clamped(x, y);
    }
  l1_normalize(d.bins);
  d.mean_intensity = isum / (double(window) * window);
  return d;
}

// Mean of 5 point descriptors at arc-length fractions {0, .25, .5, .75, 1},
// window 5; bins re-normalized after averaging.
inline AppearanceDescriptor descriptor_along_contour(const ImagePatch& img,
                                                     const ContourPrim& c) {
  AppearanceDescriptor out;
  for (int i = 0; i < 5; ++i) {
    Vec2 p = point_at_fraction(c, i / 4.0);
    AppearanceDescriptor d = descriptor_at(img, p, 5);
    for (int b = 0; b < kOrientationBins; ++b) out.bins[b] += d.bins[b] / 5.0;
    out.mean_intensity += d.mean_intensity / 5.0;
  }
  l1_normalize(out.bins);
  return out;
}

// Gradient histogram pooled over all pixel centers inside the region.
inline AppearanceDescriptor descriptor_in_region(const ImagePatch& img,
                                                 const SquareRegionPrim& r) {
  r.validate();
  AppearanceDescriptor d;
  double isum = 0.0;
  int count = 0;
  int x0 = int(std::ceil(r.center_x - r.half() - kEps));
  int x1 = int(std::floor(r.center_x + r.half() + kEps));
  int y0 = int(std::ceil(r.center_y - r.half() - kEps));
  int y1 = int(std::floor(r.center_y + r.half() + kEps));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      if (!r.contains({double(x), double(y)})) continue;
      double gx = (img.at_clamped(x + 1, y) - img.at_clamped(x - 1, y)) / 2.0;
      double gy = (img.at_clamped(x, y + 1) - img.at_clamped(x, y - 1)) / 2.0;
      double mag = std::hypot(gx, gy);
      if (mag > kEps) d.bins[orientation_bin(gx, gy)] += mag;
      isum += img.at_clamped(x, y);
      ++count;
    }
  if (count == 0) throw EmptyRegion("descriptor_in_region: region covers no pixel centers");
  l1_normalize(d.bins);
  d.mean_intensity = isum / count;
  return d;
}

// Chi-squared distance over bins plus absolute mean-intensity difference.
inline double descriptor_distance(const AppearanceDescriptor& a, const AppearanceDescriptor& b) {
  double chi2 = 0.0;
  for (int i = 0; i < kOrientationBins; ++i) {
    double diff = a.bins[i] - b.bins[i];
    chi2 += diff * diff / (a.bins[i] + b.bins[i] + 1e-9);
  }
  return chi2 + std::abs(a.mean_intensity - b.mean_intensity);
}

}  // namespace minterp
