#pragma once

#include <cmath>
#include <vector>

#include "minterp/geometry.hpp"

namespace minterp {

// Bilinear sample at a subpixel position; coordinates clamped to the valid
// pixel-center range first.
inline double bilinear_at(const ImagePatch& img, double x, double y) {
  x = std::clamp(x, 0.0, double(img.width - 1));
  y = std::clamp(y, 0.0, double(img.height - 1));
  int x0 = int(std::floor(x)), y0 = int(std::floor(y));
  int x1 = std::min(x0 + 1, img.width - 1), y1 = std::min(y0 + 1, img.height - 1);
  double fx = x - x0, fy = y - y0;
  double top = img.at(x0, y0) * (1 - fx) + img.at(x1, y0) * fx;
  double bot = img.at(x0, y1) * (1 - fx) + img.at(x1, y1) * fx;
  return top * (1 - fy) + bot * fy;
}

inline std::vector<double> gaussian_kernel(double sigma) {
  int radius = int(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable Gaussian blur with clamp-to-edge borders.
inline ImagePatch gaussian_blur(const ImagePatch& img, double sigma) {
  std::vector<double> k = gaussian_kernel(sigma);
  int radius = int(k.size() / 2);
  ImagePatch tmp(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * img.at_clamped(x + i, y);
      tmp.at(x, y) = std::clamp(acc, 0.0, 1.0);
    }
  ImagePatch out(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * tmp.at_clamped(x, y + i);
      out.at(x, y) = std::clamp(acc, 0.0, 1.0);
    }
  return out;
}

// Difference-of-Gaussians response map, sigma 1 minus sigma 2.
struct DoGMaps {
  ImagePatch narrow;  // sigma = 1
  ImagePatch wide;    // sigma = 2

  double response_at(double x, double y) const {
    return bilinear_at(narrow, x, y) - bilinear_at(wide, x, y);
  }
};

inline DoGMaps dog_maps(const ImagePatch& img) {
  return {gaussian_blur(img, 1.0), gaussian_blur(img, 2.0)};
}

struct GradientField {
  int width = 0;
  int height = 0;
  std::vector<double> gx;
  std::vector<double> gy;

  double mag(int x, int y) const {
    size_t i = static_cast<size_t>(y) * width + x;
    return std::hypot(gx[i], gy[i]);
  }
};

// Central-difference gradients with clamp-to-edge borders.
inline GradientField central_gradients(const ImagePatch& img) {
  GradientField g;
  g.width = img.width;
  g.height = img.height;
  g.gx.resize(img.intensities.size());
  g.gy.resize(img.intensities.size());
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      size_t i = static_cast<size_t>(y) * img.width + x;
      g.gx[i] = (img.at_clamped(x + 1, y) - img.at_clamped(x - 1, y)) / 2.0;
      g.gy[i] = (img.at_clamped(x, y + 1) - img.at_clamped(x, y - 1)) / 2.0;
    }
  return g;
}

}  // namespace minterp
