#pragma once

#include "faceerase/imaging/image.hpp"

namespace faceerase::imaging {

/// Thresholds are fractions of the maximum smoothed-gradient magnitude.
struct CannyParams {
  double sigma = 2.0;
  double low = 0.10;
  double high = 0.20;
};

/// Gaussian smoothing, Sobel gradients, non-maximum suppression and
/// 8-connected hysteresis. Returns a strictly binary map; a constant image
/// yields all zeros.
EdgeMap canny_edges(const GrayImage& img, const CannyParams& params = {});

/// Separable Gaussian blur (kernel radius round(4 sigma), clamped borders).
GrayImage gaussian_blur(const GrayImage& img, double sigma);

}  // namespace faceerase::imaging
