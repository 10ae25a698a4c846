#include "faceerase/imaging/canny.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace faceerase::imaging {

GrayImage gaussian_blur(const GrayImage& img, double sigma) {
  const int radius = static_cast<int>(4.0 * sigma + 0.5);
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += kernel[static_cast<std::size_t>(i + radius)];
  }
  for (double& k : kernel) k /= total;

  const int h = img.height();
  const int w = img.width();
  std::vector<double> tmp(static_cast<std::size_t>(h) * w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      double acc = 0;
      for (int i = -radius; i <= radius; ++i) {
        acc += kernel[static_cast<std::size_t>(i + radius)] * img.at(r, std::clamp(c + i, 0, w - 1));
      }
      tmp[static_cast<std::size_t>(r) * w + c] = acc;
    }
  GrayImage out(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      double acc = 0;
      for (int i = -radius; i <= radius; ++i) {
        acc += kernel[static_cast<std::size_t>(i + radius)] *
               tmp[static_cast<std::size_t>(std::clamp(r + i, 0, h - 1)) * w + c];
      }
      out.at(r, c) = static_cast<float>(acc);
    }
  return out;
}

EdgeMap canny_edges(const GrayImage& img, const CannyParams& params) {
  if (params.sigma <= 0) throw ImageError("canny: sigma must be positive");
  if (!(params.low > 0 && params.low < params.high && params.high <= 1)) {
    throw ImageError("canny: need 0 < low < high <= 1");
  }
  const int h = img.height();
  const int w = img.width();
  const GrayImage s = gaussian_blur(img, params.sigma);
  auto px = [&](int r, int c) -> double {
    return s.at(std::clamp(r, 0, h - 1), std::clamp(c, 0, w - 1));
  };

  std::vector<double> gx(static_cast<std::size_t>(h) * w);
  std::vector<double> gy(gx.size());
  std::vector<double> mag(gx.size());
  double max_mag = 0;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const double dx = (px(r - 1, c + 1) + 2 * px(r, c + 1) + px(r + 1, c + 1)) -
                        (px(r - 1, c - 1) + 2 * px(r, c - 1) + px(r + 1, c - 1));
      const double dy = (px(r + 1, c - 1) + 2 * px(r + 1, c) + px(r + 1, c + 1)) -
                        (px(r - 1, c - 1) + 2 * px(r - 1, c) + px(r - 1, c + 1));
      const std::size_t i = static_cast<std::size_t>(r) * w + c;
      gx[i] = dx;
      gy[i] = dy;
      mag[i] = std::hypot(dx, dy);
      max_mag = std::max(max_mag, mag[i]);
    }

  EdgeMap out(h, w, 0.0f);
  // Constant images have gradients at rounding level only.
  if (max_mag <= 1e-9) return out;

  auto m = [&](int r, int c) -> double {
    if (r < 0 || r >= h || c < 0 || c >= w) return 0.0;
    return mag[static_cast<std::size_t>(r) * w + c];
  };

  // Non-maximum suppression along the quantized gradient direction. The
  // strict/non-strict pair keeps exactly one pixel on symmetric plateaus.
  std::vector<std::uint8_t> state(gx.size(), 0);  // 0 none, 1 weak, 2 strong
  const double low = params.low * max_mag;
  const double high = params.high * max_mag;
  constexpr double kTan22 = 0.41421356237309503;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * w + c;
      const double v = mag[i];
      if (v < low) continue;
      const double ax = std::abs(gx[i]);
      const double ay = std::abs(gy[i]);
      int dr = 0;
      int dc = 0;
      if (ay <= kTan22 * ax) {
        dc = 1;
      } else if (ax <= kTan22 * ay) {
        dr = 1;
      } else {
        dr = 1;
        dc = (gx[i] * gy[i] > 0) ? 1 : -1;
      }
      if (v > m(r - dr, c - dc) && v >= m(r + dr, c + dc)) state[i] = v >= high ? 2 : 1;
    }

  std::vector<int> stack;
  for (std::size_t i = 0; i < state.size(); ++i) {
    if (state[i] == 2) stack.push_back(static_cast<int>(i));
  }
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    const int r = i / w;
    const int c = i % w;
    out.at(r, c) = 1.0f;
    for (int dr = -1; dr <= 1; ++dr)
      for (int dc = -1; dc <= 1; ++dc) {
        const int rr = r + dr;
        const int cc = c + dc;
        if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
        const std::size_t j = static_cast<std::size_t>(rr) * w + cc;
        if (state[j] == 1) {
          state[j] = 2;
          stack.push_back(static_cast<int>(j));
        }
      }
  }
  return out;
}

}  // namespace faceerase::imaging
