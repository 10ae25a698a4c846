#include "faceerase/imaging/image.hpp"

#include <algorithm>
#include <cmath>

namespace faceerase::imaging {

std::size_t BinaryMask::count() const {
  std::size_t n = 0;
  for (auto v : data()) n += v != 0;
  return n;
}

bool BinaryMask::subset_of(const BinaryMask& other) const {
  if (!same_size(other)) return false;
  auto a = data();
  auto b = other.data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] && !b[i]) return false;
  }
  return true;
}

BinaryMask mask_union(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_size(b)) throw ImageError("mask_union: size mismatch");
  BinaryMask out = a;
  auto o = out.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = (o[i] || bv[i]) ? 1 : 0;
  return out;
}

Point2 Landmarks106::centroid(std::span<const int> indices) const {
  Point2 c;
  for (int i : indices) {
    c.x += points[static_cast<std::size_t>(i)].x;
    c.y += points[static_cast<std::size_t>(i)].y;
  }
  const double n = static_cast<double>(indices.size());
  return {c.x / n, c.y / n};
}

bool Landmarks106::inside(int height, int width) const {
  return std::all_of(points.begin(), points.end(), [&](const Point2& p) {
    return p.x >= 0 && p.y >= 0 && p.x <= width - 1 && p.y <= height - 1;
  });
}

GrayImage to_grayscale(const ImageRGB& img) {
  GrayImage out(img.height(), img.width());
  for (int r = 0; r < img.height(); ++r)
    for (int c = 0; c < img.width(); ++c) {
      const float v = 0.299f * img.at(r, c, 0) + 0.587f * img.at(r, c, 1) + 0.114f * img.at(r, c, 2);
      out.at(r, c) = std::clamp(v, 0.0f, 1.0f);
    }
  return out;
}

template <typename R>
float sample_bilinear(const R& img, double x, double y, int ch) {
  x = std::clamp(x, 0.0, static_cast<double>(img.width() - 1));
  y = std::clamp(y, 0.0, static_cast<double>(img.height() - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const double ax = x - x0;
  const double ay = y - y0;
  const double top = (1 - ax) * img.at(y0, x0, ch) + ax * img.at(y0, x1, ch);
  const double bot = (1 - ax) * img.at(y1, x0, ch) + ax * img.at(y1, x1, ch);
  return static_cast<float>((1 - ay) * top + ay * bot);
}

template float sample_bilinear<ImageRGB>(const ImageRGB&, double, double, int);
template float sample_bilinear<GrayImage>(const GrayImage&, double, double, int);
template float sample_bilinear<EdgeMap>(const EdgeMap&, double, double, int);

namespace {
template <typename R>
R resize_bilinear(const R& img, int height, int width) {
  R out(height, width);
  const double sy = static_cast<double>(img.height()) / height;
  const double sx = static_cast<double>(img.width()) / width;
  // Shrinking averages a grid of taps across the source footprint.
  const int ty = std::max(1, static_cast<int>(std::ceil(sy)));
  const int tx = std::max(1, static_cast<int>(std::ceil(sx)));
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) {
      for (int ch = 0; ch < R::kChannels; ++ch) {
        double acc = 0;
        for (int i = 0; i < ty; ++i)
          for (int j = 0; j < tx; ++j) {
            const double y = r * sy + (i + 0.5) * sy / ty - 0.5;
            const double x = c * sx + (j + 0.5) * sx / tx - 0.5;
            acc += sample_bilinear(img, x, y, ch);
          }
        out.at(r, c, ch) = static_cast<float>(acc / (ty * tx));
      }
    }
  return out;
}
}  // namespace

ImageRGB resize(const ImageRGB& img, int height, int width) { return resize_bilinear(img, height, width); }
GrayImage resize(const GrayImage& img, int height, int width) {
  return resize_bilinear(img, height, width);
}

BinaryMask resize_nearest(const BinaryMask& mask, int height, int width) {
  BinaryMask out(height, width);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) {
      const int sr = std::min(mask.height() - 1, static_cast<int>((r + 0.5) * mask.height() / height));
      const int sc = std::min(mask.width() - 1, static_cast<int>((c + 0.5) * mask.width() / width));
      out.at(r, c) = mask.at(sr, sc);
    }
  return out;
}

}  // namespace faceerase::imaging
