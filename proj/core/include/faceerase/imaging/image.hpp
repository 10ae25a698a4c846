#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace faceerase::imaging {

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Row-major, channel-interleaved raster.
template <typename T, int Channels>
class Raster {
 public:
  static constexpr int kChannels = Channels;
  using value_type = T;

  Raster() = default;
  Raster(int height, int width, T fill = T{})
      : height_(height),
        width_(width),
        data_(static_cast<std::size_t>(height) * width * Channels, fill) {
    if (height < 1 || width < 1) throw ImageError("raster extent must be positive");
  }

  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] std::size_t pixel_count() const { return static_cast<std::size_t>(height_) * width_; }
  [[nodiscard]] bool empty() const { return data_.empty(); }

  T& at(int r, int c, int ch = 0) { return data_[index(r, c, ch)]; }
  const T& at(int r, int c, int ch = 0) const { return data_[index(r, c, ch)]; }

  [[nodiscard]] std::span<T> data() { return data_; }
  [[nodiscard]] std::span<const T> data() const { return data_; }
  [[nodiscard]] bool same_size(int h, int w) const { return h == height_ && w == width_; }
  template <typename R>
  [[nodiscard]] bool same_size(const R& other) const {
    return same_size(other.height(), other.width());
  }

  friend bool operator==(const Raster&, const Raster&) = default;

 protected:
  [[nodiscard]] std::size_t index(int r, int c, int ch) const {
    return (static_cast<std::size_t>(r) * width_ + c) * Channels + ch;
  }

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

/// Unit-interval RGB image.
class ImageRGB : public Raster<float, 3> {
 public:
  using Raster::Raster;
};

/// Unit-interval single-channel intensity.
class GrayImage : public Raster<float, 1> {
 public:
  using Raster::Raster;
};

/// Unit-interval edge strength; Canny output is strictly 0 or 1.
class EdgeMap : public Raster<float, 1> {
 public:
  using Raster::Raster;
};

/// 1 marks the hole region.
class BinaryMask : public Raster<std::uint8_t, 1> {
 public:
  using Raster::Raster;
  [[nodiscard]] std::size_t count() const;
  [[nodiscard]] double fill_fraction() const {
    return static_cast<double>(count()) / static_cast<double>(pixel_count());
  }
  /// True when every set pixel of *this is also set in `other`.
  [[nodiscard]] bool subset_of(const BinaryMask& other) const;
};

BinaryMask mask_union(const BinaryMask& a, const BinaryMask& b);

struct Point2 {
  double x = 0;
  double y = 0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

inline constexpr int kLandmarkCount = 106;

/// 106 ordered facial key points in pixel coordinates.
struct Landmarks106 {
  std::array<Point2, kLandmarkCount> points{};

  Point2& operator[](std::size_t i) { return points[i]; }
  const Point2& operator[](std::size_t i) const { return points[i]; }
  /// Mean of the points with the given indices.
  [[nodiscard]] Point2 centroid(std::span<const int> indices) const;
  [[nodiscard]] bool inside(int height, int width) const;
};

// 0.299 R + 0.587 G + 0.114 B
GrayImage to_grayscale(const ImageRGB& img);

/// Bilinear resize with pixel-center alignment.
ImageRGB resize(const ImageRGB& img, int height, int width);
GrayImage resize(const GrayImage& img, int height, int width);
/// Nearest-neighbour resize, keeps masks binary.
BinaryMask resize_nearest(const BinaryMask& mask, int height, int width);

/// Bilinear sample with clamp-to-edge borders.
template <typename R>
float sample_bilinear(const R& img, double x, double y, int ch = 0);

}  // namespace faceerase::imaging
