#pragma once

#include "faceerase/imaging/image.hpp"
#include "faceerase/imaging/landmarks.hpp"

namespace faceerase::imaging {

class AlignmentError : public ImageError {
 public:
  using ImageError::ImageError;
};

/// p' = s R(theta) p + t, stored as [a -b; b a] with a = s cos, b = s sin.
struct Similarity {
  double a = 1;
  double b = 0;
  double tx = 0;
  double ty = 0;

  [[nodiscard]] Point2 apply(const Point2& p) const {
    return {a * p.x - b * p.y + tx, b * p.x + a * p.y + ty};
  }
  [[nodiscard]] Similarity inverse() const;
  [[nodiscard]] double rotation() const;
  [[nodiscard]] double scale() const;
  /// (*this)(other(p)).
  [[nodiscard]] Similarity compose(const Similarity& other) const;

  static Similarity rotation_about(const Point2& center, double radians);
};

/// Least-squares similarity taking each src point to its dst counterpart.
Similarity fit_similarity(std::span<const Point2> src, std::span<const Point2> dst);

struct AlignedFace {
  ImageRGB image;
  Landmarks106 landmarks;
  Similarity crop_from_frame;  // aligned = crop_from_frame(original)
};

/// Warps the face so its eye and mouth centres land on the canonical
/// anchors of an out_size crop.
AlignedFace align_face(const ImageRGB& img, const Landmarks106& lm, int out_size = 256);

/// out(q) = src(dst_from_src^-1(q)), bilinear with clamped borders.
template <typename R>
R warp_similarity(const R& src, const Similarity& dst_from_src, int out_height, int out_width);

/// Frame pixels whose preimage falls inside a crop_size x crop_size crop.
BinaryMask crop_footprint(const Similarity& crop_from_frame, int crop_size, int height, int width);

}  // namespace faceerase::imaging
