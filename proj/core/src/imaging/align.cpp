#include "faceerase/imaging/align.hpp"

#include <cmath>

namespace faceerase::imaging {

Similarity Similarity::inverse() const {
  const double d = a * a + b * b;
  if (d < 1e-18) throw AlignmentError("similarity is singular");
  const double ia = a / d;
  const double ib = -b / d;
  return {ia, ib, -(ia * tx - ib * ty), -(ib * tx + ia * ty)};
}

double Similarity::rotation() const { return std::atan2(b, a); }
double Similarity::scale() const { return std::hypot(a, b); }

Similarity Similarity::compose(const Similarity& o) const {
  const Point2 t = apply({o.tx, o.ty});
  return {a * o.a - b * o.b, b * o.a + a * o.b, t.x, t.y};
}

Similarity Similarity::rotation_about(const Point2& c, double radians) {
  const double ca = std::cos(radians);
  const double sa = std::sin(radians);
  return {ca, sa, c.x - (ca * c.x - sa * c.y), c.y - (sa * c.x + ca * c.y)};
}

Similarity fit_similarity(std::span<const Point2> src, std::span<const Point2> dst) {
  if (src.size() != dst.size() || src.size() < 2) {
    throw AlignmentError("need at least two point pairs");
  }
  const double n = static_cast<double>(src.size());
  Point2 ms, md;
  for (std::size_t i = 0; i < src.size(); ++i) {
    ms.x += src[i].x / n;
    ms.y += src[i].y / n;
    md.x += dst[i].x / n;
    md.y += dst[i].y / n;
  }
  double ss = 0, dot = 0, cross = 0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double sx = src[i].x - ms.x, sy = src[i].y - ms.y;
    const double dx = dst[i].x - md.x, dy = dst[i].y - md.y;
    ss += sx * sx + sy * sy;
    dot += sx * dx + sy * dy;
    cross += sx * dy - sy * dx;
  }
  if (ss < 1e-6) throw AlignmentError("alignment anchors coincide");
  Similarity t{dot / ss, cross / ss, 0, 0};
  if (t.scale() < 1e-6) throw AlignmentError("degenerate alignment scale");
  const Point2 m = t.apply(ms);
  t.tx = md.x - m.x;
  t.ty = md.y - m.y;
  return t;
}

template <typename R>
R warp_similarity(const R& src, const Similarity& dst_from_src, int out_height, int out_width) {
  const Similarity inv = dst_from_src.inverse();
  R out(out_height, out_width);
  for (int r = 0; r < out_height; ++r)
    for (int c = 0; c < out_width; ++c) {
      const Point2 p = inv.apply({static_cast<double>(c), static_cast<double>(r)});
      for (int ch = 0; ch < R::kChannels; ++ch) out.at(r, c, ch) = sample_bilinear(src, p.x, p.y, ch);
    }
  return out;
}

template ImageRGB warp_similarity(const ImageRGB&, const Similarity&, int, int);
template GrayImage warp_similarity(const GrayImage&, const Similarity&, int, int);
template EdgeMap warp_similarity(const EdgeMap&, const Similarity&, int, int);

AlignedFace align_face(const ImageRGB& img, const Landmarks106& lm, int out_size) {
  if (out_size < 8) throw AlignmentError("output size too small");
  if (!lm.inside(img.height(), img.width())) throw AlignmentError("landmarks outside image");
  const Anchors from = anchors_of(lm);
  const Anchors to = anchors_of(canonical_landmarks(out_size));
  const Point2 src[3] = {from.left_eye, from.right_eye, from.mouth};
  const Point2 dst[3] = {to.left_eye, to.right_eye, to.mouth};
  AlignedFace out;
  out.crop_from_frame = fit_similarity(src, dst);
  out.image = warp_similarity(img, out.crop_from_frame, out_size, out_size);
  for (std::size_t i = 0; i < lm.points.size(); ++i) {
    out.landmarks[i] = out.crop_from_frame.apply(lm[i]);
  }
  return out;
}

BinaryMask crop_footprint(const Similarity& crop_from_frame, int crop_size, int height, int width) {
  BinaryMask out(height, width);
  const double hi = crop_size - 1;
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) {
      const Point2 q = crop_from_frame.apply({static_cast<double>(c), static_cast<double>(r)});
      if (q.x >= 0 && q.y >= 0 && q.x <= hi && q.y <= hi) out.at(r, c) = 1;
    }
  return out;
}

}  // namespace faceerase::imaging
