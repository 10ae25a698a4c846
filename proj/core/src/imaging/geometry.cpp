#include "faceerase/imaging/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace faceerase::imaging {

BinaryMask dilate(const BinaryMask& mask, int radius) {
  if (radius < 0) throw ImageError("dilate: negative radius");
  if (radius == 0) return mask;
  const int h = mask.height();
  const int w = mask.width();
  // Half-width of the disk on each row offset.
  std::vector<int> span(static_cast<std::size_t>(radius) + 1);
  for (int dy = 0; dy <= radius; ++dy) {
    span[static_cast<std::size_t>(dy)] =
        static_cast<int>(std::floor(std::sqrt(static_cast<double>(radius * radius - dy * dy))));
  }
  BinaryMask out(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      if (!mask.at(r, c)) continue;
      for (int dy = -radius; dy <= radius; ++dy) {
        const int rr = r + dy;
        if (rr < 0 || rr >= h) continue;
        const int half = span[static_cast<std::size_t>(std::abs(dy))];
        const int c0 = std::max(0, c - half);
        const int c1 = std::min(w - 1, c + half);
        std::fill(&out.at(rr, c0), &out.at(rr, c1) + 1, std::uint8_t{1});
      }
    }
  return out;
}

double polygon_area(std::span<const Point2> pts) {
  double a = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Point2& p = pts[i];
    const Point2& q = pts[(i + 1) % pts.size()];
    a += p.x * q.y - q.x * p.y;
  }
  return 0.5 * a;
}

Point2 polygon_centroid(std::span<const Point2> pts) {
  const double a = polygon_area(pts);
  if (std::abs(a) < 1e-12) throw PolygonError("polygon has zero area");
  double cx = 0;
  double cy = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Point2& p = pts[i];
    const Point2& q = pts[(i + 1) % pts.size()];
    const double cross = p.x * q.y - q.x * p.y;
    cx += (p.x + q.x) * cross;
    cy += (p.y + q.y) * cross;
  }
  return {cx / (6 * a), cy / (6 * a)};
}

namespace {
bool on_segment(double x, double y, const Point2& a, const Point2& b) {
  const double cross = (b.x - a.x) * (y - a.y) - (b.y - a.y) * (x - a.x);
  const double len = std::hypot(b.x - a.x, b.y - a.y);
  if (std::abs(cross) > 1e-9 * std::max(1.0, len)) return false;
  return x >= std::min(a.x, b.x) - 1e-9 && x <= std::max(a.x, b.x) + 1e-9 &&
         y >= std::min(a.y, b.y) - 1e-9 && y <= std::max(a.y, b.y) + 1e-9;
}
}  // namespace

BinaryMask fill_polygon(std::span<const Point2> pts, int height, int width) {
  if (pts.size() < 3) throw PolygonError("polygon needs at least 3 points");
  if (std::abs(polygon_area(pts)) < 1e-12) throw PolygonError("polygon has zero area");
  BinaryMask out(height, width);
  double min_x = pts[0].x, max_x = pts[0].x, min_y = pts[0].y, max_y = pts[0].y;
  for (const auto& p : pts) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  const int r0 = std::max(0, static_cast<int>(std::ceil(min_y - 1e-9)));
  const int r1 = std::min(height - 1, static_cast<int>(std::floor(max_y + 1e-9)));
  const int c0 = std::max(0, static_cast<int>(std::ceil(min_x - 1e-9)));
  const int c1 = std::min(width - 1, static_cast<int>(std::floor(max_x + 1e-9)));
  const std::size_t n = pts.size();
  for (int r = r0; r <= r1; ++r)
    for (int c = c0; c <= c1; ++c) {
      const double x = c;
      const double y = r;
      bool inside = false;
      bool boundary = false;
      for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point2& a = pts[i];
        const Point2& b = pts[j];
        if (on_segment(x, y, a, b)) {
          boundary = true;
          break;
        }
        if ((a.y > y) != (b.y > y)) {
          const double xi = a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y);
          if (x < xi) inside = !inside;
        }
      }
      if (inside || boundary) out.at(r, c) = 1;
    }
  return out;
}

std::vector<Point2> gather(const Landmarks106& lm, std::span<const int> indices) {
  std::vector<Point2> out;
  out.reserve(indices.size());
  for (int i : indices) out.push_back(lm[static_cast<std::size_t>(i)]);
  return out;
}

}  // namespace faceerase::imaging
