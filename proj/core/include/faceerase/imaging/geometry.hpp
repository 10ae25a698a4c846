#pragma once

#include <span>
#include <vector>

#include "faceerase/imaging/image.hpp"

namespace faceerase::imaging {

class PolygonError : public ImageError {
 public:
  using ImageError::ImageError;
};

/// Dilation by a Euclidean disk of the given radius. Radius 0 is the identity.
BinaryMask dilate(const BinaryMask& mask, int radius);

/// Even-odd rasterization at pixel centres (x = column, y = row). Pixels lying
/// on an edge are included. Fewer than three points or zero area throws.
BinaryMask fill_polygon(std::span<const Point2> points, int height, int width);

/// Signed shoelace area; positive for clockwise rings in image coordinates.
double polygon_area(std::span<const Point2> points);
/// Area centroid of a simple polygon.
Point2 polygon_centroid(std::span<const Point2> points);

/// Gathers lm[indices[i]] in order.
std::vector<Point2> gather(const Landmarks106& lm, std::span<const int> indices);

}  // namespace faceerase::imaging
