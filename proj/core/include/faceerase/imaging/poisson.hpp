#pragma once

#include "faceerase/imaging/image.hpp"

namespace faceerase::imaging {

struct PoissonOptions {
  double tolerance = 1e-6;  // relative residual of each channel solve
  int max_iterations = 10000;
};

/// Gradient-domain paste of `src` into `dst` over `region`, solved per channel
/// on the 5-point Laplacian with dst as Dirichlet boundary. Pixels outside the
/// region are copied from dst unchanged. The region may not touch the border.
ImageRGB poisson_blend(const ImageRGB& src, const ImageRGB& dst, const BinaryMask& region,
                       const PoissonOptions& options = {});

}  // namespace faceerase::imaging
