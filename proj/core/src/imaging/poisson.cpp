#include "faceerase/imaging/poisson.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>
#include <algorithm>
#include <vector>

namespace faceerase::imaging {

ImageRGB poisson_blend(const ImageRGB& src, const ImageRGB& dst, const BinaryMask& region,
                       const PoissonOptions& options) {
  if (!src.same_size(dst) || !src.same_size(region)) throw ImageError("poisson_blend: size mismatch");
  const int h = dst.height();
  const int w = dst.width();
  std::vector<int> index(static_cast<std::size_t>(h) * w, -1);
  int n = 0;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      if (!region.at(r, c)) continue;
      if (r == 0 || c == 0 || r == h - 1 || c == w - 1) {
        throw ImageError("poisson_blend: region touches the image border");
      }
      index[static_cast<std::size_t>(r) * w + c] = n++;
    }
  if (n == 0) return dst;

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(n) * 5);
  std::vector<std::pair<int, int>> where(static_cast<std::size_t>(n));
  constexpr int kDr[4] = {-1, 1, 0, 0};
  constexpr int kDc[4] = {0, 0, -1, 1};
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const int i = index[static_cast<std::size_t>(r) * w + c];
      if (i < 0) continue;
      where[static_cast<std::size_t>(i)] = {r, c};
      triplets.emplace_back(i, i, 4.0);
      for (int k = 0; k < 4; ++k) {
        const int j = index[static_cast<std::size_t>(r + kDr[k]) * w + c + kDc[k]];
        if (j >= 0) triplets.emplace_back(i, j, -1.0);
      }
    }
  Eigen::SparseMatrix<double> A(n, n);
  A.setFromTriplets(triplets.begin(), triplets.end());
  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
  cg.setTolerance(options.tolerance);
  cg.setMaxIterations(options.max_iterations);
  cg.compute(A);

  ImageRGB out = dst;
  for (int ch = 0; ch < 3; ++ch) {
    Eigen::VectorXd b(n);
    Eigen::VectorXd guess(n);
    for (int i = 0; i < n; ++i) {
      const auto [r, c] = where[static_cast<std::size_t>(i)];
      double v = 0;
      for (int k = 0; k < 4; ++k) {
        const int rr = r + kDr[k];
        const int cc = c + kDc[k];
        v += static_cast<double>(src.at(r, c, ch)) - src.at(rr, cc, ch);
        if (index[static_cast<std::size_t>(rr) * w + cc] < 0) v += dst.at(rr, cc, ch);
      }
      b[i] = v;
      guess[i] = dst.at(r, c, ch);
    }
    const Eigen::VectorXd x = cg.solveWithGuess(b, guess);
    for (int i = 0; i < n; ++i) {
      const auto [r, c] = where[static_cast<std::size_t>(i)];
      out.at(r, c, ch) = static_cast<float>(std::clamp(x[i], 0.0, 1.0));
    }
  }
  return out;
}

}  // namespace faceerase::imaging
