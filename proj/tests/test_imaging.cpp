#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>
#include <random>

#include "faceerase/imaging/align.hpp"
#include "faceerase/imaging/canny.hpp"
#include "faceerase/imaging/geometry.hpp"
#include "faceerase/imaging/io.hpp"
#include "faceerase/imaging/landmarks.hpp"
#include "faceerase/imaging/poisson.hpp"
#include "faceerase/dataprep/synthetic.hpp"
#include "support.hpp"

using namespace faceerase;
using namespace faceerase::imaging;
using testing_support::random_image;

namespace {

cv::Mat to_mat(const GrayImage& g) {
  cv::Mat m(g.height(), g.width(), CV_32F);
  for (int r = 0; r < g.height(); ++r)
    for (int c = 0; c < g.width(); ++c) m.at<float>(r, c) = g.at(r, c);
  return m;
}

GrayImage smooth_gray(int h, int w, std::mt19937_64& rng) {
  GrayImage g(h, w);
  std::uniform_real_distribution<double> u(0, 1);
  const double a = u(rng) * 0.3, b = u(rng) * 0.3, p = u(rng) * 6;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const double v = 0.5 + a * std::sin(c * 0.21 + p) + b * std::cos(r * 0.17 - p) + (c > w / 2 ? 0.2 : 0.0);
      g.at(r, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  return g;
}

}  // namespace

TEST(Grayscale, UsesLumaWeights) {
  ImageRGB img(1, 1);
  img.at(0, 0, 0) = 1.0f;
  img.at(0, 0, 1) = 0.5f;
  img.at(0, 0, 2) = 0.25f;
  EXPECT_NEAR(to_grayscale(img).at(0, 0), 0.299 + 0.587 * 0.5 + 0.114 * 0.25, 1e-6);
}

TEST(Resize, SameSizeIsIdentity) {
  std::mt19937_64 rng(1);
  const ImageRGB img = random_image(9, 13, rng);
  EXPECT_EQ(resize(img, 9, 13), img);
}

TEST(Resize, HalvingAveragesTwoByTwoBlocks) {
  std::mt19937_64 rng(2);
  const ImageRGB img = random_image(16, 12, rng);
  const ImageRGB half = resize(img, 8, 6);
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 6; ++c)
      for (int ch = 0; ch < 3; ++ch) {
        const double want = (img.at(2 * r, 2 * c, ch) + img.at(2 * r + 1, 2 * c, ch) + img.at(2 * r, 2 * c + 1, ch) +
                             img.at(2 * r + 1, 2 * c + 1, ch)) /
                            4.0;
        EXPECT_NEAR(half.at(r, c, ch), want, 1e-6);
      }
}

TEST(Resize, NearestKeepsMasksBinary) {
  BinaryMask m(10, 10);
  for (int r = 2; r < 7; ++r)
    for (int c = 3; c < 8; ++c) m.at(r, c) = 1;
  const BinaryMask big = resize_nearest(m, 40, 40);
  for (auto v : big.data()) EXPECT_TRUE(v == 0 || v == 1);
  EXPECT_EQ(big.count(), m.count() * 16);
}

TEST(SampleBilinear, ClampsOutsideTheImage) {
  std::mt19937_64 rng(3);
  const ImageRGB img = random_image(4, 5, rng);
  EXPECT_FLOAT_EQ(sample_bilinear(img, 2.0, 1.0, 1), img.at(1, 2, 1));
  EXPECT_FLOAT_EQ(sample_bilinear(img, -3.0, -2.0, 0), img.at(0, 0, 0));
  EXPECT_FLOAT_EQ(sample_bilinear(img, 10.0, 10.0, 2), img.at(3, 4, 2));
  EXPECT_NEAR(sample_bilinear(img, 0.5, 0.0, 0), 0.5 * (img.at(0, 0, 0) + img.at(0, 1, 0)), 1e-6);
}

TEST(GaussianBlur, MatchesOpenCvReplicateBorder) {
  std::mt19937_64 rng(4);
  GrayImage g(33, 40);
  std::uniform_real_distribution<float> u(0, 1);
  for (float& v : g.data()) v = u(rng);
  for (double sigma : {0.8, 2.0}) {
    const GrayImage mine = gaussian_blur(g, sigma);
    const int radius = static_cast<int>(4 * sigma + 0.5);
    cv::Mat ref;
    cv::GaussianBlur(to_mat(g), ref, cv::Size(2 * radius + 1, 2 * radius + 1), sigma, sigma, cv::BORDER_REPLICATE);
    for (int r = 0; r < g.height(); ++r)
      for (int c = 0; c < g.width(); ++c) ASSERT_NEAR(mine.at(r, c), ref.at<float>(r, c), 1e-5);
  }
}

TEST(Canny, ConstantImageHasNoEdges) {
  const GrayImage g(20, 20, 0.4f);
  const EdgeMap e = canny_edges(g);
  for (float v : e.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Canny, VerticalStepGivesOneThinLine) {
  GrayImage g(24, 24, 0.2f);
  for (int r = 0; r < 24; ++r)
    for (int c = 12; c < 24; ++c) g.at(r, c) = 0.8f;
  const EdgeMap e = canny_edges(g);
  for (int r = 0; r < 24; ++r) {
    int count = 0;
    for (int c = 0; c < 24; ++c) count += e.at(r, c) > 0;
    EXPECT_EQ(count, 1) << "row " << r;
    EXPECT_TRUE(e.at(r, 11) > 0 || e.at(r, 12) > 0);
  }
}

TEST(Canny, OutputIsStrictlyBinary) {
  std::mt19937_64 rng(5);
  const EdgeMap e = canny_edges(smooth_gray(40, 40, rng));
  for (float v : e.data()) EXPECT_TRUE(v == 0.0f || v == 1.0f);
}

TEST(Canny, RejectsInvalidThresholds) {
  const GrayImage g(8, 8);
  EXPECT_THROW(canny_edges(g, {2.0, 0.3, 0.2}), ImageError);
  EXPECT_THROW(canny_edges(g, {0.0, 0.1, 0.2}), ImageError);
  EXPECT_THROW(canny_edges(g, {1.0, 0.1, 1.5}), ImageError);
}

// OpenCV's Canny fed with the same smoothed Sobel derivatives, quantized to
// 16 bits; the two must agree on almost every edge pixel.
TEST(Canny, AgreesWithOpenCvOnSharedDerivatives) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto face = dataprep::render_canonical_face(seed, true, 128);
    const GrayImage g = to_grayscale(face);
    const CannyParams p;
    const EdgeMap mine = canny_edges(g, p);

    const int radius = static_cast<int>(4 * p.sigma + 0.5);
    cv::Mat smooth;
    cv::GaussianBlur(to_mat(g), smooth, cv::Size(2 * radius + 1, 2 * radius + 1), p.sigma, p.sigma,
                     cv::BORDER_REPLICATE);
    cv::Mat dx, dy;
    cv::Sobel(smooth, dx, CV_64F, 1, 0, 3, 1, 0, cv::BORDER_REPLICATE);
    cv::Sobel(smooth, dy, CV_64F, 0, 1, 3, 1, 0, cv::BORDER_REPLICATE);
    cv::Mat mag;
    cv::magnitude(dx, dy, mag);
    double max_mag = 0;
    cv::minMaxLoc(mag, nullptr, &max_mag);
    const double k = 30000.0 / max_mag;
    cv::Mat dx16, dy16, ref;
    dx.convertTo(dx16, CV_16S, k);
    dy.convertTo(dy16, CV_16S, k);
    cv::Canny(dx16, dy16, ref, p.low * max_mag * k, p.high * max_mag * k, true);

    double tp = 0, fp = 0, fn = 0;
    for (int r = 0; r < g.height(); ++r)
      for (int c = 0; c < g.width(); ++c) {
        const bool a = mine.at(r, c) > 0;
        const bool b = ref.at<std::uint8_t>(r, c) > 0;
        tp += a && b;
        fp += a && !b;
        fn += !a && b;
      }
    const double f1 = 2 * tp / (2 * tp + fp + fn);
    EXPECT_GT(f1, 0.95) << "seed " << seed;
  }
}

TEST(Dilate, MatchesEuclideanDiskOracle) {
  std::mt19937_64 rng(6);
  std::bernoulli_distribution b(0.02);
  BinaryMask m(30, 27);
  for (auto& v : m.data()) v = b(rng);
  for (int radius : {0, 1, 3, 5}) {
    const BinaryMask d = dilate(m, radius);
    for (int r = 0; r < m.height(); ++r)
      for (int c = 0; c < m.width(); ++c) {
        bool want = false;
        for (int rr = 0; rr < m.height() && !want; ++rr)
          for (int cc = 0; cc < m.width() && !want; ++cc)
            want = m.at(rr, cc) && (rr - r) * (rr - r) + (cc - c) * (cc - c) <= radius * radius;
        ASSERT_EQ(d.at(r, c), want ? 1 : 0) << radius << " " << r << " " << c;
      }
  }
}

TEST(FillPolygon, MatchesOpenCvPointTest) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Point2> pts;
    const int n = 5 + trial % 6;
    for (int i = 0; i < n; ++i) {
      const double t = 2 * M_PI * i / n;
      const double rad = 6 + 8 * u(rng);
      pts.push_back({20.3 + rad * std::cos(t), 18.7 + rad * std::sin(t)});
    }
    std::vector<cv::Point2f> contour;
    for (const auto& p : pts) contour.emplace_back(static_cast<float>(p.x), static_cast<float>(p.y));
    const BinaryMask m = fill_polygon(pts, 40, 42);
    for (int r = 0; r < 40; ++r)
      for (int c = 0; c < 42; ++c) {
        const double s = cv::pointPolygonTest(contour, cv::Point2f(static_cast<float>(c), static_cast<float>(r)), true);
        if (std::abs(s) < 1e-3) continue;  // float contour vs double polygon on the boundary
        ASSERT_EQ(m.at(r, c), s > 0 ? 1 : 0) << trial << " " << r << " " << c;
      }
  }
}

TEST(FillPolygon, DegenerateInputsThrow) {
  const std::vector<Point2> two = {{1, 1}, {5, 5}};
  const std::vector<Point2> line = {{1, 1}, {3, 3}, {5, 5}};
  EXPECT_THROW(fill_polygon(two, 10, 10), PolygonError);
  EXPECT_THROW(fill_polygon(line, 10, 10), PolygonError);
}

TEST(Polygon, AreaAndCentroidOfRectangle) {
  const std::vector<Point2> rect = {{1, 2}, {7, 2}, {7, 5}, {1, 5}};
  EXPECT_DOUBLE_EQ(std::abs(polygon_area(rect)), 18.0);
  const Point2 c = polygon_centroid(rect);
  EXPECT_DOUBLE_EQ(c.x, 4.0);
  EXPECT_DOUBLE_EQ(c.y, 3.5);
}

TEST(Landmarks, CanonicalPartsAreValidPolygons) {
  const Landmarks106 l = canonical_landmarks(256);
  EXPECT_TRUE(l.inside(256, 256));
  for (lm::Part p : lm::kAllParts) {
    const auto ring = gather(l, lm::outline(p));
    EXPECT_GE(ring.size(), 8u) << lm::name(p);
    EXPECT_GT(std::abs(polygon_area(ring)), 20.0) << lm::name(p);
  }
}

TEST(Landmarks, CanonicalFaceIsMirrorSymmetric) {
  const Landmarks106 l = canonical_landmarks(256);
  const Point2 le = polygon_centroid(gather(l, lm::outline(lm::Part::kLeftEye)));
  const Point2 re = polygon_centroid(gather(l, lm::outline(lm::Part::kRightEye)));
  EXPECT_NEAR(le.x + re.x, 256.0, 1e-6);
  EXPECT_NEAR(le.y, re.y, 1e-6);
  const Point2 nose = polygon_centroid(gather(l, lm::outline(lm::Part::kNose)));
  const Point2 mouth = polygon_centroid(gather(l, lm::outline(lm::Part::kMouth)));
  EXPECT_NEAR(nose.x, 128.0, 1e-6);
  EXPECT_NEAR(mouth.x, 128.0, 1e-6);
}

TEST(Similarity, InverseAndCompose) {
  const Similarity t{0.8, 0.3, 5.0, -2.0};
  const Similarity id = t.compose(t.inverse());
  EXPECT_NEAR(id.a, 1.0, 1e-12);
  EXPECT_NEAR(id.b, 0.0, 1e-12);
  EXPECT_NEAR(id.tx, 0.0, 1e-12);
  EXPECT_NEAR(id.ty, 0.0, 1e-12);
  const Point2 p{3, 4};
  const Point2 q = t.inverse().apply(t.apply(p));
  EXPECT_NEAR(q.x, 3, 1e-12);
  EXPECT_NEAR(q.y, 4, 1e-12);
}

// Least squares on the 2N x 4 linear system [x -y 1 0; y x 0 1] [a b tx ty]'.
TEST(Similarity, FitMatchesLinearLeastSquares) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0, 1);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<Point2> src, dst;
    const Similarity truth{1.1 + 0.1 * n(rng), 0.2 * n(rng), 10 * n(rng), 10 * n(rng)};
    for (int i = 0; i < 7; ++i) {
      src.push_back({50 * n(rng), 50 * n(rng)});
      const Point2 q = truth.apply(src.back());
      dst.push_back({q.x + 0.5 * n(rng), q.y + 0.5 * n(rng)});
    }
    Eigen::MatrixXd A(14, 4);
    Eigen::VectorXd b(14);
    for (int i = 0; i < 7; ++i) {
      A.row(2 * i) << src[i].x, -src[i].y, 1, 0;
      A.row(2 * i + 1) << src[i].y, src[i].x, 0, 1;
      b(2 * i) = dst[i].x;
      b(2 * i + 1) = dst[i].y;
    }
    const Eigen::Vector4d x = A.colPivHouseholderQr().solve(b);
    const Similarity fit = fit_similarity(src, dst);
    EXPECT_NEAR(fit.a, x(0), 1e-9);
    EXPECT_NEAR(fit.b, x(1), 1e-9);
    EXPECT_NEAR(fit.tx, x(2), 1e-7);
    EXPECT_NEAR(fit.ty, x(3), 1e-7);
  }
}

TEST(Align, CanonicalFaceAlignsToIdentity) {
  std::mt19937_64 rng(9);
  const ImageRGB img = random_image(256, 256, rng);
  const AlignedFace a = align_face(img, canonical_landmarks(256));
  EXPECT_NEAR(a.crop_from_frame.a, 1.0, 1e-9);
  EXPECT_NEAR(a.crop_from_frame.b, 0.0, 1e-9);
  EXPECT_NEAR(a.crop_from_frame.tx, 0.0, 1e-7);
  EXPECT_NEAR(a.crop_from_frame.ty, 0.0, 1e-7);
  for (std::size_t i = 0; i < img.data().size(); ++i) ASSERT_NEAR(a.image.data()[i], img.data()[i], 1e-5);
}

TEST(Align, UndoesAKnownSimilarity) {
  const auto face = dataprep::make_synthetic_face(3);
  const AlignedFace a = align_face(face.image, face.landmarks);
  const Landmarks106 c = canonical_landmarks(256);
  const Anchors want = anchors_of(c);
  const Anchors got = anchors_of(a.landmarks);
  EXPECT_NEAR(got.left_eye.x, want.left_eye.x, 1e-6);
  EXPECT_NEAR(got.right_eye.y, want.right_eye.y, 1e-6);
  EXPECT_NEAR(got.mouth.x, want.mouth.x, 1e-6);
  EXPECT_EQ(a.image.height(), 256);
}

TEST(Align, CoincidentAnchorsFail) {
  Landmarks106 l;
  for (auto& p : l.points) p = {10, 10};
  EXPECT_THROW(align_face(ImageRGB(32, 32), l), AlignmentError);
}

TEST(Footprint, IdentityCoversTheCrop) {
  const BinaryMask f = crop_footprint(Similarity{}, 10, 20, 20);
  EXPECT_EQ(f.count(), 100u);
  EXPECT_EQ(f.at(9, 9), 1);
  EXPECT_EQ(f.at(10, 9), 0);
}

// Minimizes sum over edges touching the region of ((f_p - f_q) - (s_p - s_q))^2
// with f fixed to dst outside; solved densely from the edge list.
TEST(Poisson, MatchesDenseEnergyMinimizer) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<float> u(0.3f, 0.7f);
  const int h = 11, w = 12;
  ImageRGB src(h, w), dst(h, w);
  for (float& v : src.data()) v = u(rng);
  for (float& v : dst.data()) v = u(rng);
  BinaryMask region(h, w);
  for (int r = 2; r < 9; ++r)
    for (int c = 3; c < 9; ++c) region.at(r, c) = (r + c) % 7 != 0;
  std::vector<int> id(h * w, -1);
  int n = 0;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      if (region.at(r, c)) id[r * w + c] = n++;
  const ImageRGB out = poisson_blend(src, dst, region);
  for (int ch = 0; ch < 3; ++ch) {
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        for (auto [dr, dc] : {std::pair{0, 1}, std::pair{1, 0}}) {
          const int r2 = r + dr, c2 = c + dc;
          if (r2 >= h || c2 >= w) continue;
          const int i = id[r * w + c], j = id[r2 * w + c2];
          if (i < 0 && j < 0) continue;
          const double guide = src.at(r, c, ch) - src.at(r2, c2, ch);
          // residual = f_i - f_j - guide
          if (i >= 0) {
            H(i, i) += 1;
            g(i) += guide;
          } else {
            g(j) += dst.at(r, c, ch) - guide;  // f_j - dst_i + guide
          }
          if (j >= 0) {
            H(j, j) += 1;
            if (i >= 0) {
              H(i, j) -= 1;
              H(j, i) -= 1;
              g(j) -= guide;
            }
          } else {
            g(i) += dst.at(r2, c2, ch);
          }
        }
    const Eigen::VectorXd f = H.ldlt().solve(g);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        const int i = id[r * w + c];
        const double want = i >= 0 ? std::clamp(f(i), 0.0, 1.0) : dst.at(r, c, ch);
        ASSERT_NEAR(out.at(r, c, ch), want, 1e-4);
      }
  }
}

TEST(Poisson, SameSourceAndDestinationIsFixedPoint) {
  std::mt19937_64 rng(11);
  const ImageRGB img = random_image(10, 10, rng);
  BinaryMask region(10, 10);
  for (int r = 2; r < 8; ++r)
    for (int c = 2; c < 8; ++c) region.at(r, c) = 1;
  const ImageRGB out = poisson_blend(img, img, region);
  for (std::size_t i = 0; i < img.data().size(); ++i) EXPECT_NEAR(out.data()[i], img.data()[i], 1e-5);
}

TEST(Poisson, BorderRegionThrowsAndEmptyRegionIsIdentity) {
  std::mt19937_64 rng(12);
  const ImageRGB a = random_image(8, 8, rng);
  const ImageRGB b = random_image(8, 8, rng);
  BinaryMask region(8, 8);
  EXPECT_EQ(poisson_blend(a, b, region), b);
  region.at(0, 3) = 1;
  EXPECT_THROW(poisson_blend(a, b, region), ImageError);
}

TEST(Io, PngRoundTripEqualsQuantization) {
  std::mt19937_64 rng(13);
  const ImageRGB img = random_image(7, 9, rng);
  const auto dir = testing_support::temp_dir("io");
  write_rgb(dir / "a.png", img);
  EXPECT_EQ(read_rgb(dir / "a.png"), quantize8(img));
  BinaryMask m(5, 6);
  m.at(2, 3) = 1;
  write_mask(dir / "m.png", m);
  EXPECT_EQ(read_mask(dir / "m.png"), m);
  const Landmarks106 l = canonical_landmarks(256);
  write_landmarks(dir / "l.json", l);
  const Landmarks106 back = read_landmarks(dir / "l.json");
  for (int i = 0; i < kLandmarkCount; ++i) {
    EXPECT_DOUBLE_EQ(back[i].x, l[i].x);
    EXPECT_DOUBLE_EQ(back[i].y, l[i].y);
  }
  EXPECT_THROW(read_rgb(dir / "missing.png"), ImageError);
}
