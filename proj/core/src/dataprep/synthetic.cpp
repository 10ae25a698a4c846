#include "faceerase/dataprep/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "faceerase/imaging/align.hpp"
#include "faceerase/imaging/geometry.hpp"
#include "faceerase/imaging/io.hpp"

namespace faceerase::dataprep {

namespace {

using imaging::BinaryMask;
using imaging::Point2;
namespace lmp = imaging::lm;

struct Style {
  float skin[3];
  int wrinkles;
  double first_row;
  double spacing;
  double curvature;
  double depth;
  double width;
  double blob_x, blob_y, blob_amp;
  float brow[3];
  float iris[3];
  float lip[3];
};

Style draw_style(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Style s{};
  s.skin[0] = static_cast<float>(0.72 + 0.18 * u(rng));
  s.skin[1] = static_cast<float>(s.skin[0] * (0.70 + 0.10 * u(rng)));
  s.skin[2] = static_cast<float>(s.skin[1] * (0.78 + 0.12 * u(rng)));
  s.wrinkles = 2 + static_cast<int>(u(rng) * 2);
  s.first_row = 16 + 10 * u(rng);
  s.spacing = 20 + 6 * u(rng);
  s.curvature = 6 + 10 * u(rng);
  s.depth = 0.18 + 0.10 * u(rng);
  s.width = 3.5 + 1.5 * u(rng);
  s.blob_x = 60 + 136 * u(rng);
  s.blob_y = 20 + 50 * u(rng);
  s.blob_amp = 0.04 * (u(rng) - 0.5);
  const float b = static_cast<float>(0.12 + 0.15 * u(rng));
  s.brow[0] = b * 1.4f;
  s.brow[1] = b;
  s.brow[2] = b * 0.8f;
  s.iris[0] = static_cast<float>(0.2 + 0.3 * u(rng));
  s.iris[1] = static_cast<float>(0.2 + 0.3 * u(rng));
  s.iris[2] = static_cast<float>(0.15 + 0.2 * u(rng));
  s.lip[0] = static_cast<float>(0.65 + 0.2 * u(rng));
  s.lip[1] = static_cast<float>(0.25 + 0.1 * u(rng));
  s.lip[2] = static_cast<float>(0.28 + 0.1 * u(rng));
  return s;
}

double smoothstep(double e0, double e1, double x) {
  const double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
  return t * t * (3 - 2 * t);
}

// Skin colour at template position (u, v) on the 256 grid.
void skin_at(const Style& s, double u, double v, float* rgb) {
  const double du = (u - 128) / 128;
  double shade = 1.0 - 0.22 * du * du;
  double groove = 0;
  for (int k = 0; k < s.wrinkles; ++k) {
    const double centre = s.first_row + k * s.spacing + s.curvature * du * du;
    const double d = (v - centre) / s.width;
    groove += std::exp(-0.5 * d * d);
  }
  groove *= s.depth * (1.0 - smoothstep(74, 86, v));
  const double bx = (u - s.blob_x) / 40;
  const double by = (v - s.blob_y) / 30;
  shade += s.blob_amp * std::exp(-0.5 * (bx * bx + by * by));
  const double f = shade * (1.0 - groove);
  for (int c = 0; c < 3; ++c) rgb[c] = static_cast<float>(std::clamp(s.skin[c] * f, 0.0, 1.0));
}

void paint(ImageRGB& img, const BinaryMask& m, const float* rgb, float alpha = 1.0f) {
  for (int r = 0; r < img.height(); ++r)
    for (int c = 0; c < img.width(); ++c) {
      if (!m.at(r, c)) continue;
      for (int ch = 0; ch < 3; ++ch) img.at(r, c, ch) = (1 - alpha) * img.at(r, c, ch) + alpha * rgb[ch];
    }
}

BinaryMask disk(int size, const Point2& c, double radius) {
  BinaryMask m(size, size);
  for (int r = 0; r < size; ++r)
    for (int x = 0; x < size; ++x)
      if (std::hypot(x - c.x, r - c.y) <= radius) m.at(r, x) = 1;
  return m;
}

}  // namespace

ImageRGB render_canonical_face(std::uint64_t seed, bool with_parts, int size) {
  const Style s = draw_style(seed);
  const double k = 256.0 / size;
  const imaging::Landmarks106 lm = imaging::canonical_landmarks(size);
  ImageRGB img(size, size);
  const float background[3] = {0.22f, 0.27f, 0.33f};
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c) {
      const double u = (c + 0.5) * k - 0.5;
      const double v = (r + 0.5) * k - 0.5;
      const double eu = (u - 128) / 92;
      const double ev = (v - 124) / 112;
      float rgb[3];
      if (v > 124 && eu * eu + ev * ev > 1.0) {
        for (int ch = 0; ch < 3; ++ch) rgb[ch] = background[ch];
      } else {
        skin_at(s, u, v, rgb);
      }
      for (int ch = 0; ch < 3; ++ch) img.at(r, c, ch) = rgb[ch];
    }
  if (!with_parts) return img;

  auto poly = [&](lmp::Part p) { return imaging::fill_polygon(imaging::gather(lm, lmp::outline(p)), size, size); };
  paint(img, poly(lmp::Part::kLeftEyebrow), s.brow);
  paint(img, poly(lmp::Part::kRightEyebrow), s.brow);

  const float sclera[3] = {0.93f, 0.92f, 0.90f};
  const float pupil[3] = {0.05f, 0.04f, 0.04f};
  const double unit = size / 256.0;
  for (auto [part, centre] : {std::pair{lmp::Part::kLeftEye, lmp::kLeftEyeCenter},
                              std::pair{lmp::Part::kRightEye, lmp::kRightEyeCenter}}) {
    const BinaryMask eye = poly(part);
    paint(img, eye, sclera);
    const Point2 c = lm[static_cast<std::size_t>(centre)];
    BinaryMask iris = disk(size, c, 6 * unit);
    for (std::size_t i = 0; i < iris.data().size(); ++i) iris.data()[i] &= eye.data()[i];
    paint(img, iris, s.iris);
    BinaryMask dot = disk(size, c, 2.5 * unit);
    for (std::size_t i = 0; i < dot.data().size(); ++i) dot.data()[i] &= eye.data()[i];
    paint(img, dot, pupil);
  }

  const float nose_shadow[3] = {s.skin[0] * 0.7f, s.skin[1] * 0.66f, s.skin[2] * 0.64f};
  paint(img, poly(lmp::Part::kNose), nose_shadow, 0.35f);
  const float nostril[3] = {0.18f, 0.1f, 0.08f};
  paint(img, disk(size, lm[48], 3.5 * unit), nostril);
  paint(img, disk(size, lm[50], 3.5 * unit), nostril);

  paint(img, poly(lmp::Part::kMouth), s.lip);
  const float inner[3] = {s.lip[0] * 0.45f, s.lip[1] * 0.4f, s.lip[2] * 0.4f};
  paint(img, imaging::fill_polygon(imaging::gather(lm, std::vector<int>{96, 97, 98, 99, 100, 101, 102, 103}),
                                   size, size),
        inner);
  return img;
}

SyntheticFace make_synthetic_face(std::uint64_t seed, const SyntheticOptions& options) {
  const ImageRGB canvas = render_canonical_face(seed, true, 256);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double angle = options.max_rotation_deg * std::numbers::pi / 180.0 * u(rng);
  const double scale = options.min_scale + (options.max_scale - options.min_scale) * 0.5 * (u(rng) + 1);
  const double half = 0.5 * (options.frame_size - 1);
  const double cx = half + options.max_shift * u(rng);
  const double cy = half + options.max_shift * u(rng);
  // Template centre -> frame point (cx, cy), rotated and scaled about it.
  const double a = scale * std::cos(angle);
  const double b = scale * std::sin(angle);
  const double t0 = 127.5;
  const imaging::Similarity frame_from_template{a, b, cx - (a * t0 - b * t0), cy - (b * t0 + a * t0)};

  SyntheticFace out;
  out.image = imaging::warp_similarity(canvas, frame_from_template, options.frame_size, options.frame_size);
  const imaging::Landmarks106 lm = imaging::canonical_landmarks(256);
  for (std::size_t i = 0; i < lm.points.size(); ++i) out.landmarks[i] = frame_from_template.apply(lm[i]);
  return out;
}

std::vector<CorpusRecord> write_synthetic_corpus(const std::filesystem::path& corpus_dir,
                                                 const std::filesystem::path& landmarks_dir,
                                                 const CorpusSpec& spec) {
  std::filesystem::create_directories(corpus_dir);
  std::filesystem::create_directories(landmarks_dir);
  std::vector<CorpusRecord> records;
  for (int i = 0; i < spec.count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "face_%04d", i);
    const SyntheticFace face = make_synthetic_face(spec.seed * 1000003ULL + static_cast<std::uint64_t>(i), spec.face);
    CorpusRecord r;
    r.id = name;
    r.image = std::string(name) + ".png";
    r.landmarks = std::string(name) + ".json";
    r.has_glasses = spec.glasses_every > 0 && i % spec.glasses_every == spec.glasses_every - 1;
    r.has_hat = spec.hat_every > 0 && i % spec.hat_every == spec.hat_every - 1;
    r.forehead_occluded = spec.occluded_every > 0 && i % spec.occluded_every == spec.occluded_every - 1;
    imaging::write_rgb(corpus_dir / r.image, face.image);
    imaging::write_landmarks(landmarks_dir / r.landmarks, face.landmarks);
    records.push_back(std::move(r));
  }
  write_ingest_manifest(corpus_dir / "manifest.jsonl", records);
  return records;
}

}  // namespace faceerase::dataprep
