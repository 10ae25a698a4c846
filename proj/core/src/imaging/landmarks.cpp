#include "faceerase/imaging/landmarks.hpp"

#include <array>
#include <cmath>
#include <numbers>

namespace faceerase::imaging {
namespace lm {
namespace {

constexpr std::array<int, 9> kLeftBrow{33, 34, 35, 36, 37, 64, 65, 66, 67};
constexpr std::array<int, 9> kRightBrow{38, 39, 40, 41, 42, 68, 69, 70, 71};
constexpr std::array<int, 8> kLeftEye{52, 53, 72, 54, 55, 56, 73, 57};
constexpr std::array<int, 8> kRightEye{58, 59, 75, 60, 61, 62, 76, 63};
constexpr std::array<int, 12> kNose{43, 79, 81, 83, 51, 50, 49, 48, 47, 82, 80, 78};
constexpr std::array<int, 12> kMouth{84, 85, 86, 87, 88, 89, 90, 91, 92, 93, 94, 95};
constexpr std::array<int, 18> kBrows{33, 34, 35, 36, 37, 64, 65, 66, 67,
                                     38, 39, 40, 41, 42, 68, 69, 70, 71};

constexpr std::array<int, 33> make_contour() {
  std::array<int, 33> c{};
  for (int i = 0; i < 33; ++i) c[static_cast<std::size_t>(i)] = i;
  return c;
}
constexpr std::array<int, 33> kContour = make_contour();

}  // namespace

std::span<const int> outline(Part part) {
  switch (part) {
    case Part::kLeftEyebrow: return kLeftBrow;
    case Part::kRightEyebrow: return kRightBrow;
    case Part::kLeftEye: return kLeftEye;
    case Part::kRightEye: return kRightEye;
    case Part::kNose: return kNose;
    case Part::kMouth: return kMouth;
  }
  return {};
}

std::string_view name(Part part) {
  switch (part) {
    case Part::kLeftEyebrow: return "left_eyebrow";
    case Part::kRightEyebrow: return "right_eyebrow";
    case Part::kLeftEye: return "left_eye";
    case Part::kRightEye: return "right_eye";
    case Part::kNose: return "nose";
    case Part::kMouth: return "mouth";
  }
  return "";
}

std::span<const int> contour() { return kContour; }
std::span<const int> eyebrow_points() { return kBrows; }

}  // namespace lm

Landmarks106 canonical_landmarks(int size) {
  using std::numbers::pi;
  Landmarks106 out;
  auto set = [&](int i, double x, double y) { out[static_cast<std::size_t>(i)] = {x, y}; };

  for (int i = 0; i < 33; ++i) {
    const double t = pi - i * pi / 32;
    set(i, 128 + 92 * std::cos(t), 124 + 112 * std::sin(t));
  }
  for (int i = 0; i < 5; ++i) {
    const double t = i / 4.0;
    const double x = 64 + 48 * t;
    const double y = 96 - 8 * std::sin(pi * t);
    set(33 + i, x, y);
    set(38 + i, 256 - x, y);
  }
  for (int i = 0; i < 4; ++i) {
    const double t = (i + 0.5) / 4.0;
    const double x = 110 - 44 * t;
    const double y = 102 - 5 * std::sin(pi * t);
    set(64 + i, x, y);
    set(68 + i, 256 - x, y);
  }
  for (int i = 0; i < 4; ++i) set(43 + i, 128, 112 + 12 * i);
  const double bottom_y[5] = {164, 167, 169, 167, 164};
  for (int i = 0; i < 5; ++i) set(47 + i, 112 + 8 * i, bottom_y[i]);
  set(78, 118, 130);
  set(79, 138, 130);
  set(80, 112, 146);
  set(81, 144, 146);
  set(82, 110, 158);
  set(83, 146, 158);

  auto eye = [&](std::span<const int> ring, double cx, double sign) {
    for (std::size_t k = 0; k < ring.size(); ++k) {
      const double t = pi - static_cast<double>(k) * pi / 4;
      set(ring[k], cx + sign * 18 * std::cos(t), 120 - 7 * std::sin(t));
    }
  };
  eye(lm::outline(lm::Part::kLeftEye), 92, 1);
  eye(lm::outline(lm::Part::kRightEye), 164, -1);
  set(74, 92, 120);
  set(77, 164, 120);
  set(104, 92, 120);
  set(105, 164, 120);

  for (int k = 0; k < 12; ++k) {
    const double t = pi - k * pi / 6;
    set(84 + k, 128 + 30 * std::cos(t), 194 - 12 * std::sin(t));
  }
  for (int k = 0; k < 8; ++k) {
    const double t = pi - k * pi / 4;
    set(96 + k, 128 + 20 * std::cos(t), 194 - 5 * std::sin(t));
  }

  const double s = size / 256.0;
  for (auto& p : out.points) {
    // Template coordinates are pixel centres of a 256 grid.
    p.x = (p.x + 0.5) * s - 0.5;
    p.y = (p.y + 0.5) * s - 0.5;
  }
  return out;
}

Anchors anchors_of(const Landmarks106& lm) {
  return {lm[lm::kLeftEyeCenter], lm[lm::kRightEyeCenter], lm.centroid(lm::outline(lm::Part::kMouth))};
}

}  // namespace faceerase::imaging
