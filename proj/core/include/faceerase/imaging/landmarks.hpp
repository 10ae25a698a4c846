#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "faceerase/imaging/image.hpp"

namespace faceerase::imaging {

// 106-point index layout. "Left" is the subject's image-left side.
//
//   0-32    face contour, image-left temple -> chin -> image-right temple
//   33-37   left eyebrow upper arc        64-67   left eyebrow lower arc
//   38-42   right eyebrow upper arc       68-71   right eyebrow lower arc
//   43-46   nose bridge, top to bottom
//   47-51   nose bottom, left to right
//   78-83   nose wings (78/80/82 left, 79/81/83 right, top to bottom)
//   52-57   left eye ring      72 top, 73 bottom, 74 centre
//   58-63   right eye ring     75 top, 76 bottom, 77 centre
//   84-95   outer lip ring, starting at the left corner, upper lip first
//   96-103  inner lip ring
//   104     left pupil         105     right pupil
namespace lm {

enum class Part { kLeftEyebrow, kRightEyebrow, kLeftEye, kRightEye, kNose, kMouth };

inline constexpr Part kAllParts[] = {Part::kLeftEyebrow, Part::kRightEyebrow, Part::kLeftEye,
                                     Part::kRightEye,    Part::kNose,         Part::kMouth};

/// Ordered polygon ring for a part.
std::span<const int> outline(Part part);
std::string_view name(Part part);

inline constexpr int kLeftEyeCenter = 74;
inline constexpr int kRightEyeCenter = 77;
inline constexpr int kNoseTop = 43;
inline constexpr int kLeftPupil = 104;
inline constexpr int kRightPupil = 105;

std::span<const int> contour();
std::span<const int> eyebrow_points();

}  // namespace lm

/// Faces that align to these points are already canonical: frontal, eyes
/// level, centred in a `size` x `size` crop.
Landmarks106 canonical_landmarks(int size = 256);

struct Anchors {
  Point2 left_eye;
  Point2 right_eye;
  Point2 mouth;
};

/// Eye centres and mouth centre used as alignment targets.
Anchors anchors_of(const Landmarks106& lm);

}  // namespace faceerase::imaging
