#pragma once

#include <map>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <string>
#include <vector>

#include "faceerase/imaging/image.hpp"
#include "faceerase/imaging/landmarks.hpp"
#include "faceerase/imaging/poisson.hpp"

namespace faceerase::effects {

using imaging::BinaryMask;
using imaging::ImageRGB;
using imaging::Landmarks106;
using imaging::Point2;
using imaging::lm::Part;

class EffectError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PlacementError : public EffectError {
 public:
  using EffectError::EffectError;
};

/// A facial part cut from its bounding box. `region` and `pixels` share the
/// box; `polygon` and `anchor` are in source-image coordinates.
struct PartPatch {
  ImageRGB pixels;
  BinaryMask region;
  int x0 = 0;
  int y0 = 0;
  std::vector<Point2> polygon;
  Point2 anchor;
};

struct PartExtraction {
  std::map<Part, PartPatch> patches;
  std::map<Part, std::string> errors;  // parts whose polygon was unusable
};

/// Inter-ocular distance from the eye centres.
double inter_ocular(const Landmarks106& lm);
/// Patch dilation used by extract_parts: 8% of the inter-ocular distance.
int patch_dilation(const Landmarks106& lm);

PartExtraction extract_parts(const ImageRGB& img, const Landmarks106& lm);

enum class Effect { kMonoEye, kComic, kSmallFace, kToonized, kEyebrowless };
inline constexpr Effect kAllEffects[] = {Effect::kMonoEye, Effect::kComic, Effect::kSmallFace, Effect::kToonized,
                                         Effect::kEyebrowless};
std::string effect_name(Effect e);
Effect parse_effect(const std::string& name);

/// Offsets are in inter-ocular units relative to the destination anchor:
/// the part's own anchor, or the nose-top landmark when on_nose_axis.
struct Placement {
  double scale = 1.0;
  double offset_x = 0.0;
  double offset_y = 0.0;
  bool on_nose_axis = false;
  friend bool operator==(const Placement&, const Placement&) = default;
};

struct EffectSpec {
  Effect effect = Effect::kEyebrowless;
  std::map<Part, Placement> placements;  // parts pasted back, in part order
  double face_scale = 1.0;               // anchors move toward the face centre by this factor

  void validate() const;
  friend bool operator==(const EffectSpec&, const EffectSpec&) = default;
};

/// The documented recipe for each effect.
EffectSpec default_spec(Effect e);
/// Every part at its own place and size.
EffectSpec identity_spec();

void to_json(nlohmann::json& j, const EffectSpec& s);
/// Starts from default_spec(name) and applies the given fields. A placement
/// set to null removes that part.
void from_json(const nlohmann::json& j, EffectSpec& s);

/// Mean of the part anchors; small_face scales about it.
Point2 face_center(const Landmarks106& lm);

/// Pastes the parts named in the EffectSpec onto the blank face with Poisson blending.
ImageRGB apply_effect(const ImageRGB& blank, const PartExtraction& parts, const Landmarks106& lm,
                      const EffectSpec& spec, const imaging::PoissonOptions& poisson = {});

/// The destination region a part covers under the spec.
BinaryMask destination_region(const PartPatch& patch, const Landmarks106& lm, const EffectSpec& spec, Part part,
                              int height, int width);

}  // namespace faceerase::effects
