#include <gtest/gtest.h>

#include <cmath>

#include "faceerase/dataprep/synthetic.hpp"
#include "faceerase/effects/effects.hpp"
#include "faceerase/imaging/geometry.hpp"
#include "support.hpp"

using namespace faceerase;
using namespace faceerase::effects;

namespace {

struct Scene {
  ImageRGB face;
  ImageRGB blank;
  Landmarks106 lm;
};

Scene scene(std::uint64_t seed) {
  return {dataprep::render_canonical_face(seed, true), dataprep::render_canonical_face(seed, false),
          imaging::canonical_landmarks()};
}

double mean_abs_in(const ImageRGB& a, const ImageRGB& b, const BinaryMask& m) {
  double acc = 0;
  std::size_t n = 0;
  for (int r = 0; r < a.height(); ++r)
    for (int c = 0; c < a.width(); ++c)
      if (m.at(r, c))
        for (int ch = 0; ch < 3; ++ch) {
          acc += std::abs(a.at(r, c, ch) - b.at(r, c, ch));
          ++n;
        }
  return n ? acc / static_cast<double>(n) : 0.0;
}

BinaryMask polygon_mask(const Landmarks106& lm, Part p) {
  return imaging::fill_polygon(imaging::gather(lm, imaging::lm::outline(p)), 256, 256);
}

}  // namespace

TEST(Extract, SixPartsWithinTheirBoxes) {
  const auto s = scene(1);
  const auto parts = extract_parts(s.face, s.lm);
  ASSERT_EQ(parts.patches.size(), 6u);
  EXPECT_TRUE(parts.errors.empty());
  EXPECT_EQ(patch_dilation(s.lm), std::max(1, static_cast<int>(std::lround(0.08 * inter_ocular(s.lm)))));
  for (const auto& [part, p] : parts.patches) {
    for (const auto& q : p.polygon) {
      EXPECT_GE(q.x, p.x0);
      EXPECT_GE(q.y, p.y0);
      EXPECT_LE(q.x, p.x0 + p.region.width() - 1);
      EXPECT_LE(q.y, p.y0 + p.region.height() - 1);
    }
    EXPECT_EQ(p.pixels.at(0, 0, 1), s.face.at(p.y0, p.x0, 1));
  }
  const auto& l = parts.patches.at(Part::kLeftEye).anchor;
  const auto& r = parts.patches.at(Part::kRightEye).anchor;
  EXPECT_NEAR(l.x + r.x, 256.0, 1e-9);
  EXPECT_NEAR(l.y, r.y, 1e-9);
  const auto c = face_center(s.lm);
  EXPECT_NEAR(c.x, 128.0, 1e-9);
}

TEST(Extract, PolygonOutsideImageIsReportedPerPart) {
  const auto s = scene(2);
  Landmarks106 lm = s.lm;
  for (int i : imaging::lm::outline(Part::kMouth)) lm[i] = {-50.0 - i, -50.0};
  const auto parts = extract_parts(s.face, lm);
  EXPECT_EQ(parts.patches.count(Part::kMouth), 0u);
  EXPECT_EQ(parts.errors.count(Part::kMouth), 1u);
  EXPECT_EQ(parts.patches.size(), 5u);
}

TEST(Specs, DefaultRecipes) {
  const auto eb = default_spec(Effect::kEyebrowless);
  EXPECT_EQ(eb.placements.size(), 4u);
  EXPECT_EQ(eb.placements.count(Part::kLeftEyebrow), 0u);
  EXPECT_EQ(default_spec(Effect::kComic).placements.at(Part::kMouth).scale, 1.5);
  EXPECT_EQ(default_spec(Effect::kSmallFace).face_scale, 0.8);
  const auto mono = default_spec(Effect::kMonoEye);
  EXPECT_TRUE(mono.placements.at(Part::kLeftEye).on_nose_axis);
  EXPECT_EQ(mono.placements.count(Part::kRightEye), 0u);
  for (Effect e : kAllEffects) EXPECT_EQ(parse_effect(effect_name(e)), e);
  EXPECT_THROW(parse_effect("sparkly"), EffectError);
}

TEST(Specs, JsonRoundTripAndOverrides) {
  for (Effect e : kAllEffects) {
    const nlohmann::json j = default_spec(e);
    EXPECT_EQ(j.get<EffectSpec>(), default_spec(e));
  }
  const auto s = nlohmann::json::parse(R"({"name": "comic", "placements": {"mouth": {"scale": 2.0}, "nose": null}})")
                     .get<EffectSpec>();
  EXPECT_EQ(s.placements.at(Part::kMouth).scale, 2.0);
  EXPECT_EQ(s.placements.at(Part::kLeftEye).scale, 0.7);
  EXPECT_EQ(s.placements.count(Part::kNose), 0u);
  EXPECT_THROW(nlohmann::json::parse(R"({"name": "comic", "colour": 1})").get<EffectSpec>(), EffectError);
  EXPECT_THROW(nlohmann::json::parse(R"({"placements": {"mouth": {"scale": -1}}})").get<EffectSpec>(), EffectError);
  EXPECT_THROW(nlohmann::json::parse(R"({"placements": {"ear": {}}})").get<EffectSpec>(), EffectError);
}

TEST(Apply, IdentityOnBlankRestoresTheParts) {
  const auto s = scene(3);
  const auto parts = extract_parts(s.face, s.lm);
  const auto out = apply_effect(s.blank, parts, s.lm, identity_spec());
  for (Part p : {Part::kLeftEye, Part::kRightEye, Part::kNose, Part::kMouth}) {
    EXPECT_LT(mean_abs_in(out, s.face, polygon_mask(s.lm, p)), 0.05) << imaging::lm::name(p);
  }
}

TEST(Apply, PixelsOutsideDestinationRegionsAreUntouched) {
  const auto s = scene(4);
  const auto parts = extract_parts(s.face, s.lm);
  for (Effect e : kAllEffects) {
    const auto spec = default_spec(e);
    const auto out = apply_effect(s.blank, parts, s.lm, spec);
    BinaryMask touched(256, 256);
    for (const auto& [part, _] : spec.placements) {
      touched = imaging::mask_union(touched,
                                    destination_region(parts.patches.at(part), s.lm, spec, part, 256, 256));
    }
    for (int r = 0; r < 256; ++r)
      for (int c = 0; c < 256; ++c)
        if (!touched.at(r, c))
          for (int ch = 0; ch < 3; ++ch) ASSERT_EQ(out.at(r, c, ch), s.blank.at(r, c, ch)) << effect_name(e);
  }
}

TEST(Apply, EyebrowlessLeavesBrowAreaBlank) {
  const auto s = scene(5);
  const auto out = apply_effect(s.blank, extract_parts(s.face, s.lm), s.lm, default_spec(Effect::kEyebrowless));
  const auto brow = polygon_mask(s.lm, Part::kLeftEyebrow);
  EXPECT_EQ(mean_abs_in(out, s.blank, brow), 0.0);
  EXPECT_LT(mean_abs_in(out, s.face, polygon_mask(s.lm, Part::kMouth)), 0.05);
}

TEST(Apply, MonoEyeSitsOnTheNoseAxis) {
  const auto s = scene(6);
  const auto parts = extract_parts(s.face, s.lm);
  const auto spec = default_spec(Effect::kMonoEye);
  const auto region = destination_region(parts.patches.at(Part::kLeftEye), s.lm, spec, Part::kLeftEye, 256, 256);
  const auto centroid_x = [&] {
    double sx = 0;
    std::size_t n = 0;
    for (int r = 0; r < 256; ++r)
      for (int c = 0; c < 256; ++c)
        if (region.at(r, c)) {
          sx += c;
          ++n;
        }
    return sx / static_cast<double>(n);
  }();
  EXPECT_NEAR(centroid_x, s.lm[imaging::lm::kNoseTop].x, 2.0);
  const double cy_expected = s.lm[imaging::lm::kNoseTop].y - 0.25 * inter_ocular(s.lm);
  double sy = 0;
  std::size_t n = 0;
  for (int r = 0; r < 256; ++r)
    for (int c = 0; c < 256; ++c)
      if (region.at(r, c)) {
        sy += r;
        ++n;
      }
  EXPECT_NEAR(sy / static_cast<double>(n), cy_expected, 3.0);
}

TEST(Apply, ScaledPartCoversScaledArea) {
  const auto s = scene(7);
  const auto parts = extract_parts(s.face, s.lm);
  const auto base = destination_region(parts.patches.at(Part::kMouth), s.lm, identity_spec(), Part::kMouth, 256, 256);
  const auto comic = default_spec(Effect::kComic);
  const auto big = destination_region(parts.patches.at(Part::kMouth), s.lm, comic, Part::kMouth, 256, 256);
  EXPECT_NEAR(static_cast<double>(big.count()) / base.count(), 2.25, 0.2);
}

TEST(Apply, PartPushedOffFrameRaisesPlacementError) {
  const auto s = scene(8);
  auto spec = identity_spec();
  spec.placements[Part::kMouth].offset_y = 3.0;
  EXPECT_THROW(apply_effect(s.blank, extract_parts(s.face, s.lm), s.lm, spec), PlacementError);
}
