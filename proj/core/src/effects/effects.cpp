#include "faceerase/effects/effects.hpp"

#include <algorithm>
#include <cmath>

#include "faceerase/imaging/geometry.hpp"

namespace faceerase::effects {

using nlohmann::json;
namespace lm = imaging::lm;

double inter_ocular(const Landmarks106& l) {
  const Point2 a = l[lm::kLeftEyeCenter];
  const Point2 b = l[lm::kRightEyeCenter];
  return std::hypot(b.x - a.x, b.y - a.y);
}

int patch_dilation(const Landmarks106& l) { return std::max(1, static_cast<int>(std::lround(0.08 * inter_ocular(l)))); }

PartExtraction extract_parts(const ImageRGB& img, const Landmarks106& l) {
  PartExtraction out;
  const int radius = patch_dilation(l);
  for (Part part : lm::kAllParts) {
    try {
      PartPatch p;
      p.polygon = imaging::gather(l, lm::outline(part));
      const BinaryMask full = imaging::dilate(imaging::fill_polygon(p.polygon, img.height(), img.width()), radius);
      int r0 = img.height(), r1 = -1, c0 = img.width(), c1 = -1;
      for (int r = 0; r < img.height(); ++r)
        for (int c = 0; c < img.width(); ++c)
          if (full.at(r, c)) {
            r0 = std::min(r0, r);
            r1 = std::max(r1, r);
            c0 = std::min(c0, c);
            c1 = std::max(c1, c);
          }
      if (r1 < 0) throw imaging::PolygonError("polygon lies outside the image");
      p.x0 = c0;
      p.y0 = r0;
      p.pixels = ImageRGB(r1 - r0 + 1, c1 - c0 + 1);
      p.region = BinaryMask(r1 - r0 + 1, c1 - c0 + 1);
      for (int r = r0; r <= r1; ++r)
        for (int c = c0; c <= c1; ++c) {
          p.region.at(r - r0, c - c0) = full.at(r, c);
          for (int ch = 0; ch < 3; ++ch) p.pixels.at(r - r0, c - c0, ch) = img.at(r, c, ch);
        }
      p.anchor = imaging::polygon_centroid(p.polygon);
      out.patches.emplace(part, std::move(p));
    } catch (const imaging::ImageError& e) {
      out.errors.emplace(part, e.what());
    }
  }
  return out;
}

std::string effect_name(Effect e) {
  switch (e) {
    case Effect::kMonoEye: return "mono_eye";
    case Effect::kComic: return "comic";
    case Effect::kSmallFace: return "small_face";
    case Effect::kToonized: return "toonized";
    case Effect::kEyebrowless: return "eyebrowless";
  }
  return "";
}

Effect parse_effect(const std::string& name) {
  for (Effect e : kAllEffects)
    if (effect_name(e) == name) return e;
  throw EffectError("unknown effect '" + name + "' (mono_eye, comic, small_face, toonized, eyebrowless)");
}

EffectSpec identity_spec() {
  EffectSpec s;
  for (Part p : lm::kAllParts) s.placements[p] = Placement{};
  return s;
}

EffectSpec default_spec(Effect e) {
  EffectSpec s = identity_spec();
  s.effect = e;
  switch (e) {
    case Effect::kEyebrowless:
      s.placements.erase(Part::kLeftEyebrow);
      s.placements.erase(Part::kRightEyebrow);
      break;
    case Effect::kComic:
      s.placements[Part::kMouth].scale = 1.5;
      s.placements[Part::kLeftEye].scale = 0.7;
      s.placements[Part::kRightEye].scale = 0.7;
      break;
    case Effect::kToonized:
      s.placements[Part::kLeftEye].scale = 1.3;
      s.placements[Part::kRightEye].scale = 1.3;
      s.placements[Part::kMouth].scale = 1.3;
      s.placements[Part::kNose].scale = 0.75;
      break;
    case Effect::kSmallFace:
      s.face_scale = 0.8;
      break;
    case Effect::kMonoEye:
      s.placements = {{Part::kLeftEye, Placement{1.0, 0.0, -0.25, true}},
                      {Part::kNose, Placement{}},
                      {Part::kMouth, Placement{}}};
      break;
  }
  return s;
}

void EffectSpec::validate() const {
  if (!(face_scale > 0)) throw EffectError("face_scale must be > 0");
  for (const auto& [part, pl] : placements) {
    if (!(pl.scale > 0)) throw EffectError("scale for " + std::string(lm::name(part)) + " must be > 0");
    if (!std::isfinite(pl.offset_x) || !std::isfinite(pl.offset_y)) {
      throw EffectError("offsets for " + std::string(lm::name(part)) + " must be finite");
    }
  }
}

namespace {

Part parse_part_name(const std::string& name) {
  for (Part p : lm::kAllParts)
    if (lm::name(p) == name) return p;
  throw EffectError("unknown part '" + name + "'");
}

}  // namespace

void to_json(json& j, const EffectSpec& s) {
  json placements = json::object();
  for (const auto& [part, pl] : s.placements) {
    placements[std::string(lm::name(part))] = {{"scale", pl.scale},
                                               {"offset_x", pl.offset_x},
                                               {"offset_y", pl.offset_y},
                                               {"on_nose_axis", pl.on_nose_axis}};
  }
  j = json{{"name", effect_name(s.effect)}, {"face_scale", s.face_scale}, {"placements", placements}};
}

void from_json(const json& j, EffectSpec& s) {
  if (!j.is_object()) throw EffectError("effect spec must be a JSON object");
  try {
    s = default_spec(parse_effect(j.value("name", effect_name(s.effect))));
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it.key() != "name" && it.key() != "face_scale" && it.key() != "placements") {
        throw EffectError("unknown effect spec key '" + it.key() + "'");
      }
    }
    if (j.contains("face_scale")) s.face_scale = j.at("face_scale").get<double>();
    if (j.contains("placements")) {
      for (const auto& [name, v] : j.at("placements").items()) {
        const Part part = parse_part_name(name);
        if (v.is_null()) {
          s.placements.erase(part);
          continue;
        }
        Placement& pl = s.placements[part];
        for (const auto& [k, _] : v.items()) {
          if (k != "scale" && k != "offset_x" && k != "offset_y" && k != "on_nose_axis") {
            throw EffectError("unknown placement key '" + k + "'");
          }
        }
        pl.scale = v.value("scale", pl.scale);
        pl.offset_x = v.value("offset_x", pl.offset_x);
        pl.offset_y = v.value("offset_y", pl.offset_y);
        pl.on_nose_axis = v.value("on_nose_axis", pl.on_nose_axis);
      }
    }
  } catch (const json::exception& e) {
    throw EffectError(std::string("effect spec type error: ") + e.what());
  }
  s.validate();
}

Point2 face_center(const Landmarks106& l) {
  Point2 sum;
  for (Part p : lm::kAllParts) {
    const Point2 c = imaging::polygon_centroid(imaging::gather(l, lm::outline(p)));
    sum.x += c.x;
    sum.y += c.y;
  }
  const double n = static_cast<double>(std::size(lm::kAllParts));
  return {sum.x / n, sum.y / n};
}

namespace {

struct Placed {
  Point2 anchor;
  double scale;
};

Placed place(const PartPatch& patch, const Landmarks106& l, const EffectSpec& spec, Part part) {
  const Placement& pl = spec.placements.at(part);
  const double iod = inter_ocular(l);
  Point2 base;
  if (pl.on_nose_axis) {
    base = l[lm::kNoseTop];
  } else {
    const Point2 c = face_center(l);
    base = {c.x + spec.face_scale * (patch.anchor.x - c.x), c.y + spec.face_scale * (patch.anchor.y - c.y)};
  }
  return {{base.x + iod * pl.offset_x, base.y + iod * pl.offset_y}, pl.scale * spec.face_scale};
}

// Renders the transformed patch into a full-size canvas; returns its region.
BinaryMask render(const PartPatch& patch, const Placed& at, ImageRGB& canvas, Part part) {
  const int h = canvas.height();
  const int w = canvas.width();
  BinaryMask region(h, w);
  const double s = at.scale;
  auto to_dst = [&](double x, double y) {
    return Point2{at.anchor.x + s * (x - patch.anchor.x), at.anchor.y + s * (y - patch.anchor.y)};
  };
  const Point2 lo = to_dst(patch.x0 - 0.5, patch.y0 - 0.5);
  const Point2 hi = to_dst(patch.x0 + patch.region.width() - 0.5, patch.y0 + patch.region.height() - 0.5);
  const int qr0 = static_cast<int>(std::floor(lo.y));
  const int qr1 = static_cast<int>(std::ceil(hi.y));
  const int qc0 = static_cast<int>(std::floor(lo.x));
  const int qc1 = static_cast<int>(std::ceil(hi.x));
  for (int qr = qr0; qr <= qr1; ++qr)
    for (int qc = qc0; qc <= qc1; ++qc) {
      const double lx = patch.anchor.x + (qc - at.anchor.x) / s - patch.x0;
      const double ly = patch.anchor.y + (qr - at.anchor.y) / s - patch.y0;
      const int nx = static_cast<int>(std::lround(lx));
      const int ny = static_cast<int>(std::lround(ly));
      if (nx < 0 || ny < 0 || nx >= patch.region.width() || ny >= patch.region.height()) continue;
      if (!patch.region.at(ny, nx)) continue;
      if (qr < 1 || qc < 1 || qr >= h - 1 || qc >= w - 1) {
        throw PlacementError(std::string(lm::name(part)) + " would be placed outside the frame");
      }
      region.at(qr, qc) = 1;
      for (int ch = 0; ch < 3; ++ch) canvas.at(qr, qc, ch) = imaging::sample_bilinear(patch.pixels, lx, ly, ch);
    }
  return region;
}

}  // namespace

BinaryMask destination_region(const PartPatch& patch, const Landmarks106& l, const EffectSpec& spec, Part part,
                              int height, int width) {
  ImageRGB scratch(height, width);
  return render(patch, place(patch, l, spec, part), scratch, part);
}

ImageRGB apply_effect(const ImageRGB& blank, const PartExtraction& parts, const Landmarks106& l,
                      const EffectSpec& spec, const imaging::PoissonOptions& poisson) {
  spec.validate();
  ImageRGB out = blank;
  for (const auto& [part, _] : spec.placements) {
    const auto it = parts.patches.find(part);
    if (it == parts.patches.end()) {
      const auto err = parts.errors.find(part);
      throw EffectError("no patch for " + std::string(lm::name(part)) +
                        (err != parts.errors.end() ? ": " + err->second : std::string()));
    }
    ImageRGB canvas = out;
    const BinaryMask region = render(it->second, place(it->second, l, spec, part), canvas, part);
    out = imaging::poisson_blend(canvas, out, region, poisson);
  }
  return out;
}

}  // namespace faceerase::effects
