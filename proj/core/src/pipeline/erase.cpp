#include "faceerase/pipeline/erase.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>

#include "faceerase/imaging/io.hpp"
#include "faceerase/models/forward.hpp"
#include "faceerase/trainer/config.hpp"

namespace faceerase::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

InpaintModel load_model(const fs::path& checkpoint_dir) {
  std::ifstream in(checkpoint_dir / "manifest.json");
  if (!in) throw models::CheckpointError("no manifest.json in " + checkpoint_dir.string());
  json m;
  try {
    in >> m;
  } catch (const json::exception& e) {
    throw models::CheckpointError("malformed checkpoint manifest: " + std::string(e.what()));
  }
  if (!m.contains("config")) throw models::CheckpointError("checkpoint manifest has no config");
  trainer::TrainConfig config;
  try {
    config = m.at("config").get<trainer::TrainConfig>();
  } catch (const trainer::ConfigError& e) {
    throw models::CheckpointError(std::string("checkpoint config: ") + e.what());
  }
  auto nets = std::make_shared<models::Networks>(config.model, config.seed);
  models::load_networks(checkpoint_dir, *nets, {"edge_generator", "pixel_clone", "refine"});
  return {std::move(nets), config.image_size, config.canny};
}

imaging::GrayImage feather_alpha(const BinaryMask& hole, int width) {
  const int h = hole.height();
  const int w = hole.width();
  imaging::GrayImage alpha(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      if (hole.at(r, c)) {
        alpha.at(r, c) = 1.0f;
        continue;
      }
      double best = width + 1.0;
      for (int dr = -width; dr <= width; ++dr)
        for (int dc = -width; dc <= width; ++dc) {
          const int rr = r + dr;
          const int cc = c + dc;
          if (rr < 0 || cc < 0 || rr >= h || cc >= w || !hole.at(rr, cc)) continue;
          best = std::min(best, std::hypot(dr, dc));
        }
      alpha.at(r, c) = static_cast<float>(std::max(0.0, 1.0 - best / (width + 1.0)));
    }
  return alpha;
}

namespace {

ImageRGB paste_back(const ImageRGB& frame, const ImageRGB& blank, const imaging::GrayImage& alpha_crop,
                    const imaging::Similarity& crop_from_frame) {
  ImageRGB out = frame;
  const double hi = alpha_crop.width() - 1;
  for (int r = 0; r < frame.height(); ++r)
    for (int c = 0; c < frame.width(); ++c) {
      const imaging::Point2 q = crop_from_frame.apply({static_cast<double>(c), static_cast<double>(r)});
      if (q.x < 0 || q.y < 0 || q.x > hi || q.y > hi) continue;
      const float a = imaging::sample_bilinear(alpha_crop, q.x, q.y);
      if (a <= 0.0f) continue;
      for (int ch = 0; ch < 3; ++ch) {
        const float v = imaging::sample_bilinear(blank, q.x, q.y, ch);
        out.at(r, c, ch) = (1.0f - a) * frame.at(r, c, ch) + a * v;
      }
    }
  return out;
}

}  // namespace

EraseResult erase(const ImageRGB& img, const Landmarks106& lm, const dataprep::PartSet& parts,
                  const InpaintModel& model, const EraseOptions& options) {
  if (!model.networks) throw models::CheckpointError("erase: no networks loaded");
  imaging::AlignedFace aligned = imaging::align_face(img, lm, kCropSize);
  EraseResult r;
  r.crop_from_frame = aligned.crop_from_frame;
  r.aligned_input = aligned.image;
  const int s = model.image_size;
  r.mask = parts.empty() ? BinaryMask(kCropSize, kCropSize)
                         : dataprep::facial_part_mask(aligned.landmarks, parts,
                                                      options.dilation_radius.value_or(
                                                          dataprep::default_dilation_radius(kCropSize)),
                                                      kCropSize, kCropSize);
  if (r.mask.count() == 0) {
    r.blank_full_frame = img;
    r.aligned_blank = aligned.image;
    r.edge_completed = EdgeMap(s, s);
    r.flow = FlowField(s, s);
    r.coarse = s == kCropSize ? aligned.image : imaging::resize(aligned.image, s, s);
    return r;
  }

  const ImageRGB small = s == kCropSize ? aligned.image : imaging::resize(aligned.image, s, s);
  const BinaryMask small_mask = s == kCropSize ? r.mask : imaging::resize_nearest(r.mask, s, s);
  const imaging::GrayImage gray = imaging::to_grayscale(small);
  const EdgeMap edges = imaging::canny_edges(gray, model.canny);

  nn::NoGradGuard ng;
  const models::MaskedInputs in = models::mask_inputs(models::to_tensor(std::vector{small}),
                                                      models::to_tensor(std::vector{gray}),
                                                      models::to_tensor(std::vector{edges}),
                                                      models::to_tensor(std::vector{small_mask}));
  const models::InpaintOutputs out = models::inpaint_forward(*model.networks, in, options.force_gates_open);

  r.edge_completed = EdgeMap(s, s);
  std::copy_n(out.edges.value().data(), r.edge_completed.pixel_count(), r.edge_completed.data().begin());
  r.flow = FlowField(s, s);
  const float* fx = out.flow.value().plane(0, 0);
  const float* fy = out.flow.value().plane(0, 1);
  for (std::size_t i = 0; i < r.flow.pixel_count(); ++i) {
    r.flow.data()[2 * i] = fx[i];
    r.flow.data()[2 * i + 1] = fy[i];
  }
  r.coarse = models::rgb_at(out.warped.value(), 0);
  ImageRGB refined = models::rgb_at(out.refined.value(), 0);
  if (s != kCropSize) refined = imaging::resize(refined, kCropSize, kCropSize);

  r.aligned_blank = aligned.image;
  for (int y = 0; y < kCropSize; ++y)
    for (int x = 0; x < kCropSize; ++x) {
      if (!r.mask.at(y, x)) continue;
      for (int ch = 0; ch < 3; ++ch) r.aligned_blank.at(y, x, ch) = std::clamp(refined.at(y, x, ch), 0.0f, 1.0f);
    }
  r.blank_full_frame = paste_back(img, r.aligned_blank, feather_alpha(r.mask), r.crop_from_frame);
  return r;
}

namespace {

// Middlebury colour wheel: red-yellow-green-cyan-blue-magenta segments.
std::vector<std::array<float, 3>> color_wheel() {
  constexpr int kSegments[6] = {15, 6, 4, 11, 13, 6};
  std::vector<std::array<float, 3>> wheel;
  for (int seg = 0; seg < 6; ++seg) {
    for (int i = 0; i < kSegments[seg]; ++i) {
      const float t = static_cast<float>(i) / static_cast<float>(kSegments[seg]);
      switch (seg) {
        case 0: wheel.push_back({1, t, 0}); break;
        case 1: wheel.push_back({1 - t, 1, 0}); break;
        case 2: wheel.push_back({0, 1, t}); break;
        case 3: wheel.push_back({0, 1 - t, 1}); break;
        case 4: wheel.push_back({t, 0, 1}); break;
        default: wheel.push_back({1, 0, 1 - t}); break;
      }
    }
  }
  return wheel;
}

}  // namespace

ImageRGB flow_to_color(const FlowField& flow, std::optional<double> max_magnitude) {
  static const auto wheel = color_wheel();
  const int n = static_cast<int>(wheel.size());
  double norm = max_magnitude.value_or(0.0);
  if (!max_magnitude) {
    for (std::size_t i = 0; i < flow.pixel_count(); ++i) {
      norm = std::max<double>(norm, std::hypot(flow.data()[2 * i], flow.data()[2 * i + 1]));
    }
  }
  ImageRGB out(flow.height(), flow.width(), 1.0f);
  if (norm <= 0) return out;
  for (int r = 0; r < flow.height(); ++r)
    for (int c = 0; c < flow.width(); ++c) {
      const double u = flow.at(r, c, 0) / norm;
      const double v = flow.at(r, c, 1) / norm;
      const double rad = std::hypot(u, v);
      const double a = std::atan2(-v, -u) / std::numbers::pi;
      const double fk = (a + 1) / 2 * (n - 1);
      const int k0 = static_cast<int>(std::floor(fk));
      const int k1 = (k0 + 1) % n;
      const double f = fk - k0;
      for (int ch = 0; ch < 3; ++ch) {
        double col = (1 - f) * wheel[static_cast<std::size_t>(k0)][ch] + f * wheel[static_cast<std::size_t>(k1)][ch];
        col = rad <= 1 ? 1 - rad * (1 - col) : col * 0.75;
        out.at(r, c, ch) = static_cast<float>(col);
      }
    }
  return out;
}

ImageRGB intermediate_grid(const EraseResult& r) {
  auto tile = [](const ImageRGB& im) {
    return im.same_size(kCropSize, kCropSize) ? im : imaging::resize(im, kCropSize, kCropSize);
  };
  auto gray_tile = [&](const imaging::Raster<float, 1>& g) {
    ImageRGB rgb(g.height(), g.width());
    for (int y = 0; y < g.height(); ++y)
      for (int x = 0; x < g.width(); ++x)
        for (int ch = 0; ch < 3; ++ch) rgb.at(y, x, ch) = 1.0f - g.at(y, x);
    return tile(rgb);
  };
  ImageRGB masked = r.aligned_input;
  for (int y = 0; y < kCropSize; ++y)
    for (int x = 0; x < kCropSize; ++x)
      if (r.mask.at(y, x))
        for (int ch = 0; ch < 3; ++ch) masked.at(y, x, ch) = 1.0f;
  const std::vector<ImageRGB> tiles = {tile(r.aligned_input), masked,
                                       gray_tile(r.edge_completed), tile(flow_to_color(r.flow)),
                                       tile(r.coarse), r.aligned_blank};
  ImageRGB grid(kCropSize, kCropSize * static_cast<int>(tiles.size()));
  for (std::size_t t = 0; t < tiles.size(); ++t)
    for (int y = 0; y < kCropSize; ++y)
      for (int x = 0; x < kCropSize; ++x)
        for (int ch = 0; ch < 3; ++ch) grid.at(y, static_cast<int>(t) * kCropSize + x, ch) = tiles[t].at(y, x, ch);
  return grid;
}

json BatchReport::to_json() const {
  json failures = json::array();
  for (const auto& f : failed) failures.push_back({{"id", f.id}, {"error", f.error}});
  return {{"succeeded", succeeded}, {"failed", failures}, {"count", succeeded.size() + failed.size()}};
}

BatchReport erase_batch(const fs::path& manifest, const fs::path& image_dir, const fs::path& landmark_dir,
                        const dataprep::PartSet& parts, const InpaintModel& model, const fs::path& out_dir,
                        bool save_intermediates) {
  const auto records = dataprep::read_ingest_manifest(manifest);
  fs::create_directories(out_dir);
  BatchReport report;
  for (const auto& rec : records) {
    try {
      const ImageRGB img = imaging::read_rgb(image_dir / rec.image);
      const Landmarks106 lm = imaging::read_landmarks(landmark_dir / rec.landmarks);
      const EraseResult r = erase(img, lm, parts, model);
      imaging::write_rgb(out_dir / (rec.id + ".png"), r.blank_full_frame);
      imaging::write_rgb(out_dir / (rec.id + "_grid.png"), intermediate_grid(r));
      if (save_intermediates) {
        const fs::path dir = out_dir / rec.id;
        imaging::write_rgb(dir / "aligned_input.png", r.aligned_input);
        imaging::write_rgb(dir / "aligned_blank.png", r.aligned_blank);
        imaging::write_mask(dir / "mask.png", r.mask);
        imaging::write_edges(dir / "edges.png", r.edge_completed);
        imaging::write_rgb(dir / "flow.png", flow_to_color(r.flow));
        imaging::write_rgb(dir / "coarse.png", r.coarse);
      }
      report.succeeded.push_back(rec.id);
    } catch (const std::exception& e) {
      spdlog::error("erase failed for {}: {}", rec.id, e.what());
      report.failed.push_back({rec.id, e.what()});
    }
  }
  std::ofstream(out_dir / "report.json") << report.to_json().dump(2) << '\n';
  return report;
}

}  // namespace faceerase::pipeline
