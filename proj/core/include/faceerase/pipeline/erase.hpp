#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "faceerase/dataprep/dataprep.hpp"
#include "faceerase/imaging/align.hpp"
#include "faceerase/imaging/canny.hpp"
#include "faceerase/models/bundle.hpp"

namespace faceerase::pipeline {

using imaging::BinaryMask;
using imaging::EdgeMap;
using imaging::ImageRGB;
using imaging::Landmarks106;

/// Per-pixel (dx, dy) offsets in the normalized units of the warp.
class FlowField : public imaging::Raster<float, 2> {
 public:
  using Raster::Raster;
};

/// Trained generators plus the preprocessing they were trained with.
struct InpaintModel {
  std::shared_ptr<const models::Networks> networks;
  int image_size = 256;
  imaging::CannyParams canny;
};

/// Reads the training config and the three generator blobs of a checkpoint.
InpaintModel load_model(const std::filesystem::path& checkpoint_dir);

inline constexpr int kCropSize = 256;
inline constexpr int kFeatherWidth = 3;

struct EraseResult {
  ImageRGB blank_full_frame;
  ImageRGB aligned_input;
  ImageRGB aligned_blank;  // 256x256, equal to aligned_input outside the mask
  BinaryMask mask;         // 256x256
  EdgeMap edge_completed;  // model resolution
  FlowField flow;          // model resolution
  ImageRGB coarse;         // warp(I, F), model resolution
  imaging::Similarity crop_from_frame;
};

struct EraseOptions {
  std::optional<int> dilation_radius;  // defaults to 5% of the crop
  bool force_gates_open = false;
};

/// Removes the selected parts and pastes the blank crop back into the frame
/// through a feathered copy of the hole. An empty part set returns the input.
EraseResult erase(const ImageRGB& img, const Landmarks106& lm, const dataprep::PartSet& parts,
                  const InpaintModel& model, const EraseOptions& options = {});

/// Opacity used to paste the aligned blank: 1 inside the hole, falling
/// linearly to 0 over kFeatherWidth pixels outside it.
imaging::GrayImage feather_alpha(const BinaryMask& hole, int width = kFeatherWidth);

/// Standard optical-flow colour wheel. Zero flow maps to white. Magnitudes
/// are normalized by `max_magnitude`, or by the field's maximum if unset.
ImageRGB flow_to_color(const FlowField& flow, std::optional<double> max_magnitude = std::nullopt);

/// One row of intermediates: input, masked input, completed edges, flow,
/// coarse, blank. Each tile is 256x256.
ImageRGB intermediate_grid(const EraseResult& r);

struct BatchFailure {
  std::string id;
  std::string error;
};

struct BatchReport {
  std::vector<std::string> succeeded;
  std::vector<BatchFailure> failed;
  [[nodiscard]] nlohmann::json to_json() const;
};

/// Erases every record of an ingest manifest. Image paths resolve against
/// `image_dir`, landmark paths against `landmark_dir`. Writes <id>.png and
/// <id>_grid.png per record and report.json; failures are logged and skipped.
BatchReport erase_batch(const std::filesystem::path& manifest, const std::filesystem::path& image_dir,
                        const std::filesystem::path& landmark_dir, const dataprep::PartSet& parts,
                        const InpaintModel& model, const std::filesystem::path& out_dir,
                        bool save_intermediates = false);

}  // namespace faceerase::pipeline
