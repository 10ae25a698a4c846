#pragma once

#include <cstdint>
#include <filesystem>

#include "faceerase/dataprep/dataprep.hpp"

namespace faceerase::dataprep {

/// Procedural frontal face with exact landmarks: skin with forehead
/// wrinkle bands, eyebrows, eyes, nose and mouth, placed in the frame by a
/// random similarity transform.
struct SyntheticFace {
  ImageRGB image;
  Landmarks106 landmarks;
};

struct SyntheticOptions {
  int frame_size = 288;
  double max_rotation_deg = 6.0;
  double min_scale = 0.95;
  double max_scale = 1.05;
  double max_shift = 6.0;
};

SyntheticFace make_synthetic_face(std::uint64_t seed, const SyntheticOptions& options = {});

/// Canonical-pose rendering of the face drawn from `seed`, optionally
/// without its parts.
ImageRGB render_canonical_face(std::uint64_t seed, bool with_parts, int size = 256);

struct CorpusSpec {
  int count = 10;
  std::uint64_t seed = 0;
  /// Every n-th record is flagged (0 disables): glasses, hat, occluded forehead.
  int glasses_every = 0;
  int hat_every = 0;
  int occluded_every = 0;
  SyntheticOptions face;
};

/// Writes <corpus>/face_XXXX.png, <corpus>/manifest.jsonl and
/// <landmarks>/face_XXXX.json.
std::vector<CorpusRecord> write_synthetic_corpus(const std::filesystem::path& corpus_dir,
                                                 const std::filesystem::path& landmarks_dir,
                                                 const CorpusSpec& spec);

}  // namespace faceerase::dataprep
