#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "faceerase/imaging/image.hpp"
#include "faceerase/imaging/landmarks.hpp"

namespace faceerase::dataprep {

using imaging::BinaryMask;
using imaging::ImageRGB;
using imaging::Landmarks106;

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CorpusRecord {
  std::string id;
  std::string image;      // relative to the corpus directory
  std::string landmarks;  // relative to the landmarks directory
  bool has_glasses = false;
  bool has_hat = false;
  bool forehead_occluded = false;
};

/// JSON lines: {image, landmarks, has_glasses, has_hat, forehead_occluded[, id]}.
std::vector<CorpusRecord> read_ingest_manifest(const std::filesystem::path& path);
void write_ingest_manifest(const std::filesystem::path& path, const std::vector<CorpusRecord>& records);

/// Keeps records with no glasses, no hat and a visible forehead.
std::vector<CorpusRecord> filter_corpus(const std::vector<CorpusRecord>& records);

inline constexpr int kForeheadHeight = 128;
inline constexpr int kForeheadWidth = 256;
inline constexpr int kSampleSize = 256;

/// Source rows [first, second) of the forehead band: from the hairline row
/// down to the topmost eyebrow landmark.
std::pair<int, int> forehead_rows(const Landmarks106& lm, int hairline_row = 0);
/// Full-width forehead band resized to 128 rows x 256 columns.
ImageRGB crop_forehead(const ImageRGB& img, const Landmarks106& lm, int hairline_row = 0);
/// Stacks the band on top of its vertical mirror: 256 x 256, out[r] == out[255 - r].
ImageRGB flip_stitch(const ImageRGB& forehead);

enum class FacePart { kEyebrows, kEyes, kNose, kMouth };
inline constexpr FacePart kAllFaceParts[] = {FacePart::kEyebrows, FacePart::kEyes, FacePart::kNose,
                                             FacePart::kMouth};
using PartSet = std::set<FacePart>;

/// Accepts eyebrows, eyes, nose, mouth; anything else raises DataError.
FacePart parse_part(const std::string& name);
PartSet parse_parts(const std::string& comma_separated);
std::string part_name(FacePart part);

/// Default dilation: 5% of the crop width.
int default_dilation_radius(int crop_width = kSampleSize);

/// Union of the part polygons, dilated once.
BinaryMask facial_part_mask(const Landmarks106& lm, const PartSet& parts, int dilation_radius,
                            int height = kSampleSize, int width = kSampleSize);

/// Two ellipses around the eye centroids joined by a bridge bar, sized from
/// the inter-ocular distance.
BinaryMask glasses_mask(const Landmarks106& lm, int height, int width);

struct GlassesResult {
  BinaryMask mask;
  bool augmented = false;
};
/// With the given probability (one Bernoulli draw from `seed`) unions the
/// glasses silhouette into the mask.
GlassesResult augment_glasses(const BinaryMask& mask, const Landmarks106& lm, double probability,
                              std::uint64_t seed);

inline constexpr double kMinMaskFill = 0.05;
inline constexpr double kMaxMaskFill = 0.70;
[[nodiscard]] bool mask_in_band(const BinaryMask& mask);

struct BuildOptions {
  std::uint64_t seed = 0;
  double val_fraction = 0.1;
  double glasses_probability = 0.3;
  std::string manifest_name = "manifest.jsonl";
};

struct DatasetEntry {
  std::string id;
  std::string image;  // relative to the output directory
  std::string mask;
  bool glasses = false;
};

struct DatasetManifest {
  std::vector<DatasetEntry> train;
  std::vector<DatasetEntry> val;
  std::uint64_t seed = 0;
  std::size_t filtered = 0;
  std::size_t skipped = 0;
};

/// Aligns every kept face, synthesizes its blank face and part mask, and
/// writes images/, masks/ and manifest.json under out_dir. Records whose
/// landmarks or image cannot be read are skipped with a warning.
DatasetManifest build_dataset(const std::filesystem::path& corpus_dir,
                              const std::filesystem::path& landmarks_dir,
                              const std::filesystem::path& out_dir, const BuildOptions& options = {});

DatasetManifest read_dataset_manifest(const std::filesystem::path& path);
void write_dataset_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

}  // namespace faceerase::dataprep
