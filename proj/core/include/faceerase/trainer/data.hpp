#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "faceerase/dataprep/dataprep.hpp"
#include "faceerase/imaging/canny.hpp"
#include "faceerase/nn/tensor.hpp"

namespace faceerase::trainer {

/// Independent pools of ground-truth images and hole masks at training
/// resolution, with each image's gray version and Canny edges precomputed.
struct TrainingSet {
  std::vector<imaging::ImageRGB> images;
  std::vector<imaging::GrayImage> gray;
  std::vector<imaging::EdgeMap> edges;
  std::vector<imaging::BinaryMask> masks;
  std::vector<std::string> image_ids;
  std::vector<std::string> mask_ids;

  [[nodiscard]] bool empty() const { return images.empty() || masks.empty(); }
  [[nodiscard]] int size() const { return static_cast<int>(images.size()); }
};

enum class Split { kTrain, kVal };

/// Reads one split of a built dataset and resizes to `image_size`.
TrainingSet load_training_set(const std::filesystem::path& dataset_dir, Split split, int image_size,
                              const imaging::CannyParams& canny);

/// Builds the set from in-memory pools (already at training size).
TrainingSet make_training_set(std::vector<imaging::ImageRGB> images, std::vector<imaging::BinaryMask> masks,
                              const imaging::CannyParams& canny);

struct Batch {
  nn::Tensor<float> image;  // (B,3,H,W)
  nn::Tensor<float> gray;   // (B,1,H,W)
  nn::Tensor<float> edges;  // (B,1,H,W)
  nn::Tensor<float> mask;   // (B,1,H,W)
  std::vector<int> image_index;
  std::vector<int> mask_index;
};

/// Uniform draws, with replacement, of images and masks independently.
Batch sample_batch(const TrainingSet& set, int batch_size, std::mt19937_64& rng);
/// Explicit (image, mask) pairs.
Batch make_batch(const TrainingSet& set, const std::vector<std::pair<int, int>>& pairs);

/// Pairing used for evaluation: image i with mask perm(i mod masks), where
/// perm is drawn once from `seed`. Seed 0 pairs image i with mask i.
std::vector<std::pair<int, int>> fixed_pairs(const TrainingSet& set, std::uint64_t seed);

}  // namespace faceerase::trainer
