#include "faceerase/trainer/data.hpp"

#include <numeric>

#include "faceerase/imaging/io.hpp"
#include "faceerase/models/forward.hpp"

namespace faceerase::trainer {

TrainingSet make_training_set(std::vector<imaging::ImageRGB> images, std::vector<imaging::BinaryMask> masks,
                              const imaging::CannyParams& canny) {
  TrainingSet set;
  for (std::size_t i = 0; i < images.size(); ++i) {
    set.gray.push_back(imaging::to_grayscale(images[i]));
    set.edges.push_back(imaging::canny_edges(set.gray.back(), canny));
    set.image_ids.push_back("image_" + std::to_string(i));
  }
  for (std::size_t i = 0; i < masks.size(); ++i) set.mask_ids.push_back("mask_" + std::to_string(i));
  set.images = std::move(images);
  set.masks = std::move(masks);
  return set;
}

TrainingSet load_training_set(const std::filesystem::path& dataset_dir, Split split, int image_size,
                              const imaging::CannyParams& canny) {
  const auto manifest = dataprep::read_dataset_manifest(dataset_dir / "manifest.json");
  const auto& entries = split == Split::kTrain ? manifest.train : manifest.val;
  std::vector<imaging::ImageRGB> images;
  std::vector<imaging::BinaryMask> masks;
  std::vector<std::string> ids;
  for (const auto& e : entries) {
    imaging::ImageRGB img = imaging::read_rgb(dataset_dir / e.image);
    imaging::BinaryMask m = imaging::read_mask(dataset_dir / e.mask);
    if (!img.same_size(image_size, image_size)) img = imaging::resize(img, image_size, image_size);
    if (!m.same_size(image_size, image_size)) m = imaging::resize_nearest(m, image_size, image_size);
    images.push_back(std::move(img));
    masks.push_back(std::move(m));
    ids.push_back(e.id);
  }
  TrainingSet set = make_training_set(std::move(images), std::move(masks), canny);
  set.image_ids = ids;
  set.mask_ids = ids;
  return set;
}

Batch make_batch(const TrainingSet& set, const std::vector<std::pair<int, int>>& pairs) {
  std::vector<imaging::ImageRGB> img;
  std::vector<imaging::GrayImage> gray;
  std::vector<imaging::EdgeMap> edges;
  std::vector<imaging::BinaryMask> masks;
  Batch b;
  for (auto [i, m] : pairs) {
    img.push_back(set.images.at(static_cast<std::size_t>(i)));
    gray.push_back(set.gray.at(static_cast<std::size_t>(i)));
    edges.push_back(set.edges.at(static_cast<std::size_t>(i)));
    masks.push_back(set.masks.at(static_cast<std::size_t>(m)));
    b.image_index.push_back(i);
    b.mask_index.push_back(m);
  }
  b.image = models::to_tensor(img);
  b.gray = models::to_tensor(gray);
  b.edges = models::to_tensor(edges);
  b.mask = models::to_tensor(masks);
  return b;
}

Batch sample_batch(const TrainingSet& set, int batch_size, std::mt19937_64& rng) {
  if (set.empty()) throw std::invalid_argument("cannot sample from an empty training set");
  // Modulo draws keep the sequence identical across standard libraries.
  std::vector<std::pair<int, int>> pairs;
  for (int k = 0; k < batch_size; ++k) {
    const int i = static_cast<int>(rng() % set.images.size());
    const int m = static_cast<int>(rng() % set.masks.size());
    pairs.emplace_back(i, m);
  }
  return make_batch(set, pairs);
}

std::vector<std::pair<int, int>> fixed_pairs(const TrainingSet& set, std::uint64_t seed) {
  std::vector<int> perm(set.masks.size());
  std::iota(perm.begin(), perm.end(), 0);
  if (seed != 0) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng() % i]);
  }
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < set.size(); ++i) out.emplace_back(i, perm[static_cast<std::size_t>(i) % perm.size()]);
  return out;
}

}  // namespace faceerase::trainer
