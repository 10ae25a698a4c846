#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

#include "faceerase/dataprep/dataprep.hpp"
#include "faceerase/dataprep/synthetic.hpp"
#include "faceerase/imaging/image.hpp"
#include "faceerase/nn/tensor.hpp"
#include "faceerase/trainer/config.hpp"
#include "faceerase/trainer/data.hpp"

namespace faceerase::testing_support {

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto base = std::filesystem::temp_directory_path() / "faceerase_tests";
  const auto dir = base / (name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline imaging::ImageRGB random_image(int h, int w, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  imaging::ImageRGB img(h, w);
  for (float& v : img.data()) v = u(rng);
  return img;
}

template <typename T>
nn::Tensor<T> random_tensor(nn::Shape s, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  nn::Tensor<T> t(s);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(u(rng));
  return t;
}

/// Reduced widths that train in minutes on one core.
inline trainer::TrainConfig toy_config(int image_size = 64) {
  trainer::TrainConfig c;
  c.image_size = image_size;
  c.model.generator_width = 8;
  c.model.residual_blocks = 8;
  c.model.refine_widths = {8, 16, 32, 64, 64};
  c.model.discriminator_width = 8;
  c.vgg_width_divisor = 8;
  c.checkpoint_every = 0;
  return c;
}

/// Tiny widths for tests that only exercise plumbing.
inline trainer::TrainConfig tiny_config(int image_size = 32) {
  trainer::TrainConfig c = toy_config(image_size);
  c.model.generator_width = 4;
  c.model.residual_blocks = 1;
  c.model.refine_widths = {4, 4, 8, 8, 8};
  c.model.attention_reduction = 4;
  c.model.discriminator_width = 4;
  c.vgg_width_divisor = 16;
  c.batch_size = 2;
  return c;
}

struct ToyDataset {
  std::filesystem::path root;
  std::filesystem::path corpus;
  std::filesystem::path landmarks;
  std::filesystem::path dataset;
};

/// Synthetic corpus of `count` faces and the dataset built from it.
inline ToyDataset make_toy_dataset(const std::string& name, int count = 8, std::uint64_t seed = 0,
                                   double val_fraction = 0.0) {
  ToyDataset d;
  d.root = temp_dir(name);
  d.corpus = d.root / "corpus";
  d.landmarks = d.root / "landmarks";
  d.dataset = d.root / "dataset";
  dataprep::CorpusSpec spec;
  spec.count = count;
  spec.seed = seed;
  dataprep::write_synthetic_corpus(d.corpus, d.landmarks, spec);
  dataprep::BuildOptions opts;
  opts.seed = seed;
  opts.val_fraction = val_fraction;
  dataprep::build_dataset(d.corpus, d.landmarks, d.dataset, opts);
  return d;
}

}  // namespace faceerase::testing_support
