#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>

#include "faceerase/imaging/canny.hpp"
#include "faceerase/losses/losses.hpp"
#include "faceerase/models/bundle.hpp"

namespace faceerase::trainer {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct OptimizerConfig {
  double beta1 = 0.0;
  double beta2 = 0.9;
  double eps = 1e-8;
};

struct PlateauConfig {
  std::int64_t window = 50000;  // steps without improvement before stopping
  double min_delta = 1e-3;
};

struct TrainConfig {
  int image_size = 256;
  int batch_size = 8;
  OptimizerConfig optimizer;
  double lr_generator = 1e-4;
  double lr_discriminator = 1e-5;
  std::int64_t phase1_steps = 1000000;
  std::int64_t phase2_steps = 1000000;
  std::uint64_t seed = 0;
  losses::LossWeights loss_weights;
  /// Restrict the pixel-clone loss to hole pixels.
  bool pc_hole_only = false;
  std::int64_t checkpoint_every = 10000;
  int keep_last = 3;
  PlateauConfig plateau;
  imaging::CannyParams canny;
  models::ModelConfig model;
  int vgg_width_divisor = 1;
  std::optional<std::string> vgg_weights;
  int val_batch = 8;

  /// Throws ConfigError on any violated invariant.
  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, TrainConfig& c);

TrainConfig load_config(const std::filesystem::path& path);
/// Applies dotted-key overrides such as "loss_weights.inpaint.pc=0.5".
void apply_override(TrainConfig& c, const std::string& assignment);

/// SHA-256 of the canonical JSON form.
std::string config_hash(const TrainConfig& c);

}  // namespace faceerase::trainer
