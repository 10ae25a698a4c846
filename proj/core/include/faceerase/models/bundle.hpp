#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "faceerase/models/networks.hpp"

namespace faceerase::models {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Architecture knobs shared by training and inference.
struct ModelConfig {
  int generator_width = 64;
  int residual_blocks = 8;
  std::vector<int> refine_widths{64, 128, 256, 512, 512};
  bool channel_attention = true;
  int attention_reduction = 16;
  bool skip_connections = true;
  int discriminator_width = 64;

  [[nodiscard]] GeneratorSpec edge_spec() const;
  [[nodiscard]] GeneratorSpec pixel_clone_spec() const;
  [[nodiscard]] RefineSpec refine_spec() const;
  [[nodiscard]] DiscriminatorSpec edge_discriminator_spec() const;
  [[nodiscard]] DiscriminatorSpec inpaint_discriminator_spec() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

/// The five networks of the system. Each one is initialized from its own
/// stream derived from `seed`, so building a subset never shifts the others.
struct Networks {
  Networks(const ModelConfig& config, std::uint64_t seed);

  ModelConfig config;
  ResnetGenerator<float> edge;
  PatchDiscriminator<float> edge_d;
  ResnetGenerator<float> pixel_clone;
  RefineNet<float> refine;
  PatchDiscriminator<float> inpaint_d;

  /// Blob file stem -> parameters, in a fixed order.
  std::vector<std::pair<std::string, nn::ParamList<float>>> all_parameters();
};

/// Writes one blob per network under dir.
void save_networks(const std::filesystem::path& dir, Networks& nets);
/// Loads the blobs present in dir; missing blobs are an error only when
/// listed in `required`. Shapes are validated against the architecture.
void load_networks(const std::filesystem::path& dir, Networks& nets, const std::vector<std::string>& required);

/// Reads the architecture recorded in a checkpoint manifest.
ModelConfig read_model_config(const std::filesystem::path& checkpoint_dir);

}  // namespace faceerase::models
