#include "faceerase/models/bundle.hpp"

#include <fstream>

#include "faceerase/nn/serialize.hpp"

namespace faceerase::models {

GeneratorSpec ModelConfig::edge_spec() const {
  GeneratorSpec s = GeneratorSpec::edge(generator_width);
  s.residual_blocks = residual_blocks;
  return s;
}

GeneratorSpec ModelConfig::pixel_clone_spec() const {
  GeneratorSpec s = GeneratorSpec::pixel_clone(generator_width);
  s.residual_blocks = residual_blocks;
  return s;
}

RefineSpec ModelConfig::refine_spec() const {
  RefineSpec s;
  s.widths = refine_widths;
  s.channel_attention = channel_attention;
  s.attention_reduction = attention_reduction;
  s.skip_connections = skip_connections;
  return s;
}

DiscriminatorSpec ModelConfig::edge_discriminator_spec() const {
  return DiscriminatorSpec::edge(discriminator_width);
}
DiscriminatorSpec ModelConfig::inpaint_discriminator_spec() const {
  return DiscriminatorSpec::inpaint(discriminator_width);
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"generator_width", c.generator_width},
       {"residual_blocks", c.residual_blocks},
       {"refine_widths", c.refine_widths},
       {"channel_attention", c.channel_attention},
       {"attention_reduction", c.attention_reduction},
       {"skip_connections", c.skip_connections},
       {"discriminator_width", c.discriminator_width}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  const ModelConfig d;
  c.generator_width = j.value("generator_width", d.generator_width);
  c.residual_blocks = j.value("residual_blocks", d.residual_blocks);
  c.refine_widths = j.value("refine_widths", d.refine_widths);
  c.channel_attention = j.value("channel_attention", d.channel_attention);
  c.attention_reduction = j.value("attention_reduction", d.attention_reduction);
  c.skip_connections = j.value("skip_connections", d.skip_connections);
  c.discriminator_width = j.value("discriminator_width", d.discriminator_width);
  if (c.refine_widths.size() != 5) throw CheckpointError("refine_widths must list five stage widths");
}

namespace {
nn::Rng stream(std::uint64_t seed, std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(salt)};
  return nn::Rng(seq);
}
}  // namespace

Networks::Networks(const ModelConfig& cfg, std::uint64_t seed) : config(cfg) {
  auto r1 = stream(seed, 1);
  auto r2 = stream(seed, 2);
  auto r3 = stream(seed, 3);
  auto r4 = stream(seed, 4);
  auto r5 = stream(seed, 5);
  edge = ResnetGenerator<float>(cfg.edge_spec(), r1);
  edge_d = PatchDiscriminator<float>(cfg.edge_discriminator_spec(), r2);
  pixel_clone = ResnetGenerator<float>(cfg.pixel_clone_spec(), r3);
  refine = RefineNet<float>(cfg.refine_spec(), r4);
  inpaint_d = PatchDiscriminator<float>(cfg.inpaint_discriminator_spec(), r5);
}

std::vector<std::pair<std::string, nn::ParamList<float>>> Networks::all_parameters() {
  return {{"edge_generator", edge.parameters()},
          {"edge_discriminator", edge_d.parameters()},
          {"pixel_clone", pixel_clone.parameters()},
          {"refine", refine.parameters()},
          {"inpaint_discriminator", inpaint_d.parameters()}};
}

void save_networks(const std::filesystem::path& dir, Networks& nets) {
  for (auto& [name, list] : nets.all_parameters()) nn::write_blob(dir / (name + ".fepb"), nn::snapshot(list));
}

void load_networks(const std::filesystem::path& dir, Networks& nets, const std::vector<std::string>& required) {
  for (auto& [name, list] : nets.all_parameters()) {
    const auto path = dir / (name + ".fepb");
    if (!std::filesystem::exists(path)) {
      if (std::find(required.begin(), required.end(), name) != required.end()) {
        throw CheckpointError("checkpoint " + dir.string() + " has no " + name + " weights");
      }
      continue;
    }
    try {
      nn::restore(list, nn::read_blob(path));
    } catch (const nn::FormatError& e) {
      throw CheckpointError(name + ": " + e.what());
    }
  }
}

ModelConfig read_model_config(const std::filesystem::path& checkpoint_dir) {
  std::ifstream in(checkpoint_dir / "manifest.json");
  if (!in) throw CheckpointError("no manifest.json in " + checkpoint_dir.string());
  try {
    nlohmann::json j;
    in >> j;
    return j.at("model").get<ModelConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("malformed checkpoint manifest: " + std::string(e.what()));
  }
}

}  // namespace faceerase::models
