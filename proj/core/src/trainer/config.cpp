#include "faceerase/trainer/config.hpp"

#include <fstream>

#include "faceerase/nn/serialize.hpp"

namespace faceerase::trainer {

using nlohmann::json;

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("invalid config: " + m); };
  if (image_size < 32 || image_size % 32 != 0) fail("image_size must be a positive multiple of 32");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(lr_generator > 0) || !(lr_discriminator > 0)) fail("learning rates must be positive");
  if (!(lr_discriminator < lr_generator)) fail("lr_discriminator must be below lr_generator");
  if (optimizer.beta1 < 0 || optimizer.beta1 >= 1 || optimizer.beta2 <= 0 || optimizer.beta2 >= 1) {
    fail("Adam betas must lie in [0, 1)");
  }
  if (phase1_steps < 0 || phase2_steps < 0) fail("step counts must be >= 0");
  if (checkpoint_every < 0) fail("checkpoint_every must be >= 0");
  if (keep_last < 1) fail("keep_last must be >= 1");
  const auto& e = loss_weights.edge;
  const auto& w = loss_weights.inpaint;
  for (double v : {e.adv, e.fm, w.adv, w.perc, w.l1, w.style, w.pc}) {
    if (!(v >= 0)) fail("loss weights must be >= 0");
  }
  if (!(canny.sigma > 0) || !(canny.low > 0 && canny.low < canny.high && canny.high <= 1)) {
    fail("canny needs sigma > 0 and 0 < low < high <= 1");
  }
  if (vgg_width_divisor < 1) fail("vgg_width_divisor must be >= 1");
  if (val_batch < 1) fail("val_batch must be >= 1");
  if (model.generator_width < 1 || model.discriminator_width < 1 || model.residual_blocks < 0) {
    fail("model widths must be positive");
  }
}

void to_json(json& j, const TrainConfig& c) {
  j = json{
      {"image_size", c.image_size},
      {"batch_size", c.batch_size},
      {"optimizer", {{"beta1", c.optimizer.beta1}, {"beta2", c.optimizer.beta2}, {"eps", c.optimizer.eps}}},
      {"lr_generator", c.lr_generator},
      {"lr_discriminator", c.lr_discriminator},
      {"phase1_steps", c.phase1_steps},
      {"phase2_steps", c.phase2_steps},
      {"seed", c.seed},
      {"loss_weights",
       {{"edge", {{"adv", c.loss_weights.edge.adv}, {"fm", c.loss_weights.edge.fm}}},
        {"inpaint",
         {{"adv", c.loss_weights.inpaint.adv},
          {"perc", c.loss_weights.inpaint.perc},
          {"l1", c.loss_weights.inpaint.l1},
          {"style", c.loss_weights.inpaint.style},
          {"pc", c.loss_weights.inpaint.pc}}}}},
      {"pc_hole_only", c.pc_hole_only},
      {"checkpoint_every", c.checkpoint_every},
      {"keep_last", c.keep_last},
      {"plateau", {{"window", c.plateau.window}, {"min_delta", c.plateau.min_delta}}},
      {"canny", {{"sigma", c.canny.sigma}, {"low", c.canny.low}, {"high", c.canny.high}}},
      {"model", c.model},
      {"vgg_width_divisor", c.vgg_width_divisor},
      {"vgg_weights", c.vgg_weights ? json(*c.vgg_weights) : json(nullptr)},
      {"val_batch", c.val_batch},
  };
}

namespace {

void reject_unknown(const json& given, const json& known, const std::string& prefix) {
  for (auto it = given.begin(); it != given.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!known.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
    if (it->is_object() && known[it.key()].is_object()) reject_unknown(*it, known[it.key()], key);
  }
}

}  // namespace

void from_json(const json& j, TrainConfig& c) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  json merged = TrainConfig{};
  reject_unknown(j, merged, "");
  merged.merge_patch(j);
  try {
    c.image_size = merged.at("image_size").get<int>();
    c.batch_size = merged.at("batch_size").get<int>();
    c.optimizer.beta1 = merged.at("optimizer").at("beta1").get<double>();
    c.optimizer.beta2 = merged.at("optimizer").at("beta2").get<double>();
    c.optimizer.eps = merged.at("optimizer").at("eps").get<double>();
    c.lr_generator = merged.at("lr_generator").get<double>();
    c.lr_discriminator = merged.at("lr_discriminator").get<double>();
    c.phase1_steps = merged.at("phase1_steps").get<std::int64_t>();
    c.phase2_steps = merged.at("phase2_steps").get<std::int64_t>();
    c.seed = merged.at("seed").get<std::uint64_t>();
    const json& lw = merged.at("loss_weights");
    c.loss_weights.edge.adv = lw.at("edge").at("adv").get<double>();
    c.loss_weights.edge.fm = lw.at("edge").at("fm").get<double>();
    c.loss_weights.inpaint.adv = lw.at("inpaint").at("adv").get<double>();
    c.loss_weights.inpaint.perc = lw.at("inpaint").at("perc").get<double>();
    c.loss_weights.inpaint.l1 = lw.at("inpaint").at("l1").get<double>();
    c.loss_weights.inpaint.style = lw.at("inpaint").at("style").get<double>();
    c.loss_weights.inpaint.pc = lw.at("inpaint").at("pc").get<double>();
    c.pc_hole_only = merged.at("pc_hole_only").get<bool>();
    c.checkpoint_every = merged.at("checkpoint_every").get<std::int64_t>();
    c.keep_last = merged.at("keep_last").get<int>();
    c.plateau.window = merged.at("plateau").at("window").get<std::int64_t>();
    c.plateau.min_delta = merged.at("plateau").at("min_delta").get<double>();
    c.canny.sigma = merged.at("canny").at("sigma").get<double>();
    c.canny.low = merged.at("canny").at("low").get<double>();
    c.canny.high = merged.at("canny").at("high").get<double>();
    c.model = merged.at("model").get<models::ModelConfig>();
    c.vgg_width_divisor = merged.at("vgg_width_divisor").get<int>();
    // merge_patch drops keys patched to null.
    const json vw = merged.contains("vgg_weights") ? merged["vgg_weights"] : json(nullptr);
    c.vgg_weights = vw.is_null() ? std::nullopt : std::optional<std::string>(vw.get<std::string>());
    c.val_batch = merged.at("val_batch").get<int>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config type error: ") + e.what());
  } catch (const models::CheckpointError& e) {
    throw ConfigError(e.what());
  }
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }
  TrainConfig c = j.get<TrainConfig>();
  c.validate();
  return c;
}

void apply_override(TrainConfig& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key=value: " + assignment);
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  json patch = value;
  std::string rest = key;
  std::vector<std::string> parts;
  for (std::size_t pos; (pos = rest.find('.')) != std::string::npos; rest = rest.substr(pos + 1)) {
    parts.push_back(rest.substr(0, pos));
  }
  parts.push_back(rest);
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = json{{*it, patch}};
  json current = c;
  reject_unknown(patch, current, "");
  current.merge_patch(patch);
  c = current.get<TrainConfig>();
}

std::string config_hash(const TrainConfig& c) {
  const std::string s = json(c).dump();
  return nn::sha256_hex(s.data(), s.size());
}

}  // namespace faceerase::trainer
