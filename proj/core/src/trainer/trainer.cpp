#include "faceerase/trainer/trainer.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "faceerase/models/forward.hpp"
#include "faceerase/nn/serialize.hpp"

namespace faceerase::trainer {

namespace fs = std::filesystem;
namespace ops = nn::ops;
using nlohmann::json;
using nn::Var;

models::ModelConfig read_model_config_or_default(const fs::path& dir);

std::string phase_name(Phase p) { return p == Phase::kEdge ? "edge" : "inpaint"; }

Phase parse_phase(const std::string& name) {
  if (name == "edge") return Phase::kEdge;
  if (name == "inpaint") return Phase::kInpaint;
  throw ConfigError("unknown phase '" + name + "' (expected edge or inpaint)");
}

json StepRecord::to_json() const {
  json j{{"step", step}, {"phase", phase_name(phase)}};
  for (const auto& [k, v] : losses) j[k] = v;
  for (const auto& [k, v] : metrics) j[k] = v;
  return j;
}

namespace {

nn::AdamOptions adam_options(const TrainConfig& c, double lr) {
  return {lr, c.optimizer.beta1, c.optimizer.beta2, c.optimizer.eps};
}

nn::ParamList<float> concat(const std::string& pa, nn::ParamList<float> a, const std::string& pb,
                            const nn::ParamList<float>& b) {
  for (auto& p : a.params) p.name = pa + "." + p.name;
  for (auto& q : a.buffers) q.name = pa + "." + q.name;
  for (auto p : b.params) a.params.push_back({pb + "." + p.name, p.var});
  for (auto q : b.buffers) a.buffers.push_back({pb + "." + q.name, q.data});
  return a;
}

double scalar(const Var<float>& v) { return static_cast<double>(v.value()[0]); }

void save_moments(const fs::path& path, nn::Adam<float>& opt) {
  std::vector<std::pair<std::string, nn::Tensor<float>>> blobs;
  const auto& params = opt.params().params;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const nn::Shape s = params[k].var->shape();
    blobs.emplace_back(params[k].name + ".m", nn::Tensor<float>(s, opt.first_moments()[k]));
    blobs.emplace_back(params[k].name + ".v", nn::Tensor<float>(s, opt.second_moments()[k]));
  }
  nn::write_blob(path, blobs);
}

void load_moments(const fs::path& path, nn::Adam<float>& opt) {
  const nn::NamedTensors blob = nn::read_blob(path);
  const auto& params = opt.params().params;
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (auto [suffix, store] : {std::pair{".m", &opt.first_moments()[k]}, std::pair{".v", &opt.second_moments()[k]}}) {
      const auto it = blob.find(params[k].name + suffix);
      if (it == blob.end() || it->second.size() != store->size()) {
        throw models::CheckpointError("optimizer state missing or mismatched for " + params[k].name);
      }
      store->assign(it->second.span().begin(), it->second.span().end());
    }
  }
}

std::string checkpoint_name(Phase phase, std::int64_t step) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_step_%08lld", phase_name(phase).c_str(), static_cast<long long>(step));
  return buf;
}

void prune_checkpoints(const fs::path& root, Phase phase, int keep) {
  const std::string prefix = phase_name(phase) + "_step_";
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory() && e.path().filename().string().rfind(prefix, 0) == 0) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  for (std::size_t i = 0; i + static_cast<std::size_t>(keep) < dirs.size(); ++i) fs::remove_all(dirs[i]);
}

}  // namespace

Session::Session(const TrainConfig& config, Phase phase)
    : config_(config), phase_(phase), nets_(config.model, config.seed), sampler_(config.seed) {
  config_.validate();
  if (phase == Phase::kEdge) {
    opt_g_ = nn::Adam<float>(nets_.edge.parameters(), adam_options(config_, config_.lr_generator));
    opt_d_ = nn::Adam<float>(nets_.edge_d.parameters(), adam_options(config_, config_.lr_discriminator));
  } else {
    opt_g_ = nn::Adam<float>(concat("pixel_clone", nets_.pixel_clone.parameters(), "refine", nets_.refine.parameters()),
                             adam_options(config_, config_.lr_generator));
    opt_d_ = nn::Adam<float>(nets_.inpaint_d.parameters(), adam_options(config_, config_.lr_discriminator));
    nets_.edge.parameters().set_requires_grad(false);
    losses::VggOptions vo;
    vo.width_divisor = config_.vgg_width_divisor;
    if (config_.vgg_weights) vo.weights = fs::path(*config_.vgg_weights);
    vgg_ = std::make_unique<losses::VggExtractor<float>>(vo);
  }
}

void Session::load_frozen_edge(const fs::path& checkpoint_dir) {
  if (phase_ != Phase::kInpaint) throw ConfigError("only the inpaint phase consumes a frozen edge network");
  if (read_model_config_or_default(checkpoint_dir) != config_.model) {
    throw models::CheckpointError("edge checkpoint architecture differs from the configured model");
  }
  const auto path = checkpoint_dir / "edge_generator.fepb";
  if (!fs::exists(path)) throw models::CheckpointError("no edge_generator.fepb in " + checkpoint_dir.string());
  nn::ParamList<float> list = nets_.edge.parameters();
  try {
    nn::restore(list, nn::read_blob(path));
  } catch (const nn::FormatError& e) {
    throw models::CheckpointError(std::string("edge generator: ") + e.what());
  }
  list.set_requires_grad(false);
}

std::string Session::edge_hash() { return nn::hash_parameters(nets_.edge.parameters()); }

StepRecord Session::step(const TrainingSet& data) {
  StepRecord r = phase_ == Phase::kEdge ? edge_step(data) : inpaint_step(data);
  ++step_;
  r.step = step_;
  return r;
}

StepRecord Session::edge_step(const TrainingSet& data) {
  const Batch b = sample_batch(data, config_.batch_size, sampler_);
  const models::MaskedInputs in = models::mask_inputs(b.image, b.gray, b.edges, b.mask);
  const Var<float> gray_gt(b.gray);
  const Var<float> edges_gt(b.edges);
  auto& g = nets_.edge;
  auto& d = nets_.edge_d;
  const auto& w = config_.loss_weights.edge;

  const Var<float> fake = models::edge_generator_forward(g, in.gray, in.edges, in.mask);

  d.power_iterate(1);
  opt_d_.zero_grad();
  const auto real_d = models::discriminator_forward(d, edges_gt, gray_gt);
  const auto fake_d = models::discriminator_forward(d, fake.detach(), gray_gt);
  const Var<float> loss_d = losses::adversarial_loss(real_d.scores, fake_d.scores, losses::Side::kDiscriminator);
  losses::check_finite({{"d", scalar(loss_d)}}, "edge discriminator");
  nn::backward(loss_d);
  opt_d_.step();

  nn::ParamList<float> dparams = d.parameters();
  dparams.set_requires_grad(false);
  opt_g_.zero_grad();
  const auto fake_g = models::discriminator_forward(d, fake, gray_gt);
  std::vector<Var<float>> real_features;
  {
    nn::NoGradGuard ng;
    real_features = models::discriminator_forward(d, edges_gt, gray_gt).features;
  }
  const Var<float> adv = losses::adversarial_loss(Var<float>(), fake_g.scores, losses::Side::kGenerator);
  const Var<float> fm = losses::feature_matching_loss(fake_g.features, real_features);
  const Var<float> total =
      ops::add(ops::scale(adv, static_cast<float>(w.adv)), ops::scale(fm, static_cast<float>(w.fm)));
  StepRecord r;
  r.phase = Phase::kEdge;
  r.losses = {{"d", scalar(loss_d)}, {"g_adv", scalar(adv)}, {"g_fm", scalar(fm)}, {"g_total", scalar(total)}};
  try {
    losses::check_finite({{"g_adv", scalar(adv)}, {"g_fm", scalar(fm)}}, "edge generator");
  } catch (const losses::DivergenceError& e) {
    std::string ids;
    for (int i : b.image_index) ids += " " + data.image_ids[static_cast<std::size_t>(i)];
    throw losses::DivergenceError(std::string(e.what()) + " at step " + std::to_string(step_ + 1) +
                                  "; batch images:" + ids + "; losses " + r.to_json().dump());
  }
  nn::backward(total);
  opt_g_.step();
  dparams.set_requires_grad(true);
  return r;
}

StepRecord Session::inpaint_step(const TrainingSet& data) {
  const Batch b = sample_batch(data, config_.batch_size, sampler_);
  const models::MaskedInputs in = models::mask_inputs(b.image, b.gray, b.edges, b.mask);
  const Var<float> image_gt(b.image);
  auto& d = nets_.inpaint_d;
  const auto& w = config_.loss_weights.inpaint;

  const models::InpaintOutputs out = models::inpaint_forward(nets_, in);

  d.power_iterate(1);
  opt_d_.zero_grad();
  const auto real_d = models::discriminator_forward(d, image_gt, out.edges);
  const auto fake_d = models::discriminator_forward(d, out.composite.detach(), out.edges);
  const Var<float> loss_d = losses::adversarial_loss(real_d.scores, fake_d.scores, losses::Side::kDiscriminator);
  losses::check_finite({{"d", scalar(loss_d)}}, "inpaint discriminator");
  nn::backward(loss_d);
  opt_d_.step();

  nn::ParamList<float> dparams = d.parameters();
  dparams.set_requires_grad(false);
  opt_g_.zero_grad();
  const auto fake_g = models::discriminator_forward(d, out.composite, out.edges);
  std::vector<Var<float>> real_features;
  {
    nn::NoGradGuard ng;
    real_features = vgg_->features(image_gt);
  }
  const std::vector<Var<float>> fake_features = vgg_->features(out.composite);
  losses::InpaintComponents<Var<float>> c{
      losses::adversarial_loss(Var<float>(), fake_g.scores, losses::Side::kGenerator),
      losses::perceptual_loss(fake_features, real_features),
      losses::l1_loss(out.composite, image_gt),
      losses::style_loss(fake_features, real_features),
      losses::pixel_clone_loss(out.warped, image_gt, config_.pc_hole_only ? &in.mask : nullptr)};
  StepRecord r;
  r.phase = Phase::kInpaint;
  r.losses = {{"d", scalar(loss_d)},     {"g_adv", scalar(c.adv)}, {"perc", scalar(c.perc)},
              {"l1", scalar(c.l1)},      {"style", scalar(c.style)}, {"pc", scalar(c.pc)}};
  Var<float> total;
  try {
    total = losses::total_inpaint_loss(c, w);
  } catch (const losses::DivergenceError& e) {
    std::string ids;
    for (int i : b.image_index) ids += " " + data.image_ids[static_cast<std::size_t>(i)];
    throw losses::DivergenceError(std::string(e.what()) + " at step " + std::to_string(step_ + 1) +
                                  "; batch images:" + ids + "; losses " + r.to_json().dump());
  }
  r.losses["g_total"] = scalar(total);
  nn::backward(total);
  opt_g_.step();
  dparams.set_requires_grad(true);
  return r;
}

void Session::save_checkpoint(const fs::path& dir, const std::map<std::string, double>& metrics) {
  const fs::path tmp = dir.string() + ".partial";
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  models::save_networks(tmp, nets_);
  save_moments(tmp / "optim_g.fepb", opt_g_);
  save_moments(tmp / "optim_d.fepb", opt_d_);
  std::ostringstream rng;
  rng << sampler_;
  json m{{"format", "faceerase-checkpoint"},
         {"version", 1},
         {"phase", phase_name(phase_)},
         {"step", step_},
         {"seed", config_.seed},
         {"model", config_.model},
         {"config", config_},
         {"config_hash", config_hash(config_)},
         {"sampler_state", rng.str()},
         {"optimizer_steps", {{"generator", opt_g_.steps()}, {"discriminator", opt_d_.steps()}}},
         {"edge_hash", edge_hash()},
         {"metrics", metrics}};
  std::ofstream(tmp / "manifest.json") << m.dump(2) << '\n';
  fs::remove_all(dir);
  fs::rename(tmp, dir);
}

void Session::load_checkpoint(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw models::CheckpointError("no manifest.json in " + dir.string());
  json m;
  try {
    in >> m;
  } catch (const json::exception& e) {
    throw models::CheckpointError("malformed checkpoint manifest: " + std::string(e.what()));
  }
  if (m.value("phase", "") != phase_name(phase_)) {
    throw models::CheckpointError("checkpoint phase '" + m.value("phase", "") + "' does not match '" +
                                  phase_name(phase_) + "'");
  }
  if (m.at("model").get<models::ModelConfig>() != config_.model) {
    throw models::CheckpointError("checkpoint architecture differs from the configured model");
  }
  if (m.value("config_hash", "") != config_hash(config_)) {
    spdlog::warn("resuming {} with a different config (hash {} vs {})", dir.string(), m.value("config_hash", ""),
                 config_hash(config_));
  }
  models::load_networks(dir, nets_, {"edge_generator"});
  load_moments(dir / "optim_g.fepb", opt_g_);
  load_moments(dir / "optim_d.fepb", opt_d_);
  opt_g_.set_steps(m.at("optimizer_steps").at("generator").get<std::int64_t>());
  opt_d_.set_steps(m.at("optimizer_steps").at("discriminator").get<std::int64_t>());
  std::istringstream rng(m.at("sampler_state").get<std::string>());
  rng >> sampler_;
  step_ = m.at("step").get<std::int64_t>();
  if (phase_ == Phase::kInpaint) nets_.edge.parameters().set_requires_grad(false);
}

bool PlateauDetector::update(std::int64_t step, double value) {
  if (value > best_ + config_.min_delta || best_ == -std::numeric_limits<double>::infinity()) {
    best_ = std::max(best_, value);
    best_step_ = step;
    return false;
  }
  best_ = std::max(best_, value);
  return step - best_step_ >= config_.window;
}

namespace {

std::map<std::string, double> validation_metrics(Session& s, const RunOptions& options) {
  if (options.val == nullptr || options.val->empty()) return {};
  const auto pairs = fixed_pairs(*options.val, s.config().seed + 1);
  if (s.phase() == Phase::kEdge) {
    const EdgeMetrics e = evaluate_edges(s.networks(), *options.val, s.config().val_batch, pairs);
    return {{"val_f1", e.f1}, {"val_precision", e.precision}, {"val_recall", e.recall}};
  }
  const InpaintMetrics m = evaluate(s.networks(), *options.val, s.config().val_batch, pairs);
  return {{"psnr", m.psnr}, {"mae", m.mae}};
}

RunResult run(const TrainingSet& data, const TrainConfig& config, const RunOptions& options, Phase phase) {
  if (data.empty()) throw std::invalid_argument("training set is empty");
  RunResult result;
  result.session = std::make_unique<Session>(config, phase);
  Session& s = *result.session;
  if (phase == Phase::kInpaint) {
    if (options.frozen_edge) {
      s.load_frozen_edge(*options.frozen_edge);
    } else if (!options.resume) {
      spdlog::warn("inpaint phase started without a trained edge network");
    }
  }
  if (options.resume) s.load_checkpoint(*options.resume);
  result.edge_hash_before = s.edge_hash();

  const std::int64_t budget = options.steps.value_or(phase == Phase::kEdge ? config.phase1_steps : config.phase2_steps);
  std::ofstream metrics;
  fs::path ckpt_root;
  if (!options.out_dir.empty()) {
    fs::create_directories(options.out_dir);
    ckpt_root = options.out_dir / "checkpoints";
    fs::create_directories(ckpt_root);
    metrics.open(options.out_dir / "metrics.jsonl", options.resume ? std::ios::app : std::ios::trunc);
  }
  PlateauDetector plateau(config.plateau);
  double best = -std::numeric_limits<double>::infinity();
  const auto t0 = std::chrono::steady_clock::now();
  const std::int64_t report_every = std::max<std::int64_t>(1, budget / 20);
  while (s.steps_done() < budget) {
    StepRecord r = s.step(data);
    const bool at_checkpoint = config.checkpoint_every > 0 && r.step % config.checkpoint_every == 0;
    if (at_checkpoint || r.step == budget) r.metrics = validation_metrics(s, options);
    if (metrics.is_open()) metrics << r.to_json().dump() << '\n' << std::flush;
    if (!ckpt_root.empty() && (at_checkpoint || r.step == budget)) {
      s.save_checkpoint(ckpt_root / checkpoint_name(phase, r.step), r.metrics);
      prune_checkpoints(ckpt_root, phase, config.keep_last);
      const char* key = phase == Phase::kEdge ? "val_f1" : "psnr";
      if (auto it = r.metrics.find(key); it != r.metrics.end() && it->second > best) {
        best = it->second;
        s.save_checkpoint(ckpt_root / (phase_name(phase) + "_best"), r.metrics);
      }
    }
    if (options.log_progress && (r.step % report_every == 0 || r.step == budget)) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      spdlog::info("{} step {}/{} {} ({:.1f}s)", phase_name(phase), r.step, budget, r.to_json().dump(), secs);
    }
    const bool stop = !r.metrics.empty() &&
                      plateau.update(r.step, r.metrics.count("val_f1") ? r.metrics["val_f1"] : r.metrics["psnr"]);
    result.history.push_back(std::move(r));
    if (stop) {
      spdlog::info("{} phase plateaued at step {}", phase_name(phase), s.steps_done());
      result.plateaued = true;
      if (!ckpt_root.empty()) s.save_checkpoint(ckpt_root / checkpoint_name(phase, s.steps_done()));
      break;
    }
  }
  result.edge_hash_after = s.edge_hash();
  if (phase == Phase::kInpaint && result.edge_hash_after != result.edge_hash_before) {
    throw std::logic_error("edge network weights changed during the inpaint phase");
  }
  return result;
}

}  // namespace

models::ModelConfig read_model_config_or_default(const fs::path& dir) {
  if (!fs::exists(dir / "manifest.json")) {
    throw models::CheckpointError("no manifest.json in " + dir.string());
  }
  return models::read_model_config(dir);
}

RunResult train_phase1(const TrainingSet& data, const TrainConfig& config, const RunOptions& options) {
  return run(data, config, options, Phase::kEdge);
}

RunResult train_phase2(const TrainingSet& data, const TrainConfig& config, const RunOptions& options) {
  return run(data, config, options, Phase::kInpaint);
}

double psnr(double mse) {
  if (mse <= 0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

MeanSe mean_and_se(const std::vector<double>& values) {
  if (values.empty()) return {};
  double mean = 0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  return {mean, sd / std::sqrt(static_cast<double>(values.size()))};
}

json InpaintMetrics::to_json() const {
  return {{"psnr", psnr},         {"psnr_se", psnr_se},           {"mae", mae},     {"mae_se", mae_se},
          {"hole_l1", hole_l1}, {"flow_variance", flow_variance}, {"count", count}};
}

namespace {

template <typename F>
void for_batches(const TrainingSet& set, int batch_size, const std::vector<std::pair<int, int>>& pairs, F&& f) {
  for (std::size_t start = 0; start < pairs.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(pairs.size(), start + static_cast<std::size_t>(batch_size));
    const std::vector<std::pair<int, int>> chunk(pairs.begin() + static_cast<std::ptrdiff_t>(start),
                                                 pairs.begin() + static_cast<std::ptrdiff_t>(end));
    f(make_batch(set, chunk));
  }
}

}  // namespace

InpaintMetrics evaluate(const models::Networks& nets, const TrainingSet& set, int batch_size,
                        std::optional<std::vector<std::pair<int, int>>> pairs) {
  if (set.empty()) throw std::invalid_argument("evaluate: empty validation set");
  if (!pairs) pairs = fixed_pairs(set, 0);
  nn::NoGradGuard ng;
  std::vector<double> psnrs, maes, holes, flows;
  for_batches(set, batch_size, *pairs, [&](const Batch& b) {
    const auto in = models::mask_inputs(b.image, b.gray, b.edges, b.mask);
    const auto out = models::inpaint_forward(nets, in);
    const nn::Shape s = b.image.shape();
    const std::size_t hw = s.plane();
    for (int n = 0; n < s.n; ++n) {
      double se = 0, ae = 0, hole_ae = 0, hole_px = 0;
      const float* m = b.mask.plane(n, 0);
      for (int c = 0; c < 3; ++c) {
        const float* p = out.composite.value().plane(n, c);
        const float* t = b.image.plane(n, c);
        for (std::size_t i = 0; i < hw; ++i) {
          // Outputs are clamped to the displayable range before scoring.
          const double d = std::clamp(static_cast<double>(p[i]), 0.0, 1.0) - t[i];
          se += d * d;
          ae += std::abs(d);
          if (m[i] > 0.5f) {
            hole_ae += std::abs(d);
            hole_px += 1;
          }
        }
      }
      const double count = 3.0 * static_cast<double>(hw);
      psnrs.push_back(psnr(se / count));
      maes.push_back(ae / count);
      holes.push_back(hole_px > 0 ? hole_ae / hole_px : 0.0);
      double var = 0;
      for (int c = 0; c < 2; ++c) {
        const float* f = out.flow.value().plane(n, c);
        double mean = 0, sq = 0;
        for (std::size_t i = 0; i < hw; ++i) mean += f[i];
        mean /= static_cast<double>(hw);
        for (std::size_t i = 0; i < hw; ++i) sq += (f[i] - mean) * (f[i] - mean);
        var += sq / static_cast<double>(hw);
      }
      flows.push_back(var / 2);
    }
  });
  InpaintMetrics r;
  const MeanSe p = mean_and_se(psnrs);
  const MeanSe a = mean_and_se(maes);
  r.psnr = p.mean;
  r.psnr_se = p.se;
  r.mae = a.mean;
  r.mae_se = a.se;
  r.hole_l1 = mean_and_se(holes).mean;
  r.flow_variance = mean_and_se(flows).mean;
  r.count = psnrs.size();
  return r;
}

EdgeMetrics evaluate_edges(const models::Networks& nets, const TrainingSet& set, int batch_size,
                           std::optional<std::vector<std::pair<int, int>>> pairs) {
  if (set.empty()) throw std::invalid_argument("evaluate_edges: empty set");
  if (!pairs) pairs = fixed_pairs(set, 0);
  nn::NoGradGuard ng;
  double tp = 0, fp = 0, fn = 0;
  for_batches(set, batch_size, *pairs, [&](const Batch& b) {
    const auto in = models::mask_inputs(b.image, b.gray, b.edges, b.mask);
    const Var<float> e = models::edge_generator_forward(nets.edge, in.gray, in.edges, in.mask);
    const float* pred = e.value().data();
    const float* truth = b.edges.data();
    const float* m = b.mask.data();
    for (std::size_t i = 0; i < b.mask.size(); ++i) {
      if (m[i] < 0.5f) continue;
      const bool p = pred[i] > 0.5f;
      const bool t = truth[i] > 0.5f;
      tp += p && t;
      fp += p && !t;
      fn += !p && t;
    }
  });
  EdgeMetrics r;
  r.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  r.recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  r.f1 = r.precision + r.recall > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

}  // namespace faceerase::trainer
