#include "faceerase/cli/cli.hpp"

#include <spdlog/sinks/basic_file_sink.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>

#include "faceerase/cli/selftest.hpp"
#include "faceerase/dataprep/dataprep.hpp"
#include "faceerase/dataprep/synthetic.hpp"
#include "faceerase/effects/effects.hpp"
#include "faceerase/imaging/io.hpp"
#include "faceerase/pipeline/erase.hpp"
#include "faceerase/trainer/trainer.hpp"

#ifndef FACEERASE_VERSION
#define FACEERASE_VERSION "unknown"
#endif

namespace faceerase::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Log records as one JSON object per line.
class JsonFormatter : public spdlog::formatter {
 public:
  void format(const spdlog::details::log_msg& msg, spdlog::memory_buf_t& dest) override {
    const auto t = std::chrono::duration_cast<std::chrono::milliseconds>(msg.time.time_since_epoch()).count();
    const json j{{"time_ms", t},
                 {"level", std::string(spdlog::level::to_string_view(msg.level).data(),
                                       spdlog::level::to_string_view(msg.level).size())},
                 {"message", std::string(msg.payload.data(), msg.payload.size())}};
    const std::string s = j.dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
    dest.append(s.data(), s.data() + s.size());
  }
  [[nodiscard]] std::unique_ptr<spdlog::formatter> clone() const override {
    return std::make_unique<JsonFormatter>();
  }
};

struct Globals {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string log_file;
  std::string run_dir;
};

trainer::TrainConfig effective_config(const Globals& g) {
  trainer::TrainConfig c = g.config.empty() ? trainer::TrainConfig{} : trainer::load_config(g.config);
  for (const auto& o : g.overrides) trainer::apply_override(c, o);
  if (g.seed) c.seed = *g.seed;
  c.validate();
  return c;
}

std::string checkpoint_or_env(const std::string& given) {
  if (!given.empty()) return given;
  if (const char* env = std::getenv(kCheckpointEnv); env != nullptr && *env != '\0') return env;
  throw UsageError(std::string("--ckpt is required (or set ") + kCheckpointEnv + ")");
}

std::string error_type(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e)) return "usage";
  if (dynamic_cast<const trainer::ConfigError*>(&e)) return "config";
  if (dynamic_cast<const models::CheckpointError*>(&e)) return "checkpoint";
  if (dynamic_cast<const losses::DivergenceError*>(&e)) return "divergence";
  if (dynamic_cast<const dataprep::DataError*>(&e)) return "data";
  if (dynamic_cast<const imaging::AlignmentError*>(&e)) return "alignment";
  if (dynamic_cast<const effects::PlacementError*>(&e)) return "placement";
  if (dynamic_cast<const effects::EffectError*>(&e)) return "effect";
  if (dynamic_cast<const imaging::ImageError*>(&e)) return "image";
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return "io";
  return "runtime";
}

void print_error(const std::string& type, const std::string& message, int code) {
  std::cerr << json{{"error", {{"type", type}, {"message", message}}}, {"exit_code", code}}.dump() << std::endl;
}

void setup_logging(const fs::path& log_file) {
  auto console = std::make_shared<spdlog::sinks::stderr_sink_mt>();
  console->set_pattern("[%H:%M:%S] %^%l%$ %v");
  std::vector<spdlog::sink_ptr> sinks{console};
  if (!log_file.empty()) {
    if (log_file.has_parent_path()) fs::create_directories(log_file.parent_path());
    auto file = std::make_shared<spdlog::sinks::basic_file_sink_mt>(log_file.string(), false);
    file->set_formatter(std::make_unique<JsonFormatter>());
    sinks.push_back(file);
  }
  auto logger = std::make_shared<spdlog::logger>("faceerase", sinks.begin(), sinks.end());
  logger->set_level(spdlog::level::info);
  spdlog::set_default_logger(logger);
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream(path) << j.dump(2) << '\n';
}

}  // namespace

int run(int argc, char** argv) { return run(std::vector<std::string>(argv, argv + argc)); }

int run(const std::vector<std::string>& args) {
  CLI::App app{"Facial parts removal and AR effects toolkit", "faceerase"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "JSON config file shared by all subcommands");
  app.add_option("--set", g.overrides, "Override a config key, e.g. --set batch_size=4");
  app.add_option("--seed", g.seed, "Seed for every random choice");
  app.add_option("--log-file", g.log_file, "JSON-lines log (default <run-dir>/log.jsonl)");
  app.add_option("--run-dir", g.run_dir, "Where run_manifest.json is written (default: the output directory)");

  // dataprep
  auto* dataprep_cmd = app.add_subcommand("dataprep", "Synthesize corpora and build training sets");
  dataprep_cmd->require_subcommand(1);
  auto* synth = dataprep_cmd->add_subcommand("synth", "Write a synthetic corpus with landmarks");
  std::string synth_out, synth_lm;
  int synth_count = 10, glasses_every = 0, hat_every = 0, occluded_every = 0;
  synth->add_option("--out", synth_out, "Corpus directory")->required();
  synth->add_option("--landmarks-out", synth_lm, "Landmark directory (default <out>/landmarks)");
  synth->add_option("--count", synth_count, "Number of faces")->check(CLI::PositiveNumber);
  synth->add_option("--glasses-every", glasses_every, "Flag every n-th face as wearing glasses");
  synth->add_option("--hat-every", hat_every, "Flag every n-th face as wearing a hat");
  synth->add_option("--occluded-every", occluded_every, "Flag every n-th face as forehead-occluded");

  auto* build = dataprep_cmd->add_subcommand("build", "Build blank faces, masks and the split manifest");
  std::string corpus_dir, landmarks_dir, build_out, ingest_name = "manifest.jsonl";
  double val_fraction = 0.1, glasses_p = 0.3;
  build->add_option("--corpus", corpus_dir, "Corpus directory")->required();
  build->add_option("--landmarks", landmarks_dir, "Landmark directory")->required();
  build->add_option("--manifest", ingest_name, "Ingest manifest name inside the corpus directory");
  build->add_option("--out", build_out, "Dataset output directory")->required();
  build->add_option("--val-fraction", val_fraction, "Validation share")->check(CLI::Range(0.0, 1.0));
  build->add_option("--glasses-p", glasses_p, "Glasses augmentation probability")->check(CLI::Range(0.0, 1.0));

  // train
  auto* train = app.add_subcommand("train", "Train the edge (phase 1) or inpaint (phase 2) networks");
  std::string phase_s, dataset_dir, train_out, resume, edge_ckpt;
  std::optional<std::int64_t> steps;
  train->add_option("phase", phase_s, "edge | inpaint")->required()->check(CLI::IsMember({"edge", "inpaint"}));
  train->add_option("--dataset", dataset_dir, "Built dataset directory")->required();
  train->add_option("--out", train_out, "Run directory")->required();
  train->add_option("--resume", resume, "Checkpoint directory to resume from");
  train->add_option("--edge", edge_ckpt, "Phase-1 checkpoint supplying the frozen edge network");
  train->add_option("--steps", steps, "Step budget (overrides the config)");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "PSNR and MAE of a checkpoint on a dataset split");
  std::string eval_ckpt, eval_val, eval_split = "val";
  evaluate->add_option("--ckpt", eval_ckpt, "Checkpoint directory");
  evaluate->add_option("--val", eval_val, "Dataset directory or its manifest.json")->required();
  evaluate->add_option("--split", eval_split, "train | val")->check(CLI::IsMember({"train", "val"}));

  // erase
  auto* erase_cmd = app.add_subcommand("erase", "Remove facial parts from a photograph");
  std::string erase_image, erase_lm, erase_parts = "eyebrows,eyes,nose,mouth", erase_ckpt, erase_out;
  std::string batch_manifest, batch_images, batch_landmarks;
  bool save_intermediates = false;
  erase_cmd->add_option("--image", erase_image, "Input image");
  erase_cmd->add_option("--landmarks", erase_lm, "106-point landmark JSON");
  erase_cmd->add_option("--parts", erase_parts, "Comma-separated subset of eyebrows,eyes,nose,mouth");
  erase_cmd->add_option("--ckpt", erase_ckpt, "Checkpoint directory");
  erase_cmd->add_option("--out", erase_out, "Output directory")->required();
  erase_cmd->add_flag("--save-intermediates", save_intermediates, "Also write aligned crop, mask, edges, flow");
  erase_cmd->add_option("--manifest", batch_manifest, "Ingest manifest for batch mode");
  erase_cmd->add_option("--image-dir", batch_images, "Batch mode: image directory (default: manifest's)");
  erase_cmd->add_option("--landmark-dir", batch_landmarks, "Batch mode: landmark directory");

  // effect
  auto* effect_cmd = app.add_subcommand("effect", "Apply an AR effect to a photograph");
  std::string effect_name_s, effect_image, effect_lm, effect_ckpt, effect_out, effect_spec;
  effect_cmd->add_option("--name", effect_name_s, "mono_eye | comic | small_face | toonized | eyebrowless")
      ->check(CLI::IsMember({"mono_eye", "comic", "small_face", "toonized", "eyebrowless"}));
  effect_cmd->add_option("--image", effect_image, "Input image")->required();
  effect_cmd->add_option("--landmarks", effect_lm, "106-point landmark JSON")->required();
  effect_cmd->add_option("--ckpt", effect_ckpt, "Checkpoint directory");
  effect_cmd->add_option("--out", effect_out, "Output PNG")->required();
  effect_cmd->add_option("--spec", effect_spec, "EffectSpec JSON overriding the defaults");

  app.add_subcommand("selftest", "Run the invariant checks");

  std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cout << app.help();
    print_error("usage", e.what(), kExitUsage);
    return kExitUsage;
  }

  const auto started = std::chrono::steady_clock::now();
  const std::time_t wall = std::time(nullptr);
  CLI::App* sub = app.get_subcommands().front();
  std::string command = sub->get_name();
  for (CLI::App* s2 : sub->get_subcommands()) command += " " + s2->get_name();
  if (sub == train) command += " " + phase_s;

  fs::path run_dir = g.run_dir;
  if (run_dir.empty()) {
    if (sub == dataprep_cmd) run_dir = synth->parsed() ? synth_out : build_out;
    if (sub == train) run_dir = train_out;
    if (sub == erase_cmd) run_dir = erase_out;
    if (sub == effect_cmd) run_dir = fs::path(effect_out).parent_path();
    if (run_dir.empty()) run_dir = ".";
  }
  setup_logging(g.log_file.empty() ? run_dir / "log.jsonl" : fs::path(g.log_file));

  json manifest{{"command", command}, {"argv", args}, {"code_version", FACEERASE_VERSION},
                {"started_at", static_cast<std::int64_t>(wall)}};
  json inputs = json::object();
  int code = kExitOk;
  try {
    if (sub == dataprep_cmd && synth->parsed()) {
      dataprep::CorpusSpec spec;
      spec.count = synth_count;
      spec.seed = g.seed.value_or(0);
      spec.glasses_every = glasses_every;
      spec.hat_every = hat_every;
      spec.occluded_every = occluded_every;
      const fs::path lm_dir = synth_lm.empty() ? fs::path(synth_out) / "landmarks" : fs::path(synth_lm);
      const auto records = dataprep::write_synthetic_corpus(synth_out, lm_dir, spec);
      manifest["seed"] = spec.seed;
      inputs = {{"out", synth_out}, {"landmarks_out", lm_dir.string()}, {"count", synth_count}};
      std::cout << json{{"records", records.size()}, {"corpus", synth_out}, {"landmarks", lm_dir.string()}}.dump()
                << std::endl;
    } else if (sub == dataprep_cmd) {
      dataprep::BuildOptions opts;
      const trainer::TrainConfig c = effective_config(g);
      opts.seed = c.seed;
      opts.val_fraction = val_fraction;
      opts.glasses_probability = glasses_p;
      opts.manifest_name = ingest_name;
      const auto m = dataprep::build_dataset(corpus_dir, landmarks_dir, build_out, opts);
      manifest["seed"] = opts.seed;
      inputs = {{"corpus", corpus_dir}, {"landmarks", landmarks_dir}, {"manifest", ingest_name},
                {"val_fraction", val_fraction}, {"glasses_probability", glasses_p}};
      std::cout << json{{"train", m.train.size()}, {"val", m.val.size()}, {"filtered", m.filtered},
                        {"skipped", m.skipped}}
                       .dump()
                << std::endl;
    } else if (sub == train) {
      const trainer::TrainConfig c = effective_config(g);
      const trainer::Phase phase = trainer::parse_phase(phase_s);
      spdlog::info("effective config {}", json(c).dump());
      manifest["seed"] = c.seed;
      manifest["config_hash"] = trainer::config_hash(c);
      manifest["config"] = c;
      inputs = {{"dataset", dataset_dir}, {"resume", resume}, {"edge", edge_ckpt}};
      const auto data = trainer::load_training_set(dataset_dir, trainer::Split::kTrain, c.image_size, c.canny);
      const auto val = trainer::load_training_set(dataset_dir, trainer::Split::kVal, c.image_size, c.canny);
      trainer::RunOptions o;
      o.out_dir = train_out;
      if (!resume.empty()) o.resume = fs::path(resume);
      if (!edge_ckpt.empty()) o.frozen_edge = fs::path(edge_ckpt);
      if (phase == trainer::Phase::kInpaint && edge_ckpt.empty() && resume.empty()) {
        throw UsageError("train inpaint needs --edge CKPT (or --resume)");
      }
      o.steps = steps;
      o.val = val.empty() ? nullptr : &val;
      const trainer::RunResult r =
          phase == trainer::Phase::kEdge ? trainer::train_phase1(data, c, o) : trainer::train_phase2(data, c, o);
      json summary{{"steps", r.session->steps_done()}, {"plateaued", r.plateaued},
                   {"edge_hash_before", r.edge_hash_before}, {"edge_hash_after", r.edge_hash_after}};
      if (!r.history.empty()) summary["last"] = r.history.back().to_json();
      manifest["result"] = summary;
      std::cout << summary.dump() << std::endl;
    } else if (sub == evaluate) {
      const std::string ckpt = checkpoint_or_env(eval_ckpt);
      fs::path dataset = eval_val;
      if (fs::is_regular_file(dataset)) dataset = dataset.parent_path();
      const pipeline::InpaintModel model = pipeline::load_model(ckpt);
      const auto set = trainer::load_training_set(
          dataset, eval_split == "train" ? trainer::Split::kTrain : trainer::Split::kVal, model.image_size,
          model.canny);
      if (set.empty()) throw dataprep::DataError("the " + eval_split + " split of " + dataset.string() + " is empty");
      const trainer::InpaintMetrics m = trainer::evaluate(*model.networks, set);
      inputs = {{"ckpt", ckpt}, {"val", eval_val}, {"split", eval_split}};
      manifest["result"] = m.to_json();
      std::cout << m.to_json().dump() << std::endl;
    } else if (sub == erase_cmd) {
      const std::string ckpt = checkpoint_or_env(erase_ckpt);
      const dataprep::PartSet parts = dataprep::parse_parts(erase_parts);
      const pipeline::InpaintModel model = pipeline::load_model(ckpt);
      inputs = {{"ckpt", ckpt}, {"parts", erase_parts}};
      if (!batch_manifest.empty()) {
        const fs::path images = batch_images.empty() ? fs::path(batch_manifest).parent_path() : fs::path(batch_images);
        if (batch_landmarks.empty()) throw UsageError("batch erase needs --landmark-dir");
        const auto report =
            pipeline::erase_batch(batch_manifest, images, batch_landmarks, parts, model, erase_out, save_intermediates);
        inputs["manifest"] = batch_manifest;
        manifest["result"] = report.to_json();
        std::cout << report.to_json().dump() << std::endl;
        if (report.succeeded.empty() && !report.failed.empty()) code = kExitFailure;
      } else {
        if (erase_image.empty() || erase_lm.empty()) throw UsageError("erase needs --image and --landmarks");
        const auto img = imaging::read_rgb(erase_image);
        const auto lm = imaging::read_landmarks(erase_lm);
        const pipeline::EraseResult r = pipeline::erase(img, lm, parts, model);
        const std::string stem = fs::path(erase_image).stem().string();
        const fs::path out = fs::path(erase_out) / (stem + ".png");
        imaging::write_rgb(out, r.blank_full_frame);
        imaging::write_rgb(fs::path(erase_out) / (stem + "_grid.png"), pipeline::intermediate_grid(r));
        if (save_intermediates) {
          const fs::path dir = fs::path(erase_out) / stem;
          imaging::write_rgb(dir / "aligned_input.png", r.aligned_input);
          imaging::write_rgb(dir / "aligned_blank.png", r.aligned_blank);
          imaging::write_mask(dir / "mask.png", r.mask);
          imaging::write_edges(dir / "edges.png", r.edge_completed);
          imaging::write_rgb(dir / "flow.png", pipeline::flow_to_color(r.flow));
          imaging::write_rgb(dir / "coarse.png", r.coarse);
        }
        inputs["image"] = erase_image;
        inputs["landmarks"] = erase_lm;
        std::cout << json{{"output", out.string()}}.dump() << std::endl;
      }
    } else if (sub == effect_cmd) {
      const std::string ckpt = checkpoint_or_env(effect_ckpt);
      effects::EffectSpec spec;
      if (!effect_spec.empty()) {
        std::ifstream in(effect_spec);
        if (!in) throw effects::EffectError("cannot open effect spec " + effect_spec);
        json j = json::parse(in, nullptr, false);
        if (j.is_discarded()) throw effects::EffectError("malformed effect spec " + effect_spec);
        if (!effect_name_s.empty() && j.is_object() && !j.contains("name")) j["name"] = effect_name_s;
        spec = j.get<effects::EffectSpec>();
      } else if (!effect_name_s.empty()) {
        spec = effects::default_spec(effects::parse_effect(effect_name_s));
      } else {
        throw UsageError("effect needs --name or --spec");
      }
      const pipeline::InpaintModel model = pipeline::load_model(ckpt);
      const auto img = imaging::read_rgb(effect_image);
      const auto lm = imaging::read_landmarks(effect_lm);
      const pipeline::EraseResult blank = pipeline::erase(
          img, lm, {dataprep::kAllFaceParts, dataprep::kAllFaceParts + std::size(dataprep::kAllFaceParts)}, model);
      const effects::PartExtraction parts = effects::extract_parts(img, lm);
      const imaging::ImageRGB out = effects::apply_effect(blank.blank_full_frame, parts, lm, spec);
      imaging::write_rgb(effect_out, out);
      inputs = {{"ckpt", ckpt}, {"image", effect_image}, {"landmarks", effect_lm}, {"spec", json(spec)}};
      std::cout << json{{"output", effect_out}, {"effect", effects::effect_name(spec.effect)}}.dump() << std::endl;
    } else {
      const auto results = run_selftest(static_cast<unsigned>(g.seed.value_or(0)));
      json table = json::array();
      for (const auto& r : results) {
        std::cout << fmt::format("{:<32} {}  {}\n", r.name, r.passed ? "PASS" : "FAIL", r.detail);
        table.push_back({{"name", r.name}, {"passed", r.passed}, {"detail", r.detail}});
        if (!r.passed) code = kExitFailure;
      }
      manifest["result"] = table;
    }
  } catch (const UsageError& e) {
    std::cout << sub->help();
    print_error("usage", e.what(), kExitUsage);
    code = kExitUsage;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    print_error(error_type(e), e.what(), kExitFailure);
    code = kExitFailure;
  }
  manifest["inputs"] = inputs;
  manifest["exit_code"] = code;
  manifest["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  try {
    write_json(run_dir / "run_manifest.json", manifest);
  } catch (const std::exception& e) {
    spdlog::warn("could not write run manifest: {}", e.what());
  }
  spdlog::default_logger()->flush();
  return code;
}

}  // namespace faceerase::cli
