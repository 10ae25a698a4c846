#include <gtest/gtest.h>

#include <fstream>

#include "faceerase/cli/cli.hpp"
#include "faceerase/dataprep/synthetic.hpp"
#include "faceerase/imaging/io.hpp"
#include "faceerase/pipeline/erase.hpp"
#include "faceerase/trainer/trainer.hpp"
#include "support.hpp"

using namespace faceerase;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "faceerase");
  testing::internal::CaptureStdout();
  testing::internal::CaptureStderr();
  const int code = cli::run(args);
  std::string out = testing::internal::GetCapturedStdout();
  std::string err = testing::internal::GetCapturedStderr();
  return {code, out, err};
}

// Last line of the stream that parses as a JSON object.
nlohmann::json last_json(const std::string& text) {
  nlohmann::json found;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (!j.is_discarded() && j.is_object()) found = j;
  }
  return found;
}

}  // namespace

TEST(Cli, SelftestPasses) {
  const auto dir = testing_support::temp_dir("cli_selftest");
  const auto r = invoke({"--run-dir", dir.string(), "selftest"});
  EXPECT_EQ(r.code, cli::kExitOk) << r.out << r.err;
  EXPECT_TRUE(fs::exists(dir / "run_manifest.json"));
  EXPECT_TRUE(fs::exists(dir / "log.jsonl"));
}

TEST(Cli, MissingRequiredFlagIsUsageError) {
  const auto dir = testing_support::temp_dir("cli_usage");
  const auto r = invoke({"--run-dir", dir.string(), "erase", "--image", "x.png"});
  EXPECT_EQ(r.code, cli::kExitUsage);
  const auto j = last_json(r.err);
  ASSERT_TRUE(j.contains("error")) << r.err;
  EXPECT_EQ(j.at("exit_code"), cli::kExitUsage);
}

TEST(Cli, UnknownSubcommandAndBadPartsAreUsageErrors) {
  const auto dir = testing_support::temp_dir("cli_unknown");
  EXPECT_EQ(invoke({"--run-dir", dir.string(), "sparkle"}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"--run-dir", dir.string(), "effect", "--name", "nope", "--image", "a", "--landmarks", "b",
                    "--out", "c"})
                .code,
            cli::kExitUsage);
}

TEST(Cli, MissingInputIsRuntimeError) {
  const auto dir = testing_support::temp_dir("cli_runtime");
  const auto r = invoke({"--run-dir", dir.string(), "evaluate", "--ckpt", (dir / "none").string(), "--val",
                         (dir / "none").string()});
  EXPECT_EQ(r.code, cli::kExitFailure);
  const auto j = last_json(r.err);
  ASSERT_TRUE(j.contains("error"));
  EXPECT_TRUE(j.at("error").contains("message"));
}

TEST(Cli, DataprepSynthThenBuild) {
  const auto dir = testing_support::temp_dir("cli_dataprep");
  auto r = invoke({"--run-dir", dir.string(), "dataprep", "synth", "--out", (dir / "corpus").string(),
                   "--landmarks-out", (dir / "lm").string(), "--count", "3"});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  r = invoke({"--run-dir", dir.string(), "--seed", "4", "dataprep", "build", "--corpus", (dir / "corpus").string(),
              "--landmarks", (dir / "lm").string(), "--out", (dir / "ds").string(), "--val-fraction", "0"});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const auto m = dataprep::read_dataset_manifest(dir / "ds" / "manifest.json");
  EXPECT_EQ(m.train.size(), 3u);
  std::ifstream in(dir / "run_manifest.json");
  const auto run = nlohmann::json::parse(in);
  EXPECT_EQ(run.at("exit_code"), 0);
  EXPECT_EQ(m.seed, 4u);

  r = invoke({"dataprep", "build", "--corpus", (dir / "corpus").string(), "--landmarks", (dir / "lm").string(),
              "--out", (dir / "ds2").string(), "--val-fraction", "0", "--seed", "9"});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_EQ(dataprep::read_dataset_manifest(dir / "ds2" / "manifest.json").seed, 9u);
}

TEST(Cli, EvaluateMatchesLibrary) {
  const auto d = testing_support::make_toy_dataset("cli_eval", 10, 2, 1.0);
  const auto cfg = testing_support::tiny_config(32);
  trainer::Session s(cfg, trainer::Phase::kInpaint);
  s.save_checkpoint(d.root / "ckpt");

  const auto r = invoke({"--run-dir", (d.root / "run").string(), "evaluate", "--ckpt", (d.root / "ckpt").string(),
                         "--val", (d.dataset / "manifest.json").string()});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const auto j = last_json(r.out);

  const auto model = pipeline::load_model(d.root / "ckpt");
  const auto set = trainer::load_training_set(d.dataset, trainer::Split::kVal, 32, cfg.canny);
  ASSERT_EQ(set.size(), 10);
  const auto m = trainer::evaluate(*model.networks, set);
  EXPECT_EQ(j.at("count"), 10);
  EXPECT_DOUBLE_EQ(j.at("psnr").get<double>(), m.psnr);
  EXPECT_DOUBLE_EQ(j.at("mae").get<double>(), m.mae);
  EXPECT_DOUBLE_EQ(j.at("psnr_se").get<double>(), m.psnr_se);
}

TEST(Cli, EraseAndEffectWriteOutputs) {
  const auto dir = testing_support::temp_dir("cli_erase");
  const auto cfg = testing_support::tiny_config(32);
  trainer::Session s(cfg, trainer::Phase::kInpaint);
  s.save_checkpoint(dir / "ckpt");
  const auto face = dataprep::make_synthetic_face(1);
  imaging::write_rgb(dir / "face.png", face.image);
  imaging::write_landmarks(dir / "face.json", face.landmarks);

  auto r = invoke({"--run-dir", (dir / "run").string(), "erase", "--image", (dir / "face.png").string(),
                   "--landmarks", (dir / "face.json").string(), "--parts", "eyes", "--ckpt",
                   (dir / "ckpt").string(), "--out", (dir / "out").string()});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_TRUE(fs::exists(dir / "out" / "face.png"));

  r = invoke({"--run-dir", (dir / "run").string(), "effect", "--name", "comic", "--image",
              (dir / "face.png").string(), "--landmarks", (dir / "face.json").string(), "--ckpt",
              (dir / "ckpt").string(), "--out", (dir / "comic.png").string()});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_EQ(imaging::read_rgb(dir / "comic.png").width(), face.image.width());
}
