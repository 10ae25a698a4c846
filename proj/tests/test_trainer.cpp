#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "faceerase/imaging/io.hpp"
#include "faceerase/trainer/trainer.hpp"
#include "support.hpp"

using namespace faceerase;
using namespace faceerase::trainer;
namespace fs = std::filesystem;

namespace faceerase::trainer {
void PrintTo(const StepRecord& r, std::ostream* os) { *os << r.to_json().dump(); }
}  // namespace faceerase::trainer

namespace {

TrainingSet random_set(int count, int size, std::uint64_t seed, bool empty_masks = false) {
  std::mt19937_64 rng(seed);
  std::vector<imaging::ImageRGB> images;
  std::vector<imaging::BinaryMask> masks;
  for (int i = 0; i < count; ++i) {
    images.push_back(testing_support::random_image(size, size, rng));
    imaging::BinaryMask m(size, size);
    if (!empty_masks) {
      const int r0 = static_cast<int>(rng() % (size / 2)), c0 = static_cast<int>(rng() % (size / 2));
      for (int r = r0; r < r0 + size / 3; ++r)
        for (int c = c0; c < c0 + size / 3; ++c) m.at(r, c) = 1;
    }
    masks.push_back(m);
  }
  return make_training_set(std::move(images), std::move(masks), imaging::CannyParams{});
}

}  // namespace

TEST(Config, DefaultsValidateAndRoundTrip) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.loss_weights.inpaint.style, 500.0);
  EXPECT_EQ(c.loss_weights.edge.fm, 10.0);
  EXPECT_EQ(c.lr_generator, 1e-4);
  EXPECT_EQ(c.lr_discriminator, 1e-5);
  EXPECT_EQ(c.optimizer.beta1, 0.0);
  EXPECT_EQ(c.optimizer.beta2, 0.9);
  const nlohmann::json j = testing_support::tiny_config();
  const TrainConfig back = j.get<TrainConfig>();
  EXPECT_EQ(nlohmann::json(back), j);
  EXPECT_EQ(config_hash(back), config_hash(testing_support::tiny_config()));
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(nlohmann::json({{"lerning_rate", 1}}).get<TrainConfig>(), ConfigError);
  EXPECT_THROW(nlohmann::json({{"loss_weights", {{"inpaint", {{"stlye", 1}}}}}}).get<TrainConfig>(), ConfigError);
  TrainConfig c;
  c.image_size = 48;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, DottedOverrides) {
  TrainConfig c;
  apply_override(c, "loss_weights.inpaint.pc=0.5");
  apply_override(c, "batch_size=3");
  apply_override(c, "pc_hole_only=true");
  EXPECT_EQ(c.loss_weights.inpaint.pc, 0.5);
  EXPECT_EQ(c.batch_size, 3);
  EXPECT_TRUE(c.pc_hole_only);
  EXPECT_NE(config_hash(c), config_hash(TrainConfig{}));
  EXPECT_THROW(apply_override(c, "no_such_key=1"), ConfigError);
  EXPECT_THROW(apply_override(c, "batch_size"), ConfigError);
}

TEST(Config, LoadFromFile) {
  const auto dir = testing_support::temp_dir("cfg");
  std::ofstream(dir / "c.json") << R"({"batch_size": 4, "model": {"generator_width": 16}})";
  const TrainConfig c = load_config(dir / "c.json");
  EXPECT_EQ(c.batch_size, 4);
  EXPECT_EQ(c.model.generator_width, 16);
  EXPECT_EQ(c.model.residual_blocks, 8);
  std::ofstream(dir / "bad.json") << "{";
  EXPECT_THROW(load_config(dir / "bad.json"), ConfigError);
}

TEST(Data, SamplingAndFixedPairs) {
  const auto set = random_set(5, 32, 1);
  std::mt19937_64 a(3), b(3);
  const Batch x = sample_batch(set, 4, a), y = sample_batch(set, 4, b);
  EXPECT_EQ(x.image_index, y.image_index);
  EXPECT_EQ(x.mask_index, y.mask_index);
  EXPECT_EQ(x.image.shape(), (nn::Shape{4, 3, 32, 32}));
  const auto identity = fixed_pairs(set, 0);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(identity[i], std::make_pair(i, i));
  const auto other = fixed_pairs(set, 7);
  EXPECT_EQ(other, fixed_pairs(set, 7));
  for (const auto& edge : set.edges)
    for (float v : edge.data()) ASSERT_TRUE(v == 0.0f || v == 1.0f);
}

TEST(Metrics, PsnrAndStandardError) {
  EXPECT_EQ(psnr(0.0), kPsnrCap);
  EXPECT_NEAR(psnr(0.01), 20.0, 1e-12);
  EXPECT_NEAR(psnr(1e-3), 30.0, 1e-12);
  const MeanSe s = mean_and_se({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_NEAR(s.se, std::sqrt(5.0 / 3.0) / 2.0, 1e-12);
  EXPECT_EQ(mean_and_se({7.0}).se, 0.0);
}

TEST(Metrics, EmptyHolesScorePerfectly) {
  const auto set = random_set(3, 32, 2, true);
  const models::Networks nets(testing_support::tiny_config().model, 0);
  const InpaintMetrics m = evaluate(nets, set, 2);
  EXPECT_EQ(m.count, 3u);
  EXPECT_EQ(m.psnr, kPsnrCap);
  EXPECT_EQ(m.mae, 0.0);
  EXPECT_EQ(m.psnr_se, 0.0);
}

TEST(Metrics, EvaluateIsDeterministic) {
  const auto set = random_set(3, 32, 4);
  const models::Networks nets(testing_support::tiny_config().model, 5);
  const auto a = evaluate(nets, set, 2), b = evaluate(nets, set, 3);
  EXPECT_EQ(a.psnr, b.psnr);
  EXPECT_EQ(a.mae, b.mae);
  EXPECT_GT(a.hole_l1, 0.0);
  EXPECT_LT(a.psnr, kPsnrCap);
}

TEST(Plateau, StopsAfterWindowWithoutImprovement) {
  PlateauDetector p({100, 0.01});
  EXPECT_FALSE(p.update(0, 0.5));
  EXPECT_FALSE(p.update(50, 0.505));
  EXPECT_FALSE(p.update(99, 0.5));
  EXPECT_TRUE(p.update(100, 0.509));
  PlateauDetector q({100, 0.01});
  q.update(0, 0.5);
  EXPECT_FALSE(q.update(60, 0.52));
  EXPECT_FALSE(q.update(150, 0.52));
  EXPECT_TRUE(q.update(160, 0.52));
}

TEST(Phase, Names) {
  EXPECT_EQ(parse_phase("edge"), Phase::kEdge);
  EXPECT_EQ(parse_phase(phase_name(Phase::kInpaint)), Phase::kInpaint);
  EXPECT_THROW(parse_phase("refine"), ConfigError);
}

TEST(Training, SameSeedSameTrace) {
  const auto set = random_set(4, 32, 6);
  RunOptions o;
  o.steps = 3;
  o.log_progress = false;
  const auto a = train_phase1(set, testing_support::tiny_config(), o);
  const auto b = train_phase1(set, testing_support::tiny_config(), o);
  ASSERT_EQ(a.history.size(), 3u);
  EXPECT_EQ(a.history, b.history);
  const auto c = train_phase2(set, testing_support::tiny_config(), o);
  const auto d = train_phase2(set, testing_support::tiny_config(), o);
  EXPECT_EQ(c.history, d.history);
  for (const char* key : {"g_adv", "perc", "l1", "style", "pc"}) EXPECT_TRUE(c.history[0].losses.count(key)) << key;
}

TEST(Training, ResumeReproducesUninterruptedRun) {
  const auto set = random_set(4, 32, 7);
  TrainConfig cfg = testing_support::tiny_config();
  cfg.checkpoint_every = 2;
  cfg.keep_last = 10;
  const auto dir = testing_support::temp_dir("resume");
  RunOptions o;
  o.steps = 4;
  o.log_progress = false;
  o.out_dir = dir / "full";
  const auto full = train_phase2(set, cfg, o);
  ASSERT_TRUE(fs::exists(dir / "full" / "checkpoints" / "inpaint_step_00000002" / "manifest.json"));

  RunOptions r = o;
  r.out_dir = dir / "resumed";
  r.resume = dir / "full" / "checkpoints" / "inpaint_step_00000002";
  const auto resumed = train_phase2(set, cfg, r);
  ASSERT_EQ(resumed.history.size(), 2u);
  EXPECT_EQ(resumed.history[0], full.history[2]);
  EXPECT_EQ(resumed.history[1], full.history[3]);

  EXPECT_THROW(train_phase1(set, cfg, r), models::CheckpointError);
}

TEST(Training, CheckpointPruningKeepsLastN) {
  const auto set = random_set(3, 32, 8);
  TrainConfig cfg = testing_support::tiny_config();
  cfg.checkpoint_every = 1;
  cfg.keep_last = 2;
  const auto dir = testing_support::temp_dir("prune");
  RunOptions o;
  o.steps = 5;
  o.log_progress = false;
  o.out_dir = dir;
  o.val = &set;
  train_phase1(set, cfg, o);
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir / "checkpoints")) names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  EXPECT_EQ(names, (std::vector<std::string>{"edge_best", "edge_step_00000004", "edge_step_00000005"}));
  std::ifstream in(dir / "metrics.jsonl");
  int lines = 0;
  for (std::string line; std::getline(in, line);) {
    const auto j = nlohmann::json::parse(line);
    for (const char* key : {"step", "phase", "d", "g_adv", "g_fm", "g_total"}) EXPECT_TRUE(j.contains(key)) << key;
    ++lines;
  }
  EXPECT_EQ(lines, 5);
}

TEST(Training, EdgeNetworkStaysFrozenInPhaseTwo) {
  const auto set = random_set(3, 32, 9);
  const auto dir = testing_support::temp_dir("frozen");
  Session edge(testing_support::tiny_config(), Phase::kEdge);
  edge.step(set);
  edge.save_checkpoint(dir / "edge");
  RunOptions o;
  o.steps = 3;
  o.log_progress = false;
  o.frozen_edge = dir / "edge";
  const auto r = train_phase2(set, testing_support::tiny_config(), o);
  EXPECT_EQ(r.edge_hash_before, edge.edge_hash());
  EXPECT_EQ(r.edge_hash_after, r.edge_hash_before);

  TrainConfig wider = testing_support::tiny_config();
  wider.model.generator_width = 8;
  Session mismatched(wider, Phase::kInpaint);
  EXPECT_THROW(mismatched.load_frozen_edge(dir / "edge"), models::CheckpointError);
}

TEST(Training, TrainingSetLoadsFromBuiltDataset) {
  const auto d = testing_support::make_toy_dataset("trainer_ds", 4, 1, 0.25);
  const auto train = load_training_set(d.dataset, Split::kTrain, 64, {});
  const auto val = load_training_set(d.dataset, Split::kVal, 64, {});
  EXPECT_EQ(train.size(), 3);
  EXPECT_EQ(val.size(), 1);
  EXPECT_EQ(train.images[0].height(), 64);
  for (auto v : train.masks[0].data()) ASSERT_TRUE(v == 0 || v == 1);
}
