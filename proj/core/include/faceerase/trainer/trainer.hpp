#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "faceerase/losses/losses.hpp"
#include "faceerase/models/bundle.hpp"
#include "faceerase/nn/adam.hpp"
#include "faceerase/trainer/config.hpp"
#include "faceerase/trainer/data.hpp"

namespace faceerase::trainer {

enum class Phase { kEdge, kInpaint };
std::string phase_name(Phase p);
Phase parse_phase(const std::string& name);

struct StepRecord {
  std::int64_t step = 0;
  Phase phase = Phase::kEdge;
  std::map<std::string, double> losses;
  std::map<std::string, double> metrics;  // validation numbers, when evaluated

  [[nodiscard]] nlohmann::json to_json() const;
  friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

/// Live training state of one phase: networks, optimizer moments, sampler
/// position and step counter. It is neither copyable nor movable because the
/// optimizers point into the networks.
class Session {
 public:
  Session(const TrainConfig& config, Phase phase);
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  /// Loads the edge generator from a checkpoint and freezes it (phase 2).
  void load_frozen_edge(const std::filesystem::path& checkpoint_dir);

  /// One discriminator update followed by one generator update.
  StepRecord step(const TrainingSet& data);

  void save_checkpoint(const std::filesystem::path& dir, const std::map<std::string, double>& metrics = {});
  /// Restores everything saved by save_checkpoint. The checkpoint's phase,
  /// architecture and config hash must match this session.
  void load_checkpoint(const std::filesystem::path& dir);

  [[nodiscard]] std::int64_t steps_done() const { return step_; }
  [[nodiscard]] Phase phase() const { return phase_; }
  [[nodiscard]] const TrainConfig& config() const { return config_; }
  [[nodiscard]] models::Networks& networks() { return nets_; }
  [[nodiscard]] const models::Networks& networks() const { return nets_; }
  /// SHA-256 of the edge generator weights.
  [[nodiscard]] std::string edge_hash();

 private:
  StepRecord edge_step(const TrainingSet& data);
  StepRecord inpaint_step(const TrainingSet& data);

  TrainConfig config_;
  Phase phase_;
  models::Networks nets_;
  std::unique_ptr<losses::VggExtractor<float>> vgg_;
  nn::Adam<float> opt_g_;
  nn::Adam<float> opt_d_;
  std::mt19937_64 sampler_;
  std::int64_t step_ = 0;
};

/// Stops training once the tracked value fails to improve by min_delta for
/// `window` steps.
class PlateauDetector {
 public:
  explicit PlateauDetector(PlateauConfig config) : config_(config) {}
  /// Returns true when the run has plateaued.
  bool update(std::int64_t step, double value);
  [[nodiscard]] double best() const { return best_; }

 private:
  PlateauConfig config_;
  double best_ = -std::numeric_limits<double>::infinity();
  std::int64_t best_step_ = 0;
};

struct RunOptions {
  std::filesystem::path out_dir;  // checkpoints/ and metrics.jsonl; empty disables both
  std::optional<std::filesystem::path> resume;
  std::optional<std::filesystem::path> frozen_edge;  // phase 2 only
  std::optional<std::int64_t> steps;                 // overrides the config's phase budget
  const TrainingSet* val = nullptr;
  bool log_progress = true;
};

struct RunResult {
  std::unique_ptr<Session> session;
  std::vector<StepRecord> history;
  std::string edge_hash_before;
  std::string edge_hash_after;
  bool plateaued = false;
};

/// Phase 1: edge completion GAN.
RunResult train_phase1(const TrainingSet& data, const TrainConfig& config, const RunOptions& options);
/// Phase 2: pixel-clone and refine networks against the frozen edge network.
RunResult train_phase2(const TrainingSet& data, const TrainConfig& config, const RunOptions& options);

struct InpaintMetrics {
  double psnr = 0;
  double psnr_se = 0;
  double mae = 0;
  double mae_se = 0;
  double hole_l1 = 0;  // mean |composite - truth| over hole pixels
  double flow_variance = 0;
  std::size_t count = 0;

  [[nodiscard]] nlohmann::json to_json() const;
};

inline constexpr double kPsnrCap = 100.0;
/// 10 log10(1 / MSE), capped for identical images.
double psnr(double mse);

/// Per-image PSNR/MAE of full composited outputs, averaged, with standard
/// errors. Pairs default to fixed_pairs(set, 0).
InpaintMetrics evaluate(const models::Networks& nets, const TrainingSet& set, int batch_size = 8,
                        std::optional<std::vector<std::pair<int, int>>> pairs = std::nullopt);

struct EdgeMetrics {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};
/// Hole-pixel F1 of thresholded (0.5) completed edges against Canny edges.
EdgeMetrics evaluate_edges(const models::Networks& nets, const TrainingSet& set, int batch_size = 8,
                           std::optional<std::vector<std::pair<int, int>>> pairs = std::nullopt);

/// Statistics over a list of per-image values.
struct MeanSe {
  double mean = 0;
  double se = 0;
};
MeanSe mean_and_se(const std::vector<double>& values);

}  // namespace faceerase::trainer
