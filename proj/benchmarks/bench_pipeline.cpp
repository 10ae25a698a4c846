#include <benchmark/benchmark.h>

#include "faceerase/dataprep/synthetic.hpp"
#include "faceerase/effects/effects.hpp"
#include "faceerase/imaging/canny.hpp"
#include "faceerase/imaging/landmarks.hpp"
#include "faceerase/imaging/poisson.hpp"
#include "faceerase/pipeline/erase.hpp"

namespace {

namespace fe = faceerase;
using fe::dataprep::FacePart;

void BM_Canny(benchmark::State& state) {
  const auto face = fe::dataprep::render_canonical_face(1, true);
  const auto gray = fe::imaging::to_grayscale(face);
  for (auto _ : state) benchmark::DoNotOptimize(fe::imaging::canny_edges(gray));
}
BENCHMARK(BM_Canny)->Unit(benchmark::kMillisecond);

void BM_PoissonBlend(benchmark::State& state) {
  const auto src = fe::dataprep::render_canonical_face(1, true);
  const auto dst = fe::dataprep::render_canonical_face(2, false);
  const int half = static_cast<int>(state.range(0));
  fe::imaging::BinaryMask region(256, 256);
  for (int r = 128 - half; r < 128 + half; ++r)
    for (int c = 128 - half; c < 128 + half; ++c) region.at(r, c) = 1;
  for (auto _ : state) benchmark::DoNotOptimize(fe::imaging::poisson_blend(src, dst, region));
}
BENCHMARK(BM_PoissonBlend)->Arg(16)->Arg(48)->Unit(benchmark::kMillisecond);

void BM_Erase(benchmark::State& state) {
  fe::models::ModelConfig cfg;
  cfg.generator_width = 8;
  cfg.residual_blocks = 2;
  cfg.refine_widths = {8, 16, 32, 32, 32};
  cfg.attention_reduction = 4;
  cfg.discriminator_width = 8;
  const int size = static_cast<int>(state.range(0));
  const fe::pipeline::InpaintModel model{std::make_shared<const fe::models::Networks>(cfg, 1), size, {}};
  const auto face = fe::dataprep::make_synthetic_face(3);
  const fe::dataprep::PartSet parts{FacePart::kEyes, FacePart::kNose, FacePart::kMouth};
  for (auto _ : state) benchmark::DoNotOptimize(fe::pipeline::erase(face.image, face.landmarks, parts, model));
}
BENCHMARK(BM_Erase)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_ApplyEffect(benchmark::State& state) {
  const auto face = fe::dataprep::render_canonical_face(4, true);
  const auto blank = fe::dataprep::render_canonical_face(4, false);
  const auto lm = fe::imaging::canonical_landmarks();
  const auto parts = fe::effects::extract_parts(face, lm);
  const auto spec = fe::effects::default_spec(fe::effects::Effect::kComic);
  for (auto _ : state) benchmark::DoNotOptimize(fe::effects::apply_effect(blank, parts, lm, spec));
}
BENCHMARK(BM_ApplyEffect)->Unit(benchmark::kMillisecond);

}  // namespace
