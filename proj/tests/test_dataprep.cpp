#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "faceerase/dataprep/dataprep.hpp"
#include "faceerase/dataprep/synthetic.hpp"
#include "faceerase/imaging/align.hpp"
#include "faceerase/imaging/geometry.hpp"
#include "faceerase/imaging/io.hpp"
#include "support.hpp"

using namespace faceerase;
using namespace faceerase::dataprep;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const PartSet kEverything(std::begin(kAllFaceParts), std::end(kAllFaceParts));

}  // namespace

TEST(Forehead, RowsEndAtTopmostEyebrowPoint) {
  const auto lm = imaging::canonical_landmarks();
  double top = 1e9;
  for (int i : imaging::lm::eyebrow_points()) top = std::min(top, lm[i].y);
  const auto [r0, r1] = forehead_rows(lm);
  EXPECT_EQ(r0, 0);
  EXPECT_EQ(r1, static_cast<int>(std::floor(top)));
  EXPECT_THROW(forehead_rows(lm, r1 - 4), DataError);
}

TEST(Forehead, CropIsResizedBand) {
  std::mt19937_64 rng(1);
  const auto img = testing_support::random_image(256, 256, rng);
  const auto lm = imaging::canonical_landmarks();
  const auto band = crop_forehead(img, lm);
  EXPECT_EQ(band.height(), kForeheadHeight);
  EXPECT_EQ(band.width(), kForeheadWidth);
}

TEST(FlipStitch, MirrorSymmetricAndSquare) {
  std::mt19937_64 rng(2);
  const auto band = testing_support::random_image(kForeheadHeight, kForeheadWidth, rng);
  const auto out = flip_stitch(band);
  ASSERT_EQ(out.height(), 256);
  ASSERT_EQ(out.width(), 256);
  for (int r = 0; r < 256; ++r)
    for (int c = 0; c < 256; ++c)
      for (int ch = 0; ch < 3; ++ch) ASSERT_EQ(out.at(r, c, ch), out.at(255 - r, c, ch));
  for (int c = 0; c < 256; ++c) EXPECT_EQ(out.at(5, c, 1), band.at(5, c, 1));
  EXPECT_THROW(flip_stitch(testing_support::random_image(100, 256, rng)), DataError);
}

TEST(Parts, ParsingAndNames) {
  EXPECT_EQ(parse_parts("eyes,mouth"), (PartSet{FacePart::kEyes, FacePart::kMouth}));
  EXPECT_EQ(parse_parts("eyebrows, nose"), (PartSet{FacePart::kEyebrows, FacePart::kNose}));
  EXPECT_THROW(parse_parts("eyes,ears"), DataError);
  EXPECT_THROW(parse_part(""), DataError);
  for (FacePart p : kAllFaceParts) EXPECT_EQ(parse_part(part_name(p)), p);
  EXPECT_EQ(default_dilation_radius(), 13);
}

TEST(PartMask, BinaryInBandAndCoversPolygons) {
  const auto lm = imaging::canonical_landmarks();
  const auto mask = facial_part_mask(lm, kEverything, default_dilation_radius());
  for (auto v : mask.data()) ASSERT_TRUE(v == 0 || v == 1);
  EXPECT_TRUE(mask_in_band(mask));
  for (auto part : imaging::lm::kAllParts) {
    const auto poly = imaging::gather(lm, imaging::lm::outline(part));
    EXPECT_TRUE(imaging::fill_polygon(poly, 256, 256).subset_of(mask));
  }
  const auto eyes = facial_part_mask(lm, {FacePart::kEyes}, 13);
  EXPECT_TRUE(eyes.subset_of(mask));
  EXPECT_LT(eyes.count(), mask.count());
}

TEST(PartMask, BandLimits) {
  imaging::BinaryMask m(100, 100);
  EXPECT_FALSE(mask_in_band(m));
  for (int i = 0; i < 5000; ++i) m.data()[i] = 1;
  EXPECT_TRUE(mask_in_band(m));
  for (int i = 0; i < 8000; ++i) m.data()[i] = 1;
  EXPECT_FALSE(mask_in_band(m));
}

TEST(Glasses, ProbabilityExtremesAndDeterminism) {
  const auto lm = imaging::canonical_landmarks();
  const auto base = facial_part_mask(lm, kEverything, 13);
  const auto never = augment_glasses(base, lm, 0.0, 7);
  EXPECT_FALSE(never.augmented);
  EXPECT_EQ(never.mask, base);
  const auto always = augment_glasses(base, lm, 1.0, 7);
  EXPECT_TRUE(always.augmented);
  EXPECT_TRUE(base.subset_of(always.mask));
  EXPECT_GT(always.mask.count(), base.count());
  EXPECT_TRUE(glasses_mask(lm, 256, 256).subset_of(always.mask));
  EXPECT_EQ(augment_glasses(base, lm, 0.5, 11).augmented, augment_glasses(base, lm, 0.5, 11).augmented);
}

TEST(Filter, DropsGlassesHatsAndOccludedForeheads) {
  std::vector<CorpusRecord> recs(4);
  for (int i = 0; i < 4; ++i) recs[i].id = "r" + std::to_string(i);
  recs[1].has_glasses = true;
  recs[2].has_hat = true;
  recs[3].forehead_occluded = true;
  const auto kept = filter_corpus(recs);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].id, "r0");
}

TEST(Synthetic, LandmarksInsideFrameAndDeterministic) {
  const auto a = make_synthetic_face(3);
  const auto b = make_synthetic_face(3);
  EXPECT_EQ(a.image, b.image);
  EXPECT_TRUE(a.landmarks.inside(a.image.height(), a.image.width()));
  EXPECT_NE(make_synthetic_face(4).image, a.image);
}

TEST(Build, ProducesSquareBlanksAndBinaryMasks) {
  const auto d = testing_support::make_toy_dataset("build", 6, 5, 0.34);
  const auto m = read_dataset_manifest(d.dataset / "manifest.json");
  EXPECT_EQ(m.train.size() + m.val.size(), 6u);
  EXPECT_EQ(m.val.size(), 2u);
  for (const auto& e : m.train) {
    const auto img = imaging::read_rgb(d.dataset / e.image);
    const auto mask = imaging::read_mask(d.dataset / e.mask);
    EXPECT_EQ(img.height(), 256);
    EXPECT_EQ(img.width(), 256);
    EXPECT_TRUE(mask_in_band(mask));
    for (auto v : mask.data()) ASSERT_TRUE(v == 0 || v == 1);
    for (int r = 0; r < 128; ++r) ASSERT_EQ(img.at(r, 40, 0), img.at(255 - r, 40, 0));
  }
}

TEST(Build, ByteIdenticalForSameSeed) {
  const auto a = testing_support::make_toy_dataset("det_a", 5, 9, 0.2);
  const auto b = testing_support::make_toy_dataset("det_b", 5, 9, 0.2);
  EXPECT_EQ(slurp(a.dataset / "manifest.json"), slurp(b.dataset / "manifest.json"));
  for (const auto& entry : fs::directory_iterator(a.dataset / "images")) {
    EXPECT_EQ(slurp(entry.path()), slurp(b.dataset / "images" / entry.path().filename()));
  }
  for (const auto& entry : fs::directory_iterator(a.dataset / "masks")) {
    EXPECT_EQ(slurp(entry.path()), slurp(b.dataset / "masks" / entry.path().filename()));
  }
}

TEST(Build, FiltersFlaggedAndSkipsMissingLandmarks) {
  const auto root = testing_support::temp_dir("filter_build");
  CorpusSpec spec;
  spec.count = 6;
  spec.glasses_every = 3;
  write_synthetic_corpus(root / "corpus", root / "lm", spec);
  const auto records = read_ingest_manifest(root / "corpus" / "manifest.jsonl");
  const auto kept = filter_corpus(records);
  ASSERT_LT(kept.size(), records.size());
  fs::remove(root / "lm" / kept.front().landmarks);
  BuildOptions opts;
  opts.val_fraction = 0;
  const auto m = build_dataset(root / "corpus", root / "lm", root / "out", opts);
  EXPECT_EQ(m.filtered, records.size() - kept.size());
  EXPECT_EQ(m.skipped, 1u);
  EXPECT_EQ(m.train.size(), kept.size() - 1);
}

TEST(Build, MissingCorpusIsAnError) {
  const auto root = testing_support::temp_dir("missing_corpus");
  EXPECT_THROW(build_dataset(root / "nope", root, root / "out"), DataError);
}
