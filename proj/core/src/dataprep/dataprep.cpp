#include "faceerase/dataprep/dataprep.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>
#include <sstream>

#include "faceerase/imaging/align.hpp"
#include "faceerase/imaging/geometry.hpp"
#include "faceerase/imaging/io.hpp"

namespace faceerase::dataprep {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<CorpusRecord> read_ingest_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open ingest manifest " + path.string());
  std::vector<CorpusRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      CorpusRecord r;
      r.image = j.at("image").get<std::string>();
      r.landmarks = j.at("landmarks").get<std::string>();
      r.has_glasses = j.at("has_glasses").get<bool>();
      r.has_hat = j.at("has_hat").get<bool>();
      r.forehead_occluded = j.at("forehead_occluded").get<bool>();
      r.id = j.contains("id") ? j["id"].get<std::string>() : fs::path(r.image).stem().string();
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_ingest_manifest(const fs::path& path, const std::vector<CorpusRecord>& records) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& r : records) {
    json j{{"id", r.id},
           {"image", r.image},
           {"landmarks", r.landmarks},
           {"has_glasses", r.has_glasses},
           {"has_hat", r.has_hat},
           {"forehead_occluded", r.forehead_occluded}};
    out << j.dump() << '\n';
  }
}

std::vector<CorpusRecord> filter_corpus(const std::vector<CorpusRecord>& records) {
  std::vector<CorpusRecord> out;
  std::copy_if(records.begin(), records.end(), std::back_inserter(out), [](const CorpusRecord& r) {
    return !r.has_glasses && !r.has_hat && !r.forehead_occluded;
  });
  if (out.empty()) spdlog::warn("filter_corpus: no records left after filtering {} inputs", records.size());
  return out;
}

std::pair<int, int> forehead_rows(const Landmarks106& lm, int hairline_row) {
  double top = std::numeric_limits<double>::infinity();
  for (int i : imaging::lm::eyebrow_points()) top = std::min(top, lm[static_cast<std::size_t>(i)].y);
  const int end = static_cast<int>(std::floor(top));
  if (end - hairline_row < 8) {
    throw DataError("insufficient forehead: rows [" + std::to_string(hairline_row) + ", " +
                    std::to_string(end) + ")");
  }
  return {hairline_row, end};
}

ImageRGB crop_forehead(const ImageRGB& img, const Landmarks106& lm, int hairline_row) {
  auto [r0, r1] = forehead_rows(lm, hairline_row);
  if (r0 < 0 || r1 > img.height()) throw DataError("forehead rows fall outside the image");
  ImageRGB band(r1 - r0, img.width());
  for (int r = r0; r < r1; ++r)
    for (int c = 0; c < img.width(); ++c)
      for (int ch = 0; ch < 3; ++ch) band.at(r - r0, c, ch) = img.at(r, c, ch);
  return imaging::resize(band, kForeheadHeight, kForeheadWidth);
}

ImageRGB flip_stitch(const ImageRGB& forehead) {
  if (!forehead.same_size(kForeheadHeight, kForeheadWidth)) {
    throw DataError("flip_stitch expects a 256x128 forehead, got " + std::to_string(forehead.width()) + "x" +
                    std::to_string(forehead.height()));
  }
  ImageRGB out(2 * kForeheadHeight, kForeheadWidth);
  for (int r = 0; r < kForeheadHeight; ++r)
    for (int c = 0; c < kForeheadWidth; ++c)
      for (int ch = 0; ch < 3; ++ch) {
        const float v = forehead.at(r, c, ch);
        out.at(r, c, ch) = v;
        out.at(2 * kForeheadHeight - 1 - r, c, ch) = v;
      }
  return out;
}

FacePart parse_part(const std::string& name) {
  if (name == "eyebrows") return FacePart::kEyebrows;
  if (name == "eyes") return FacePart::kEyes;
  if (name == "nose") return FacePart::kNose;
  if (name == "mouth") return FacePart::kMouth;
  throw DataError("invalid part '" + name + "' (expected eyebrows, eyes, nose or mouth)");
}

PartSet parse_parts(const std::string& comma_separated) {
  PartSet out;
  std::stringstream ss(comma_separated);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    out.insert(parse_part(item.substr(b, item.find_last_not_of(" \t") - b + 1)));
  }
  return out;
}

std::string part_name(FacePart part) {
  switch (part) {
    case FacePart::kEyebrows: return "eyebrows";
    case FacePart::kEyes: return "eyes";
    case FacePart::kNose: return "nose";
    case FacePart::kMouth: return "mouth";
  }
  return "";
}

int default_dilation_radius(int crop_width) {
  return static_cast<int>(std::lround(0.05 * crop_width));
}

namespace {

std::vector<imaging::lm::Part> outlines_of(FacePart part) {
  using imaging::lm::Part;
  switch (part) {
    case FacePart::kEyebrows: return {Part::kLeftEyebrow, Part::kRightEyebrow};
    case FacePart::kEyes: return {Part::kLeftEye, Part::kRightEye};
    case FacePart::kNose: return {Part::kNose};
    case FacePart::kMouth: return {Part::kMouth};
  }
  return {};
}

void fill_ellipse(BinaryMask& m, const imaging::Point2& c, double a, double b) {
  for (int r = 0; r < m.height(); ++r)
    for (int x = 0; x < m.width(); ++x) {
      const double dx = (x - c.x) / a;
      const double dy = (r - c.y) / b;
      if (dx * dx + dy * dy <= 1.0) m.at(r, x) = 1;
    }
}

std::uint64_t mix_seed(std::uint64_t seed, const std::string& key) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : key) h = (h ^ ch) * 1099511628211ULL;
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace

BinaryMask facial_part_mask(const Landmarks106& lm, const PartSet& parts, int dilation_radius, int height,
                            int width) {
  BinaryMask mask(height, width);
  for (FacePart part : parts) {
    for (auto outline : outlines_of(part)) {
      const auto pts = imaging::gather(lm, imaging::lm::outline(outline));
      mask = imaging::mask_union(mask, imaging::fill_polygon(pts, height, width));
    }
  }
  return imaging::dilate(mask, dilation_radius);
}

BinaryMask glasses_mask(const Landmarks106& lm, int height, int width) {
  using imaging::lm::Part;
  const auto left = lm.centroid(imaging::lm::outline(Part::kLeftEye));
  const auto right = lm.centroid(imaging::lm::outline(Part::kRightEye));
  const double iod = std::hypot(right.x - left.x, right.y - left.y);
  BinaryMask m(height, width);
  const double a = 0.42 * iod;
  const double b = 0.30 * iod;
  fill_ellipse(m, left, a, b);
  fill_ellipse(m, right, a, b);
  // Bridge: a bar along the segment joining the lens centres.
  const double half = 0.05 * iod;
  const double ux = (right.x - left.x) / iod;
  const double uy = (right.y - left.y) / iod;
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) {
      const double px = c - left.x;
      const double py = r - left.y;
      const double along = px * ux + py * uy;
      const double across = -px * uy + py * ux;
      if (along >= 0 && along <= iod && std::abs(across) <= half) m.at(r, c) = 1;
    }
  return m;
}

GlassesResult augment_glasses(const BinaryMask& mask, const Landmarks106& lm, double probability,
                              std::uint64_t seed) {
  if (probability < 0 || probability > 1) throw DataError("glasses probability must lie in [0, 1]");
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(probability);
  if (!coin(rng)) return {mask, false};
  return {imaging::mask_union(mask, glasses_mask(lm, mask.height(), mask.width())), true};
}

bool mask_in_band(const BinaryMask& mask) {
  const double f = mask.fill_fraction();
  return f >= kMinMaskFill && f <= kMaxMaskFill;
}

namespace {

json entries_json(const std::vector<DatasetEntry>& entries) {
  json arr = json::array();
  for (const auto& e : entries) {
    arr.push_back({{"id", e.id}, {"image", e.image}, {"mask", e.mask}, {"glasses", e.glasses}});
  }
  return arr;
}

std::vector<DatasetEntry> entries_from(const json& arr) {
  std::vector<DatasetEntry> out;
  for (const auto& j : arr) {
    out.push_back({j.at("id").get<std::string>(), j.at("image").get<std::string>(),
                   j.at("mask").get<std::string>(), j.value("glasses", false)});
  }
  return out;
}

}  // namespace

void write_dataset_manifest(const fs::path& path, const DatasetManifest& m) {
  json j;
  j["train"] = entries_json(m.train);
  j["val"] = entries_json(m.val);
  j["seed"] = m.seed;
  j["counts"] = {{"train_images", m.train.size()},
                 {"train_masks", m.train.size()},
                 {"val_images", m.val.size()},
                 {"val_masks", m.val.size()},
                 {"filtered", m.filtered},
                 {"skipped", m.skipped}};
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

DatasetManifest read_dataset_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset manifest " + path.string());
  try {
    json j;
    in >> j;
    DatasetManifest m;
    m.train = entries_from(j.at("train"));
    m.val = entries_from(j.at("val"));
    m.seed = j.at("seed").get<std::uint64_t>();
    m.filtered = j.at("counts").value("filtered", std::size_t{0});
    m.skipped = j.at("counts").value("skipped", std::size_t{0});
    return m;
  } catch (const json::exception& e) {
    throw DataError("malformed dataset manifest " + path.string() + ": " + e.what());
  }
}

DatasetManifest build_dataset(const fs::path& corpus_dir, const fs::path& landmarks_dir, const fs::path& out_dir,
                              const BuildOptions& options) {
  if (!fs::is_directory(corpus_dir)) throw DataError("corpus directory not found: " + corpus_dir.string());
  if (!fs::is_directory(landmarks_dir)) {
    throw DataError("landmarks directory not found: " + landmarks_dir.string());
  }
  const auto all = read_ingest_manifest(corpus_dir / options.manifest_name);
  const auto kept = filter_corpus(all);
  fs::create_directories(out_dir / "images");
  fs::create_directories(out_dir / "masks");

  DatasetManifest manifest;
  manifest.seed = options.seed;
  manifest.filtered = all.size() - kept.size();
  const int radius = default_dilation_radius();
  std::vector<DatasetEntry> produced;
  for (const auto& rec : kept) {
    const fs::path lm_path = landmarks_dir / rec.landmarks;
    if (!fs::exists(lm_path)) {
      spdlog::warn("build_dataset: skipping {}: missing landmarks {}", rec.id, lm_path.string());
      ++manifest.skipped;
      continue;
    }
    try {
      const ImageRGB img = imaging::read_rgb(corpus_dir / rec.image);
      const Landmarks106 lm = imaging::read_landmarks(lm_path);
      const imaging::AlignedFace face = imaging::align_face(img, lm, kSampleSize);
      const ImageRGB blank = flip_stitch(crop_forehead(face.image, face.landmarks));
      const PartSet everything(std::begin(kAllFaceParts), std::end(kAllFaceParts));
      const BinaryMask parts = facial_part_mask(face.landmarks, everything, radius);
      const GlassesResult g =
          augment_glasses(parts, face.landmarks, options.glasses_probability, mix_seed(options.seed, rec.id));
      if (!mask_in_band(g.mask)) {
        spdlog::warn("build_dataset: skipping {}: mask fill {:.3f} outside band", rec.id, g.mask.fill_fraction());
        ++manifest.skipped;
        continue;
      }
      DatasetEntry e{rec.id, "images/" + rec.id + ".png", "masks/" + rec.id + ".png", g.augmented};
      imaging::write_rgb(out_dir / e.image, blank);
      imaging::write_mask(out_dir / e.mask, g.mask);
      produced.push_back(std::move(e));
    } catch (const std::exception& ex) {
      spdlog::warn("build_dataset: skipping {}: {}", rec.id, ex.what());
      ++manifest.skipped;
    }
  }

  std::vector<std::size_t> order(produced.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Portable Fisher-Yates: std::shuffle's algorithm is implementation defined.
  std::mt19937_64 rng(options.seed);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  const auto n_val = static_cast<std::size_t>(std::floor(options.val_fraction * produced.size()));
  for (std::size_t k = 0; k < order.size(); ++k) {
    (k < n_val ? manifest.val : manifest.train).push_back(produced[order[k]]);
  }
  write_dataset_manifest(out_dir / "manifest.json", manifest);
  return manifest;
}

}  // namespace faceerase::dataprep
