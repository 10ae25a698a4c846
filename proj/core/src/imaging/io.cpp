#include "faceerase/imaging/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace faceerase::imaging {
namespace {

std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

void write_png(const std::filesystem::path& path, const cv::Mat& m) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), m)) throw ImageError("cannot write " + path.string());
}

template <typename R>
void write_single(const std::filesystem::path& path, const R& img) {
  cv::Mat m(img.height(), img.width(), CV_8UC1);
  for (int r = 0; r < img.height(); ++r)
    for (int c = 0; c < img.width(); ++c) m.at<std::uint8_t>(r, c) = to_byte(static_cast<float>(img.at(r, c)));
  write_png(path, m);
}

}  // namespace

ImageRGB read_rgb(const std::filesystem::path& path) {
  const cv::Mat m = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (m.empty()) throw ImageError("cannot read image " + path.string());
  ImageRGB out(m.rows, m.cols);
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) {
      const auto& px = m.at<cv::Vec3b>(r, c);
      // OpenCV stores BGR.
      for (int ch = 0; ch < 3; ++ch) out.at(r, c, ch) = px[2 - ch] / 255.0f;
    }
  return out;
}

void write_rgb(const std::filesystem::path& path, const ImageRGB& img) {
  cv::Mat m(img.height(), img.width(), CV_8UC3);
  for (int r = 0; r < img.height(); ++r)
    for (int c = 0; c < img.width(); ++c) {
      auto& px = m.at<cv::Vec3b>(r, c);
      for (int ch = 0; ch < 3; ++ch) px[2 - ch] = to_byte(img.at(r, c, ch));
    }
  write_png(path, m);
}

void write_gray(const std::filesystem::path& path, const GrayImage& img) { write_single(path, img); }
void write_edges(const std::filesystem::path& path, const EdgeMap& edges) { write_single(path, edges); }

BinaryMask read_mask(const std::filesystem::path& path) {
  const cv::Mat m = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (m.empty()) throw ImageError("cannot read mask " + path.string());
  BinaryMask out(m.rows, m.cols);
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) out.at(r, c) = m.at<std::uint8_t>(r, c) ? 1 : 0;
  return out;
}

void write_mask(const std::filesystem::path& path, const BinaryMask& mask) {
  cv::Mat m(mask.height(), mask.width(), CV_8UC1);
  for (int r = 0; r < mask.height(); ++r)
    for (int c = 0; c < mask.width(); ++c) m.at<std::uint8_t>(r, c) = mask.at(r, c) ? 255 : 0;
  write_png(path, m);
}

Landmarks106 read_landmarks(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ImageError("cannot read landmarks " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ImageError("malformed landmarks " + path.string() + ": " + e.what());
  }
  if (!j.is_array() || j.size() != static_cast<std::size_t>(kLandmarkCount)) {
    throw ImageError("landmarks file must hold 106 [x, y] pairs: " + path.string());
  }
  Landmarks106 lm;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != 2) throw ImageError("landmark entry is not [x, y]");
    lm[i] = {j[i][0].get<double>(), j[i][1].get<double>()};
  }
  return lm;
}

void write_landmarks(const std::filesystem::path& path, const Landmarks106& lm) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& p : lm.points) j.push_back({p.x, p.y});
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ImageError("cannot write " + path.string());
  out << j.dump() << '\n';
}

ImageRGB quantize8(const ImageRGB& img) {
  ImageRGB out = img;
  for (float& v : out.data()) v = to_byte(v) / 255.0f;
  return out;
}

}  // namespace faceerase::imaging
