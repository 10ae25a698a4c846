#pragma once

#include <filesystem>

#include "faceerase/imaging/image.hpp"

namespace faceerase::imaging {

// 8-bit PNG I/O. Intensities map to [0,1] as v / 255; writes round to nearest.
ImageRGB read_rgb(const std::filesystem::path& path);
void write_rgb(const std::filesystem::path& path, const ImageRGB& img);
void write_gray(const std::filesystem::path& path, const GrayImage& img);
/// Any nonzero byte reads as 1; writes 0 / 255.
BinaryMask read_mask(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const BinaryMask& mask);
void write_edges(const std::filesystem::path& path, const EdgeMap& edges);

/// JSON array of 106 [x, y] pairs.
Landmarks106 read_landmarks(const std::filesystem::path& path);
void write_landmarks(const std::filesystem::path& path, const Landmarks106& lm);

/// Quantizes to 8 bits and back, matching a PNG round trip.
ImageRGB quantize8(const ImageRGB& img);

}  // namespace faceerase::imaging
