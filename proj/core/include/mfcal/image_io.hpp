#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mfcal/sensing.hpp"

namespace mfcal {

// Single-channel grayscale image as stored on disk.
struct GrayImage {
  int width = 0, height = 0;
  int bit_depth = 8;  // 8 or 16
  std::vector<std::uint16_t> pixels;
};

GrayImage read_gray_png(const std::filesystem::path& path);
void write_gray_png(const GrayImage& image, const std::filesystem::path& path);

// 16-bit millimeter depth PNG, 0 = invalid.
DepthMap read_depth_png(const std::filesystem::path& path);
void write_depth_png(const DepthMap& depth, const std::filesystem::path& path);

// 8-bit mask PNG, nonzero = robot.
SegmentationMask read_mask_png(const std::filesystem::path& path);
void write_mask_png(const SegmentationMask& mask, const std::filesystem::path& path);

}  // namespace mfcal
