#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mfcal/liegroup.hpp"

namespace mfcal {

struct CameraIntrinsics {
  double fx = 0.0, fy = 0.0;
  double cx = 0.0, cy = 0.0;
  int width = 0, height = 0;

  bool is_valid() const {
    return fx > 0.0 && fy > 0.0 && cx >= 0.0 && cx < width && cy >= 0.0 && cy < height;
  }
  Vec2 project(const Vec3& p) const { return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy}; }
};

inline constexpr double kMaxDepth = 20.0;

// Row-major depth along the optical axis in meters plus per-pixel validity.
struct DepthMap {
  int width = 0, height = 0;
  std::vector<double> values;
  std::vector<std::uint8_t> valid;

  DepthMap() = default;
  DepthMap(int w, int h) : width(w), height(h), values(std::size_t(w) * h, 0.0), valid(std::size_t(w) * h, 0) {}

  std::size_t index(int u, int v) const { return std::size_t(v) * width + u; }
  bool is_valid(int u, int v) const { return valid[index(u, v)] != 0; }
  double at(int u, int v) const { return values[index(u, v)]; }
  // Stores z and marks the pixel valid iff z is finite and in (0, kMaxDepth].
  void set(int u, int v, double z);
};

// Row-major boolean mask, true = robot pixel.
struct SegmentationMask {
  int width = 0, height = 0;
  std::vector<std::uint8_t> values;

  SegmentationMask() = default;
  SegmentationMask(int w, int h, bool fill = false)
      : width(w), height(h), values(std::size_t(w) * h, fill ? 1 : 0) {}

  std::size_t index(int u, int v) const { return std::size_t(v) * width + u; }
  bool at(int u, int v) const { return values[index(u, v)] != 0; }
  void set(int u, int v, bool on) { values[index(u, v)] = on ? 1 : 0; }
  std::size_t count() const;
};

// Camera-frame points fused across configurations.
struct ObservedCloud {
  std::vector<Vec3> points;
  std::vector<int> config_index;

  std::size_t size() const { return points.size(); }
  int num_configurations() const;
};

// 3x3 (8-connected) binary erosion applied band_px times; pixels outside the
// image count as background.
SegmentationMask erode(const SegmentationMask& mask, int band_px);

// mask AND NOT erode(mask, band_px): keeps a band of band_px pixels along the
// segmentation boundary.
SegmentationMask erode_to_boundary(const SegmentationMask& mask, int band_px);

// Band width used when none is configured: 3 px at 1280 px image width,
// scaled with width, at least 1.
int default_band_px(int image_width);

// Invalidates pixels whose depth differs by more than max_jump meters from any
// valid 8-neighbour (flying pixels at silhouettes).
DepthMap invalidate_depth_edges(const DepthMap& depth, double max_jump = 0.05);

// Back-projects masked valid pixels sampled every `stride` pixels in u and v:
// z * ((u - cx) / fx, (v - cy) / fy, 1).
std::vector<Vec3> depth_to_cloud(const DepthMap& depth, const SegmentationMask& mask,
                                 const CameraIntrinsics& K, int stride = 2);

// Concatenates per-configuration clouds tagging each point with its source
// index. Throws EmptyObservation when every input is empty.
ObservedCloud fuse_clouds(std::span<const std::vector<Vec3>> per_config);

}  // namespace mfcal
