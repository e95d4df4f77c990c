#include "mfcal/sensing.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mfcal/errors.hpp"

namespace mfcal {

void DepthMap::set(int u, int v, double z) {
  const std::size_t i = index(u, v);
  values[i] = z;
  valid[i] = (std::isfinite(z) && z > 0.0 && z <= kMaxDepth) ? 1 : 0;
}

std::size_t SegmentationMask::count() const {
  return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [](auto b) { return b != 0; }));
}

int ObservedCloud::num_configurations() const {
  if (config_index.empty()) return 0;
  return *std::max_element(config_index.begin(), config_index.end()) + 1;
}

SegmentationMask erode(const SegmentationMask& mask, int band_px) {
  SegmentationMask cur = mask;
  SegmentationMask next(mask.width, mask.height);
  for (int pass = 0; pass < band_px; ++pass) {
    for (int v = 0; v < mask.height; ++v) {
      for (int u = 0; u < mask.width; ++u) {
        bool keep = cur.at(u, v);
        for (int dv = -1; keep && dv <= 1; ++dv) {
          for (int du = -1; keep && du <= 1; ++du) {
            const int uu = u + du, vv = v + dv;
            if (uu < 0 || vv < 0 || uu >= mask.width || vv >= mask.height || !cur.at(uu, vv)) keep = false;
          }
        }
        next.set(u, v, keep);
      }
    }
    std::swap(cur, next);
  }
  return cur;
}

SegmentationMask erode_to_boundary(const SegmentationMask& mask, int band_px) {
  if (band_px < 1) throw std::invalid_argument("erode_to_boundary: band_px must be >= 1");
  const SegmentationMask inner = erode(mask, band_px);
  SegmentationMask out(mask.width, mask.height);
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    out.values[i] = (mask.values[i] && !inner.values[i]) ? 1 : 0;
  }
  return out;
}

int default_band_px(int image_width) {
  return std::max(1, static_cast<int>(std::lround(3.0 * image_width / 1280.0)));
}

DepthMap invalidate_depth_edges(const DepthMap& depth, double max_jump) {
  DepthMap out = depth;
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      if (!depth.is_valid(u, v)) continue;
      const double z = depth.at(u, v);
      for (int dv = -1; dv <= 1; ++dv) {
        for (int du = -1; du <= 1; ++du) {
          const int uu = u + du, vv = v + dv;
          if ((du == 0 && dv == 0) || uu < 0 || vv < 0 || uu >= depth.width || vv >= depth.height) continue;
          if (depth.is_valid(uu, vv) && std::abs(depth.at(uu, vv) - z) > max_jump) {
            out.valid[out.index(u, v)] = 0;
          }
        }
      }
    }
  }
  return out;
}

std::vector<Vec3> depth_to_cloud(const DepthMap& depth, const SegmentationMask& mask,
                                 const CameraIntrinsics& K, int stride) {
  if (stride < 1) throw std::invalid_argument("depth_to_cloud: stride must be >= 1");
  if (depth.width != mask.width || depth.height != mask.height) {
    throw DimensionMismatch("depth map and mask dimensions differ");
  }
  std::vector<Vec3> points;
  for (int v = 0; v < depth.height; v += stride) {
    for (int u = 0; u < depth.width; u += stride) {
      if (!mask.at(u, v) || !depth.is_valid(u, v)) continue;
      const double z = depth.at(u, v);
      points.emplace_back(z * (u - K.cx) / K.fx, z * (v - K.cy) / K.fy, z);
    }
  }
  return points;
}

ObservedCloud fuse_clouds(std::span<const std::vector<Vec3>> per_config) {
  ObservedCloud out;
  for (std::size_t c = 0; c < per_config.size(); ++c) {
    out.points.insert(out.points.end(), per_config[c].begin(), per_config[c].end());
    out.config_index.insert(out.config_index.end(), per_config[c].size(), static_cast<int>(c));
  }
  if (out.points.empty()) throw EmptyObservation("no observed points in any configuration");
  return out;
}

}  // namespace mfcal
