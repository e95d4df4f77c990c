#pragma once

#include <cstdint>
#include <random>

#include "mfcal/kinematics.hpp"
#include "mfcal/liegroup.hpp"
#include "mfcal/sensing.hpp"

namespace mfcal {

struct RenderedView {
  DepthMap depth;
  SegmentationMask mask;
};

// Z-buffer rasterization of the posed link meshes. Pixel (u, v) samples the ray
// through its integer coordinates, matching depth_to_cloud. Triangles with a
// vertex closer than near_plane are skipped.
RenderedView render_robot(const RobotModel& model, const LinkPoses& link_poses, const Pose& camera_from_base,
                          const CameraIntrinsics& K, double near_plane = 0.05);

struct DepthCorruption {
  double noise_mm = 0.0;      // Gaussian sigma on depth
  double outlier_frac = 0.0;  // fraction of robot pixels displaced along the ray
  double outlier_range = 0.20;
  bool quantize_mm = true;
};

// Perturbs the valid masked pixels in place.
void corrupt_depth(DepthMap& depth, const SegmentationMask& mask, const DepthCorruption& c, std::mt19937_64& rng);

}  // namespace mfcal
