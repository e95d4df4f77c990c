#pragma once

#include <cstdint>
#include <vector>

#include "mfcal/evaluation.hpp"
#include "mfcal/kinematics.hpp"
#include "mfcal/liegroup.hpp"
#include "mfcal/sensing.hpp"

namespace mfcal {

// Depth-camera-like intrinsics used for generated scenes.
CameraIntrinsics default_synthetic_intrinsics();

struct SyntheticSceneConfig {
  std::size_t n_configs = 15;
  double noise_mm = 0.0;
  double outlier_frac = 0.0;
  std::uint64_t seed = 0;

  CameraIntrinsics intrinsics = default_synthetic_intrinsics();
  double min_distance = 0.8;
  double max_distance = 2.0;
  double min_elevation_deg = 15.0;
  double max_elevation_deg = 60.0;

  std::size_t points_per_config = 2000;
  double clutter_radius = 0.20;

  // Must match the registration's surface sampler so noiseless scenes have an
  // exact fixed point at the true pose.
  std::size_t samples_per_link = kDefaultSamplesPerLink;
  std::uint64_t surface_seed = 0;

  double tag_size = 0.05;
  Pose tag_mount = Pose{Mat3::Identity(), Vec3(0.0, 0.0, 0.03), 0};  // in the end link frame
  double max_tag_tilt_deg = 60.0;
  int max_camera_attempts = 100;
  int max_config_attempts = 500;
};

struct SyntheticScene {
  Pose true_pose;  // camera_from_base
  std::vector<JointConfiguration> qs;
  ObservedCloud observed;
  std::vector<TagObservation> tag_obs;
  CameraIntrinsics intrinsics;
};

// Look-at camera pose: camera z toward target, x to the right, y down, with
// base +z as the up direction. Returns camera_from_base.
Pose look_at(const Vec3& eye, const Vec3& target);

// Tag observation for one configuration, projected exactly through
// camera_from_base (no detection noise).
TagObservation synthesize_tag(const RobotModel& model, const JointConfiguration& q, int config_index,
                              const Pose& camera_from_base, const CameraIntrinsics& K, double tag_size,
                              const Pose& tag_mount);

SyntheticScene generate_synthetic_scene(const RobotModel& model, const SyntheticSceneConfig& config);

SyntheticScene generate_synthetic_scene(const RobotModel& model, std::size_t n_configs, double noise_mm,
                                        double outlier_frac, std::uint64_t seed);

// Sub-scene restricted to the given configurations, renumbered 0..n-1.
SyntheticScene select_configurations(const SyntheticScene& scene, std::span<const std::size_t> configs);

}  // namespace mfcal
