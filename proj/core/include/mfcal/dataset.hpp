#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mfcal/evaluation.hpp"
#include "mfcal/kinematics.hpp"
#include "mfcal/registration.hpp"
#include "mfcal/sensing.hpp"
#include "mfcal/synthetic.hpp"

namespace mfcal {

namespace fs = std::filesystem;

// On-disk dataset layout. Paths in the manifest are relative to its directory.
//
// manifest.json
//   { "intrinsics": "intrinsics.json", "robot": "robot/robot.urdf",
//     "mesh_root": "robot", "ground_truth": "ground_truth.json",     (optional)
//     "configurations": [ { "joints": "...", "depth": "...", "mask": "...",
//                           "tag": "..." (optional) }, ... ] }
struct ConfigurationEntry {
  fs::path joints;
  fs::path depth;
  fs::path mask;
  std::optional<fs::path> tag;
};

struct DatasetManifest {
  fs::path root;  // directory of manifest.json; other paths are absolute after loading
  fs::path intrinsics;
  fs::path robot;
  fs::path mesh_root;
  std::optional<fs::path> ground_truth;
  std::vector<ConfigurationEntry> configurations;
};

// Throws DatasetError naming the first missing or malformed entry. A top-level
// "format" field other than "mfcal" dispatches to a registered importer.
DatasetManifest load_manifest(const fs::path& manifest_path);

// Reader for a foreign dataset layout; returns absolute paths. The result is
// validated like a native manifest.
using ManifestImporter = std::function<DatasetManifest(const fs::path& manifest_path)>;
void register_manifest_importer(const std::string& format, ManifestImporter importer);

CameraIntrinsics load_intrinsics(const fs::path& path);
void save_intrinsics(const fs::path& path, const CameraIntrinsics& K);

// JSON array in chain order; {"joints": [...]} is accepted as well.
JointConfiguration load_joints(const fs::path& path);
void save_joints(const fs::path& path, const JointConfiguration& q);

// {"camera_T_base": [16 numbers, row-major]}
Pose load_pose(const fs::path& path);
void save_pose(const fs::path& path, const Pose& camera_from_base);

TagObservation load_tag(const fs::path& path, int config_index);
void save_tag(const fs::path& path, const TagObservation& tag);

// Registration parameters plus the sensing knobs. Unknown keys are rejected.
struct PipelineConfig {
  RegistrationConfig registration;
  int band_px = 0;  // 0: default_band_px(image width)
  int stride = 2;
  double max_depth_jump = 0.05;
};

PipelineConfig parse_pipeline_config(const std::string& json_text);
PipelineConfig load_pipeline_config(const fs::path& path);

std::string report_to_json(const RegistrationReport& report);
std::string link_poses_to_json(const LinkPoses& poses);

// Per-configuration depth + mask to camera-frame cloud.
std::vector<Vec3> observe_configuration(const DepthMap& depth, const SegmentationMask& mask,
                                        const CameraIntrinsics& K, const PipelineConfig& config);

struct LoadedDataset {
  DatasetManifest manifest;
  CameraIntrinsics intrinsics;
  RobotModel robot;
  std::vector<JointConfiguration> qs;
  std::vector<std::vector<Vec3>> clouds;  // per configuration, camera frame
  std::vector<std::optional<TagObservation>> tags;
  std::optional<Pose> ground_truth;  // camera_from_base
};

LoadedDataset load_dataset(const fs::path& manifest_path, const PipelineConfig& config);

// Fused observation of the selected configurations, renumbered 0..n-1.
ObservedCloud fuse_selected(const LoadedDataset& data, std::span<const std::size_t> configs);

struct SynthDatasetOptions {
  SyntheticSceneConfig scene;
  double noise_mm = 0.0;
  double outlier_frac = 0.0;
};

// Renders a synthetic scene to the manifest layout under out_dir, copying the
// robot description and meshes so the directory is self-contained.
void write_synthetic_dataset(const fs::path& urdf_path, const fs::path& mesh_root, const SynthDatasetOptions& options,
                             const fs::path& out_dir);

}  // namespace mfcal
