#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "mfcal/liegroup.hpp"
#include "mfcal/sensing.hpp"

namespace mfcal {

struct TagObservation {
  int config_index = 0;
  Vec2 detected_center_px = Vec2::Zero();
  std::array<Vec2, 4> detected_corners_px{};  // ordered around the tag
  double tag_size = 0.05;                     // meters
  Pose tag_in_base;                           // tag frame in the robot base frame
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

// Population mean and standard deviation.
MeanStd mean_std(std::span<const double> values);

// Combines per-group statistics of equally sized groups: mean of means and
// sqrt(mean of variances + variance of means).
MeanStd propagate(std::span<const MeanStd> groups);

struct EvalResult {
  MeanStd mpd_px;
  MeanStd task_err_mm;
  bool success = false;
  std::vector<double> pixel_errors;
  std::vector<double> task_errors_mm;
};

inline constexpr double kDefaultSuccessThresholdMm = 25.0;
inline constexpr double kMinTagAreaPx = 1.0;

// Projects the tag center through camera_from_base and K. Throws BehindCamera
// when the center is not in front of the camera.
Vec2 reproject_tag(const Pose& camera_from_base, const TagObservation& tag, const CameraIntrinsics& K);

// Mean and population std of the pairwise Euclidean pixel distances.
MeanStd mpd(std::span<const Vec2> reprojected, std::span<const Vec2> detected);

// Expresses the reprojected center in the affine frame spanned by the detected
// tag edges (centered on the detected center, unit = one tag side) and scales
// the coordinate length by the tag size. Millimeters.
double tag_centric_error(const Pose& camera_from_base, const TagObservation& tag, const CameraIntrinsics& K);

bool classify_success(double task_err_mm, double threshold_mm);

EvalResult evaluate_pose(const Pose& camera_from_base, std::span<const TagObservation> tags,
                         const CameraIntrinsics& K, double threshold_mm = kDefaultSuccessThresholdMm);

// --- Monte Carlo cross validation ------------------------------------------

struct CvDataset {
  std::size_t num_configurations = 0;
  std::vector<TagObservation> tags;  // one per configuration, index = configuration
  CameraIntrinsics intrinsics;
  // Calibrates on the given configurations and returns camera_from_base, or
  // nullopt when the calibration failed.
  std::function<std::optional<Pose>(std::span<const std::size_t>)> calibrate;
};

struct CvOptions {
  std::vector<std::size_t> sizes{3, 6, 9, 12};
  std::size_t repeats = 5;
  std::uint64_t seed = 0;
  double threshold_mm = kDefaultSuccessThresholdMm;
};

struct CvRepeat {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  bool calibrated = false;
  std::optional<Pose> camera_from_base;
  EvalResult eval;
};

struct CvSizeResult {
  std::size_t size = 0;
  std::vector<CvRepeat> repeats;
  std::size_t successes = 0;
  double success_rate = 0.0;
  // Error statistics over successful repeats only; NaN when none succeeded.
  MeanStd mpd_px;
  MeanStd task_err_mm;
};

// Reproducible split for (seed, size, repeat): `size` training configurations
// drawn without replacement, the rest held out. Both lists sorted.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> cv_split(std::size_t num_configurations,
                                                                       std::size_t size, std::size_t repeat,
                                                                       std::uint64_t seed);

// For every size and repeat: calibrate on the training split, evaluate the
// held-out tags, classify. Sizes that leave no held-out configuration throw
// InsufficientConfigurations.
std::vector<CvSizeResult> monte_carlo_cv(const CvDataset& dataset, const CvOptions& options);

// Re-aggregates existing repeats at another success threshold.
CvSizeResult reclassify(const CvSizeResult& result, double threshold_mm);

}  // namespace mfcal
