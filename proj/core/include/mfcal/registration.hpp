#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "mfcal/kdtree.hpp"
#include "mfcal/kinematics.hpp"
#include "mfcal/liegroup.hpp"
#include "mfcal/sensing.hpp"

namespace mfcal {

// Frame convention: the registration unknown maps camera-frame observations
// into the robot base frame (base_from_camera). Its inverse, camera_from_base,
// is the calibration result written to disk.

inline constexpr std::size_t kMinCorrespondences = 6;
inline constexpr double kHuberTuning = 1.345;
inline constexpr double kMadToSigma = 0.6745;
inline constexpr double kMaxConditionNumber = 1e12;

struct CorrespondenceSet {
  std::vector<Vec3> model_points;
  std::vector<Vec3> model_normals;
  std::vector<Vec3> observed_points;
  std::vector<double> distances;
  std::vector<int> config_index;

  std::size_t size() const { return model_points.size(); }
};

struct IrlsSystem {
  Eigen::Matrix<double, Eigen::Dynamic, 6> A;
  Eigen::VectorXd B;
  Eigen::VectorXd W;
};

struct RegistrationConfig {
  double inner_tol = 1e-7;
  int max_inner = 20;
  double outer_tol = 1e-6;
  int max_outer = 50;
  double reject_initial = 0.10;
  double reject_decay = 0.7;
  double reject_floor = 0.01;
  std::size_t samples_per_link = kDefaultSamplesPerLink;
  // Acceptance thresholds for the converged flag.
  double converged_residual = 0.005;
  double min_match_fraction = 0.5;
  std::uint64_t seed = 0;
};

struct RegistrationReport {
  Pose base_from_camera;
  int iterations_outer = 0;
  int iterations_inner_total = 0;
  double final_median_residual = 0.0;
  double final_match_fraction = 0.0;
  bool converged = false;
  double wall_time = 0.0;

  Pose camera_from_base() const { return inverse(base_from_camera); }
};

// Per-configuration model clouds with one search index each.
class ModelIndex {
 public:
  explicit ModelIndex(std::vector<PosedModelCloud> clouds);

  std::size_t num_configurations() const { return clouds_.size(); }
  const PosedModelCloud& cloud(std::size_t c) const { return clouds_[c]; }
  const KdTree& tree(std::size_t c) const { return trees_[c]; }

 private:
  std::vector<PosedModelCloud> clouds_;
  std::vector<KdTree> trees_;
};

// Kabsch-Umeyama on per-configuration centroids; returns base_from_camera.
Pose initialize_centroid_kabsch(std::span<const PosedModelCloud> model_clouds, const ObservedCloud& observed);
Pose kabsch(std::span<const Vec3> from, std::span<const Vec3> to);

// Matches every observed point (transformed by theta) to its nearest model
// point of the same configuration; drops pairs farther than reject_dist.
CorrespondenceSet find_correspondences(const ModelIndex& model, const ObservedCloud& observed,
                                       const Pose& theta, double reject_dist);
CorrespondenceSet find_correspondences(std::span<const PosedModelCloud> model_clouds,
                                       const ObservedCloud& observed, const Pose& theta, double reject_dist);
// Exhaustive-search reference used for verification.
CorrespondenceSet find_correspondences_brute_force(std::span<const PosedModelCloud> model_clouds,
                                                   const ObservedCloud& observed, const Pose& theta,
                                                   double reject_dist);

// Point-to-plane residual rows a_i and b_i at theta with unit weights.
IrlsSystem assemble_system(const CorrespondenceSet& corr, const Pose& theta);

double median(std::vector<double> values);
double mad_sigma(const Eigen::VectorXd& B);
Eigen::VectorXd huber_weights(const Eigen::VectorXd& B, double kappa);
double huber_loss(const Eigen::VectorXd& residuals, double kappa);

// Weighted least squares step argmin sum_i W_i (a_i . d - b_i)^2, solved via
// LDLT normal equations.
Twist solve_weighted_step(const IrlsSystem& sys);

struct InnerLoopResult {
  Pose theta;
  int iterations = 0;
};

InnerLoopResult irls_inner_loop(const CorrespondenceSet& corr, const Pose& theta0, int max_inner, double tol);

RegistrationReport register_robot(const RobotModel& model, std::span<const JointConfiguration> qs,
                                  const ObservedCloud& observed, const RegistrationConfig& config,
                                  const std::optional<Pose>& initial = std::nullopt);

// Same as register_robot with already posed model clouds (one per configuration).
RegistrationReport register_clouds(std::span<const PosedModelCloud> model_clouds, const ObservedCloud& observed,
                                   const RegistrationConfig& config, const std::optional<Pose>& initial = std::nullopt);

}  // namespace mfcal
