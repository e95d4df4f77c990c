#include "mfcal/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <Eigen/Geometry>

#include "mfcal/errors.hpp"

namespace mfcal {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kTagMarginPx = 10.0;
constexpr double kUnboundedRevolute = std::numbers::pi;
constexpr double kUnboundedPrismatic = 0.1;

double sample_joint(const Joint& j, std::mt19937_64& rng) {
  double lo = j.lower, hi = j.upper;
  const double span = j.type == JointType::prismatic ? kUnboundedPrismatic : kUnboundedRevolute;
  if (!std::isfinite(lo)) lo = -span;
  if (!std::isfinite(hi)) hi = span;
  if (hi <= lo) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

bool inside(const CameraIntrinsics& K, const Vec2& px, double margin) {
  return px.x() >= margin && px.y() >= margin && px.x() <= K.width - 1 - margin && px.y() <= K.height - 1 - margin;
}

std::array<Vec3, 4> tag_corners_local(double size) {
  const double h = 0.5 * size;
  return {Vec3(-h, -h, 0.0), Vec3(h, -h, 0.0), Vec3(h, h, 0.0), Vec3(-h, h, 0.0)};
}

// Cosine between the tag normal and the direction to the camera; negative when
// the tag faces away. NaN when any corner is not in front of the camera or
// leaves the image.
double tag_visibility(const Pose& tag_in_camera, const CameraIntrinsics& K, double size) {
  for (const auto& c : tag_corners_local(size)) {
    const Vec3 p = apply(tag_in_camera, c);
    if (p.z() <= 0.1 || !inside(K, K.project(p), kTagMarginPx)) return std::numeric_limits<double>::quiet_NaN();
  }
  const Vec3 normal = tag_in_camera.rotation.col(2);
  return normal.dot(-tag_in_camera.translation.normalized());
}

Vec3 gauss3(std::normal_distribution<double>& gauss, std::mt19937_64& rng) {
  const double x = gauss(rng);
  const double y = gauss(rng);
  const double z = gauss(rng);
  return {x, y, z};
}

// Every mesh vertex in front of the camera and inside the image.
bool robot_in_view(const RobotModel& model, const LinkPoses& fk, const Pose& camera_from_base,
                   const CameraIntrinsics& K) {
  for (std::size_t li = 0; li < model.links().size(); ++li) {
    const Pose T = camera_from_base * fk.poses[li];
    for (const auto& v : model.links()[li].geometry.vertices) {
      const Vec3 p = apply(T, v);
      if (p.z() <= 0.1 || !inside(K, K.project(p), 0.0)) return false;
    }
  }
  return true;
}

std::vector<std::size_t> choose_without_replacement(std::size_t n, std::size_t k, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  k = std::min(k, n);
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

CameraIntrinsics default_synthetic_intrinsics() {
  CameraIntrinsics K;
  K.width = 1280;
  K.height = 720;
  K.fx = K.fy = 900.0;
  K.cx = 640.0;
  K.cy = 360.0;
  return K;
}

Pose look_at(const Vec3& eye, const Vec3& target) {
  const Vec3 z = (target - eye).normalized();
  Vec3 x = z.cross(Vec3::UnitZ());
  if (x.norm() < 1e-9) x = z.cross(Vec3::UnitX());
  x.normalize();
  const Vec3 y = z.cross(x);
  Pose base_from_camera;
  base_from_camera.rotation.col(0) = x;
  base_from_camera.rotation.col(1) = y;
  base_from_camera.rotation.col(2) = z;
  base_from_camera.translation = eye;
  return inverse(base_from_camera);
}

TagObservation synthesize_tag(const RobotModel& model, const JointConfiguration& q, int config_index,
                              const Pose& camera_from_base, const CameraIntrinsics& K, double tag_size,
                              const Pose& tag_mount) {
  const LinkPoses fk = forward_kinematics(model, q);
  TagObservation tag;
  tag.config_index = config_index;
  tag.tag_size = tag_size;
  tag.tag_in_base = fk.poses[model.end_link()] * tag_mount;
  const Pose tag_in_camera = camera_from_base * tag.tag_in_base;
  const Vec3 center = tag_in_camera.translation;
  if (center.z() <= 0.0) throw BehindCamera("synthetic tag is behind the camera");
  tag.detected_center_px = K.project(center);
  const auto corners = tag_corners_local(tag_size);
  for (int i = 0; i < 4; ++i) tag.detected_corners_px[i] = K.project(apply(tag_in_camera, corners[i]));
  return tag;
}

SyntheticScene generate_synthetic_scene(const RobotModel& model, const SyntheticSceneConfig& cfg) {
  if (!(cfg.noise_mm >= 0.0)) throw std::invalid_argument("noise_mm must be >= 0");
  if (!(cfg.outlier_frac >= 0.0 && cfg.outlier_frac < 1.0)) throw std::invalid_argument("outlier_frac must be in [0, 1)");
  if (!cfg.intrinsics.is_valid()) throw std::invalid_argument("invalid synthetic intrinsics");

  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32), 0x5ce7eu};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const CameraIntrinsics& K = cfg.intrinsics;

  const ModelSurface surface = sample_model_surface(model, cfg.samples_per_link, cfg.surface_seed);
  if (surface.link_frame.points.empty()) throw DegenerateMesh("robot has no visual geometry to observe");

  // Camera aimed at the zero-configuration surface centroid.
  const JointConfiguration zero{std::vector<double>(model.dof(), 0.0)};
  const PosedModelCloud rest = pose_surface(surface, forward_kinematics(model, zero));
  Vec3 target = Vec3::Zero();
  for (const auto& p : rest.points) target += p;
  target /= static_cast<double>(rest.points.size());

  SyntheticScene scene;
  scene.intrinsics = K;
  // Camera poses are redrawn until the zero configuration is fully in view.
  for (int attempt = 0; attempt < std::max(1, cfg.max_camera_attempts); ++attempt) {
    const double distance = cfg.min_distance + (cfg.max_distance - cfg.min_distance) * uni(rng);
    const double azimuth = 2.0 * std::numbers::pi * uni(rng);
    const double elevation =
        (cfg.min_elevation_deg + (cfg.max_elevation_deg - cfg.min_elevation_deg) * uni(rng)) * kDeg;
    const Vec3 eye = target + distance * Vec3(std::cos(elevation) * std::cos(azimuth),
                                              std::cos(elevation) * std::sin(azimuth), std::sin(elevation));
    scene.true_pose = look_at(eye, target);
    if (robot_in_view(model, forward_kinematics(model, zero), scene.true_pose, K)) break;
  }
  const Pose& T = scene.true_pose;

  const double min_cos = std::cos(cfg.max_tag_tilt_deg * kDeg);
  const double sigma = cfg.noise_mm * 1e-3;
  std::normal_distribution<double> gauss(0.0, 1.0);

  for (std::size_t c = 0; c < cfg.n_configs; ++c) {
    // Joint sampling, rejecting configurations with the robot partly out of
    // view or the tag turned away.
    JointConfiguration q;
    JointConfiguration best;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int attempt = 0; attempt < std::max(1, cfg.max_config_attempts); ++attempt) {
      q.values.clear();
      for (std::size_t slot : model.movable_joints()) q.values.push_back(sample_joint(model.joints()[slot], rng));
      const LinkPoses fk = forward_kinematics(model, q);
      const Pose tag_in_camera = T * fk.poses[model.end_link()] * cfg.tag_mount;
      const double score = tag_visibility(tag_in_camera, K, cfg.tag_size);
      if (std::isnan(score) || !robot_in_view(model, fk, T, K)) continue;
      if (score > best_score) {
        best_score = score;
        best = q;
      }
      if (score >= min_cos) break;
    }
    if (best.values.size() == model.dof()) q = best;
    scene.qs.push_back(q);

    // Visible-hemisphere culling of the shared surface samples.
    const PosedModelCloud posed = pose_surface(surface, forward_kinematics(model, q));
    std::vector<Vec3> visible;
    for (std::size_t i = 0; i < posed.size(); ++i) {
      const Vec3 p = apply(T, posed.points[i]);
      const Vec3 n = T.rotation * posed.normals[i];
      if (p.z() <= 0.0 || n.dot(-p) <= 0.0 || !inside(K, K.project(p), 0.0)) continue;
      visible.push_back(p);
    }
    std::vector<Vec3> points;
    for (std::size_t i : choose_without_replacement(visible.size(), cfg.points_per_config, rng))
      points.push_back(visible[i]);

    if (sigma > 0.0)
      for (auto& p : points) p += sigma * gauss3(gauss, rng);

    const auto n_out = static_cast<std::size_t>(std::llround(cfg.outlier_frac * static_cast<double>(points.size())));
    for (std::size_t i : choose_without_replacement(points.size(), n_out, rng)) {
      Vec3 dir = gauss3(gauss, rng);
      if (dir.norm() < 1e-12) dir = Vec3::UnitZ();
      const double radius = cfg.clutter_radius * std::cbrt(uni(rng));
      Vec3 p = points[i] + radius * dir.normalized();
      if (p.z() <= 0.0) p.z() = std::abs(p.z()) + 1e-3;
      points[i] = p;
    }

    scene.observed.points.insert(scene.observed.points.end(), points.begin(), points.end());
    scene.observed.config_index.insert(scene.observed.config_index.end(), points.size(), static_cast<int>(c));
    scene.tag_obs.push_back(synthesize_tag(model, q, static_cast<int>(c), T, K, cfg.tag_size, cfg.tag_mount));
  }
  return scene;
}

SyntheticScene generate_synthetic_scene(const RobotModel& model, std::size_t n_configs, double noise_mm,
                                        double outlier_frac, std::uint64_t seed) {
  SyntheticSceneConfig cfg;
  cfg.n_configs = n_configs;
  cfg.noise_mm = noise_mm;
  cfg.outlier_frac = outlier_frac;
  cfg.seed = seed;
  return generate_synthetic_scene(model, cfg);
}

SyntheticScene select_configurations(const SyntheticScene& scene, std::span<const std::size_t> configs) {
  SyntheticScene out;
  out.true_pose = scene.true_pose;
  out.intrinsics = scene.intrinsics;
  for (std::size_t k = 0; k < configs.size(); ++k) {
    const std::size_t c = configs[k];
    if (c >= scene.qs.size()) throw std::out_of_range("configuration index out of range");
    out.qs.push_back(scene.qs[c]);
    TagObservation tag = scene.tag_obs.at(c);
    tag.config_index = static_cast<int>(k);
    out.tag_obs.push_back(tag);
    for (std::size_t i = 0; i < scene.observed.size(); ++i) {
      if (scene.observed.config_index[i] != static_cast<int>(c)) continue;
      out.observed.points.push_back(scene.observed.points[i]);
      out.observed.config_index.push_back(static_cast<int>(k));
    }
  }
  return out;
}

}  // namespace mfcal
