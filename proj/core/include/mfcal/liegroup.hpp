#pragma once

#include <Eigen/Dense>

namespace mfcal {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

// Below this rotation angle the Rodrigues / left-Jacobian coefficients are
// evaluated from their Taylor expansions.
inline constexpr double kSmallAngle = 1e-4;

// Rotations closer than this to pi have no unique logarithm.
inline constexpr double kLogBranchMargin = 1e-6;

// Number of compositions after which compose() re-projects the rotation onto
// SO(3).
inline constexpr int kRenormalizeEvery = 50;

// Rigid transform stored as rotation + translation.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  // Compositions accumulated since the rotation was last re-orthonormalized.
  int compositions = 0;

  static Pose identity() { return {}; }
  static Pose from_matrix(const Mat4& m);

  Mat4 matrix() const;
  bool is_valid(double tol = 1e-9) const;
};

// se(3) increment: rotation part first, translation second.
struct Twist {
  Vec3 omega = Vec3::Zero();
  Vec3 tau = Vec3::Zero();

  static Twist from_vector(const Vec6& v) { return {v.head<3>(), v.tail<3>()}; }
  Vec6 vector() const {
    Vec6 v;
    v << omega, tau;
    return v;
  }
  double norm() const { return vector().norm(); }
  bool is_finite() const { return omega.allFinite() && tau.allFinite(); }
};

Mat3 hat_so3(const Vec3& omega);
Vec3 vee_so3(const Mat3& m);
Mat4 hat_se3(const Twist& theta);

Mat3 exp_so3(const Vec3& omega);
Mat3 left_jacobian(const Vec3& omega);
Pose exp_se3(const Twist& theta);

// First-order approximation I + hat_se3(theta).
Mat4 exp_se3_linearized(const Twist& theta);

// Principal-branch logarithms. Throw AngleNearPi within kLogBranchMargin of pi.
Vec3 log_so3(const Mat3& rotation);
Twist log_se3(const Pose& pose);

Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& a);
Vec3 apply(const Pose& a, const Vec3& p);

inline Pose operator*(const Pose& a, const Pose& b) { return compose(a, b); }
inline Vec3 operator*(const Pose& a, const Vec3& p) { return apply(a, p); }

// Nearest rotation in the Frobenius sense (polar decomposition).
Mat3 nearest_rotation(const Mat3& m);

double rotation_angle(const Mat3& rotation);

}  // namespace mfcal
