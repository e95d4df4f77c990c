#include "mfcal/liegroup.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/SVD>

#include "mfcal/errors.hpp"

namespace mfcal {

namespace {

// Coefficients shared by the SO(3) exponential and the left Jacobian:
//   a = sin(t)/t,  b = (1 - cos t)/t^2,  c = (t - sin t)/t^3
struct RodriguesCoefficients {
  double a, b, c;
};

RodriguesCoefficients rodrigues_coefficients(double angle) {
  const double t2 = angle * angle;
  if (angle < kSmallAngle) {
    const double t4 = t2 * t2;
    return {1.0 - t2 / 6.0 + t4 / 120.0,
            0.5 - t2 / 24.0 + t4 / 720.0,
            1.0 / 6.0 - t2 / 120.0 + t4 / 5040.0};
  }
  const double s = std::sin(angle);
  const double half = std::sin(0.5 * angle);
  return {s / angle, 2.0 * half * half / t2, (angle - s) / (t2 * angle)};
}

}  // namespace

Pose Pose::from_matrix(const Mat4& m) {
  Pose p;
  p.rotation = m.topLeftCorner<3, 3>();
  p.translation = m.topRightCorner<3, 1>();
  return p;
}

Mat4 Pose::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

bool Pose::is_valid(double tol) const {
  if (!rotation.allFinite() || !translation.allFinite()) return false;
  if ((rotation.transpose() * rotation - Mat3::Identity()).norm() > tol) return false;
  return std::abs(rotation.determinant() - 1.0) <= tol;
}

Mat3 hat_so3(const Vec3& w) {
  Mat3 m;
  m << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
       -w.y(), w.x(), 0.0;
  return m;
}

Vec3 vee_so3(const Mat3& m) { return {m(2, 1), m(0, 2), m(1, 0)}; }

Mat4 hat_se3(const Twist& theta) {
  Mat4 m = Mat4::Zero();
  m.topLeftCorner<3, 3>() = hat_so3(theta.omega);
  m.topRightCorner<3, 1>() = theta.tau;
  return m;
}

Mat3 exp_so3(const Vec3& omega) {
  const auto k = rodrigues_coefficients(omega.norm());
  const Mat3 w = hat_so3(omega);
  return Mat3::Identity() + k.a * w + k.b * w * w;
}

Mat3 left_jacobian(const Vec3& omega) {
  const auto k = rodrigues_coefficients(omega.norm());
  const Mat3 w = hat_so3(omega);
  return Mat3::Identity() + k.b * w + k.c * w * w;
}

Pose exp_se3(const Twist& theta) {
  const auto k = rodrigues_coefficients(theta.omega.norm());
  const Mat3 w = hat_so3(theta.omega);
  const Mat3 w2 = w * w;
  Pose p;
  p.rotation = Mat3::Identity() + k.a * w + k.b * w2;
  p.translation = (Mat3::Identity() + k.b * w + k.c * w2) * theta.tau;
  return p;
}

Mat4 exp_se3_linearized(const Twist& theta) { return Mat4::Identity() + hat_se3(theta); }

double rotation_angle(const Mat3& r) {
  const double s = 0.5 * vee_so3(r - r.transpose()).norm();
  const double c = 0.5 * (r.trace() - 1.0);
  return std::atan2(s, c);
}

Vec3 log_so3(const Mat3& r) {
  const double angle = rotation_angle(r);
  if (angle > std::numbers::pi - kLogBranchMargin) {
    throw AngleNearPi("rotation angle " + std::to_string(angle) +
                      " rad is too close to pi for a unique logarithm");
  }
  const Vec3 v = vee_so3(r - r.transpose());
  if (angle < kSmallAngle) {
    return 0.5 * (1.0 + angle * angle / 6.0) * v;
  }
  if (angle < 3.0) {
    return angle / (2.0 * std::sin(angle)) * v;
  }
  // Close to pi the antisymmetric part vanishes; take the axis from the
  // symmetric part and its sign from the antisymmetric one.
  const double c = std::cos(angle);
  const Mat3 aat = (0.5 * (r + r.transpose()) - c * Mat3::Identity()) / (1.0 - c);
  Eigen::Index col = 0;
  aat.diagonal().maxCoeff(&col);
  Vec3 axis = aat.col(col) / std::sqrt(aat(col, col));
  if (axis.dot(v) < 0.0) axis = -axis;
  return angle * axis.normalized();
}

Twist log_se3(const Pose& pose) {
  Twist out;
  out.omega = log_so3(pose.rotation);
  const double angle = out.omega.norm();
  const Mat3 w = hat_so3(out.omega);
  double d;
  if (angle < kSmallAngle) {
    const double t2 = angle * angle;
    d = 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0;
  } else {
    const double half = std::sin(0.5 * angle);
    d = (1.0 - angle * std::sin(angle) / (4.0 * half * half)) / (angle * angle);
  }
  const Mat3 inv_left = Mat3::Identity() - 0.5 * w + d * w * w;
  out.tau = inv_left * pose.translation;
  return out;
}

Mat3 nearest_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;
  return u * v.transpose();
}

Pose compose(const Pose& a, const Pose& b) {
  Pose p;
  p.rotation = a.rotation * b.rotation;
  p.translation = a.rotation * b.translation + a.translation;
  p.compositions = a.compositions + b.compositions + 1;
  if (p.compositions >= kRenormalizeEvery) {
    p.rotation = nearest_rotation(p.rotation);
    p.compositions = 0;
  }
  return p;
}

Pose inverse(const Pose& a) {
  Pose p;
  p.rotation = a.rotation.transpose();
  p.translation = -(p.rotation * a.translation);
  p.compositions = a.compositions;
  return p;
}

Vec3 apply(const Pose& a, const Vec3& p) { return a.rotation * p + a.translation; }

}  // namespace mfcal
