#include "mfcal/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mfcal {

RenderedView render_robot(const RobotModel& model, const LinkPoses& link_poses, const Pose& camera_from_base,
                          const CameraIntrinsics& K, double near_plane) {
  RenderedView view{DepthMap(K.width, K.height), SegmentationMask(K.width, K.height)};
  std::vector<double> zbuf(std::size_t(K.width) * K.height, std::numeric_limits<double>::infinity());

  for (std::size_t li = 0; li < model.links().size(); ++li) {
    const TriangleMesh& mesh = model.links()[li].geometry;
    if (mesh.triangles.empty()) continue;
    const Pose T = camera_from_base * link_poses.poses[li];
    std::vector<Vec3> cam(mesh.vertices.size());
    for (std::size_t v = 0; v < cam.size(); ++v) cam[v] = apply(T, mesh.vertices[v]);

    for (const auto& tri : mesh.triangles) {
      const Vec3& a = cam[tri[0]];
      const Vec3& b = cam[tri[1]];
      const Vec3& c = cam[tri[2]];
      if (a.z() < near_plane || b.z() < near_plane || c.z() < near_plane) continue;
      const Vec2 pa = K.project(a), pb = K.project(b), pc = K.project(c);
      const double area = (pb - pa).x() * (pc - pa).y() - (pb - pa).y() * (pc - pa).x();
      if (std::abs(area) < 1e-12) continue;

      const int u0 = std::max(0, static_cast<int>(std::ceil(std::min({pa.x(), pb.x(), pc.x()}))));
      const int u1 = std::min(K.width - 1, static_cast<int>(std::floor(std::max({pa.x(), pb.x(), pc.x()}))));
      const int v0 = std::max(0, static_cast<int>(std::ceil(std::min({pa.y(), pb.y(), pc.y()}))));
      const int v1 = std::min(K.height - 1, static_cast<int>(std::floor(std::max({pa.y(), pb.y(), pc.y()}))));

      for (int v = v0; v <= v1; ++v) {
        for (int u = u0; u <= u1; ++u) {
          const Vec2 p(u, v);
          // Barycentric weights from signed sub-areas.
          const double wa = ((pb - p).x() * (pc - p).y() - (pb - p).y() * (pc - p).x()) / area;
          const double wb = ((pc - p).x() * (pa - p).y() - (pc - p).y() * (pa - p).x()) / area;
          const double wc = 1.0 - wa - wb;
          if (wa < 0.0 || wb < 0.0 || wc < 0.0) continue;
          // 1/z is affine in screen space.
          const double z = 1.0 / (wa / a.z() + wb / b.z() + wc / c.z());
          const std::size_t idx = std::size_t(v) * K.width + u;
          if (z < zbuf[idx]) zbuf[idx] = z;
        }
      }
    }
  }
  for (int v = 0; v < K.height; ++v) {
    for (int u = 0; u < K.width; ++u) {
      const double z = zbuf[std::size_t(v) * K.width + u];
      if (!std::isfinite(z)) continue;
      view.depth.set(u, v, z);
      view.mask.set(u, v, true);
    }
  }
  return view;
}

void corrupt_depth(DepthMap& depth, const SegmentationMask& mask, const DepthCorruption& c, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      if (!depth.is_valid(u, v) || !mask.at(u, v)) continue;
      double z = depth.at(u, v);
      if (c.noise_mm > 0.0) z += c.noise_mm * 1e-3 * gauss(rng);
      if (c.outlier_frac > 0.0 && uni(rng) < c.outlier_frac) z += c.outlier_range * (2.0 * uni(rng) - 1.0);
      if (c.quantize_mm) z = std::round(z * 1000.0) / 1000.0;
      depth.set(u, v, z);
    }
  }
}

}  // namespace mfcal
