#include "mfcal/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "mfcal/errors.hpp"

namespace mfcal {

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / n)};
}

MeanStd propagate(std::span<const MeanStd> groups) {
  if (groups.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  const double n = static_cast<double>(groups.size());
  double mean = 0.0, mean_var = 0.0;
  for (const auto& g : groups) {
    mean += g.mean;
    mean_var += g.std * g.std;
  }
  mean /= n;
  mean_var /= n;
  double var_of_means = 0.0;
  for (const auto& g : groups) var_of_means += (g.mean - mean) * (g.mean - mean);
  var_of_means /= n;
  return {mean, std::sqrt(mean_var + var_of_means)};
}

Vec2 reproject_tag(const Pose& camera_from_base, const TagObservation& tag, const CameraIntrinsics& K) {
  const Vec3 p = apply(camera_from_base, tag.tag_in_base.translation);
  if (!(p.z() > 0.0)) throw BehindCamera("tag center is behind the camera (z = " + std::to_string(p.z()) + ")");
  return K.project(p);
}

MeanStd mpd(std::span<const Vec2> reprojected, std::span<const Vec2> detected) {
  if (reprojected.size() != detected.size())
    throw DimensionMismatch("mpd: " + std::to_string(reprojected.size()) + " reprojected vs " +
                            std::to_string(detected.size()) + " detected points");
  std::vector<double> d(reprojected.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = (reprojected[i] - detected[i]).norm();
  return mean_std(d);
}

namespace {

double shoelace_area(const std::array<Vec2, 4>& p) {
  double s = 0.0;
  for (int i = 0; i < 4; ++i) {
    const Vec2& a = p[i];
    const Vec2& b = p[(i + 1) % 4];
    s += a.x() * b.y() - b.x() * a.y();
  }
  return 0.5 * std::abs(s);
}

}  // namespace

double tag_centric_error(const Pose& camera_from_base, const TagObservation& tag, const CameraIntrinsics& K) {
  const auto& c = tag.detected_corners_px;
  if (!(shoelace_area(c) >= kMinTagAreaPx)) throw DegenerateTag("detected tag quadrilateral has (near) zero area");
  const Vec2 e_u = 0.5 * ((c[1] - c[0]) + (c[2] - c[3]));
  const Vec2 e_v = 0.5 * ((c[3] - c[0]) + (c[2] - c[1]));
  Eigen::Matrix2d frame;
  frame.col(0) = e_u;
  frame.col(1) = e_v;
  if (!(std::abs(frame.determinant()) >= kMinTagAreaPx)) throw DegenerateTag("tag edge vectors are collinear");
  const Vec2 r = reproject_tag(camera_from_base, tag, K);
  const Vec2 ab = frame.partialPivLu().solve(r - tag.detected_center_px);
  return ab.norm() * tag.tag_size * 1000.0;
}

bool classify_success(double task_err_mm, double threshold_mm) { return task_err_mm <= threshold_mm; }

EvalResult evaluate_pose(const Pose& camera_from_base, std::span<const TagObservation> tags,
                         const CameraIntrinsics& K, double threshold_mm) {
  EvalResult out;
  std::vector<Vec2> reprojected, detected;
  for (const auto& tag : tags) {
    reprojected.push_back(reproject_tag(camera_from_base, tag, K));
    detected.push_back(tag.detected_center_px);
    out.task_errors_mm.push_back(tag_centric_error(camera_from_base, tag, K));
  }
  for (std::size_t i = 0; i < reprojected.size(); ++i) out.pixel_errors.push_back((reprojected[i] - detected[i]).norm());
  out.mpd_px = mpd(reprojected, detected);
  out.task_err_mm = mean_std(out.task_errors_mm);
  out.success = !tags.empty() && classify_success(out.task_err_mm.mean, threshold_mm);
  return out;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> cv_split(std::size_t num_configurations,
                                                                       std::size_t size, std::size_t repeat,
                                                                       std::uint64_t seed) {
  if (size == 0 || size >= num_configurations)
    throw InsufficientConfigurations("training size " + std::to_string(size) + " needs at least " +
                                     std::to_string(size + 1) + " configurations, have " +
                                     std::to_string(num_configurations));
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(size), static_cast<std::uint32_t>(repeat)};
  std::mt19937_64 rng(seq);
  std::vector<std::size_t> idx(num_configurations);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < size; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, num_configurations - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  std::vector<std::size_t> train(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(size));
  std::vector<std::size_t> test(idx.begin() + static_cast<std::ptrdiff_t>(size), idx.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {train, test};
}

CvSizeResult reclassify(const CvSizeResult& result, double threshold_mm) {
  CvSizeResult out = result;
  out.successes = 0;
  std::vector<MeanStd> mpds, tasks;
  for (auto& rep : out.repeats) {
    rep.eval.success = rep.calibrated && !rep.eval.task_errors_mm.empty() &&
                       classify_success(rep.eval.task_err_mm.mean, threshold_mm);
    if (rep.eval.success) {
      ++out.successes;
      mpds.push_back(rep.eval.mpd_px);
      tasks.push_back(rep.eval.task_err_mm);
    }
  }
  out.success_rate = out.repeats.empty() ? 0.0 : static_cast<double>(out.successes) / static_cast<double>(out.repeats.size());
  out.mpd_px = propagate(mpds);
  out.task_err_mm = propagate(tasks);
  return out;
}

std::vector<CvSizeResult> monte_carlo_cv(const CvDataset& dataset, const CvOptions& options) {
  if (dataset.tags.size() != dataset.num_configurations)
    throw DimensionMismatch("cross validation needs one tag per configuration: " +
                            std::to_string(dataset.tags.size()) + " tags for " +
                            std::to_string(dataset.num_configurations) + " configurations");
  if (!dataset.calibrate) throw std::invalid_argument("cross validation needs a calibration callback");
  for (std::size_t n : options.sizes)
    if (n == 0 || n >= dataset.num_configurations)
      throw InsufficientConfigurations("training size " + std::to_string(n) + " needs at least " +
                                       std::to_string(n + 1) + " configurations, have " +
                                       std::to_string(dataset.num_configurations));

  std::vector<CvSizeResult> results;
  for (std::size_t n : options.sizes) {
    CvSizeResult res;
    res.size = n;
    for (std::size_t r = 0; r < options.repeats; ++r) {
      CvRepeat rep;
      std::tie(rep.train, rep.test) = cv_split(dataset.num_configurations, n, r, options.seed);
      rep.camera_from_base = dataset.calibrate(rep.train);
      rep.calibrated = rep.camera_from_base.has_value();
      if (rep.calibrated) {
        std::vector<TagObservation> held_out;
        for (std::size_t t : rep.test) held_out.push_back(dataset.tags[t]);
        try {
          rep.eval = evaluate_pose(*rep.camera_from_base, held_out, dataset.intrinsics, options.threshold_mm);
        } catch (const BehindCamera&) {
          rep.eval = {};  // counts as a failed repeat
        }
      }
      res.repeats.push_back(std::move(rep));
    }
    results.push_back(reclassify(res, options.threshold_mm));
  }
  return results;
}

}  // namespace mfcal
