#include "mfcal/registration.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include "mfcal/errors.hpp"

namespace mfcal {

ModelIndex::ModelIndex(std::vector<PosedModelCloud> clouds) : clouds_(std::move(clouds)) {
  trees_.reserve(clouds_.size());
  for (const auto& c : clouds_) trees_.emplace_back(c.points);
}

// ---------------------------------------------------------------------------
// Initialization

Pose kabsch(std::span<const Vec3> from, std::span<const Vec3> to) {
  const auto n = static_cast<double>(from.size());
  Vec3 cf = Vec3::Zero(), ct = Vec3::Zero();
  for (std::size_t i = 0; i < from.size(); ++i) {
    cf += from[i];
    ct += to[i];
  }
  cf /= n;
  ct /= n;
  Mat3 h = Mat3::Zero();
  for (std::size_t i = 0; i < from.size(); ++i) h += (from[i] - cf) * (to[i] - ct).transpose();
  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  Pose p;
  p.rotation = svd.matrixV() * d * svd.matrixU().transpose();
  p.translation = ct - p.rotation * cf;
  return p;
}

namespace {

// Rank of a centred point set is at least 2 when the second singular value is
// not negligible relative to the first.
bool spans_plane(std::span<const Vec3> pts) {
  Vec3 c = Vec3::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  Mat3 s = Mat3::Zero();
  for (const auto& p : pts) s += (p - c) * (p - c).transpose();
  Eigen::JacobiSVD<Mat3> svd(s);
  const Vec3 sv = svd.singularValues().cwiseSqrt();
  return sv[0] > 1e-9 && sv[1] > 1e-6 * sv[0];
}

}  // namespace

Pose initialize_centroid_kabsch(std::span<const PosedModelCloud> model_clouds, const ObservedCloud& observed) {
  const std::size_t n_cfg = model_clouds.size();
  std::vector<Vec3> obs_sum(n_cfg, Vec3::Zero());
  std::vector<std::size_t> obs_count(n_cfg, 0);
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const auto c = static_cast<std::size_t>(observed.config_index[i]);
    if (c >= n_cfg) throw DimensionMismatch("observed point refers to configuration " + std::to_string(c));
    obs_sum[c] += observed.points[i];
    ++obs_count[c];
  }
  std::vector<Vec3> from, to;
  for (std::size_t c = 0; c < n_cfg; ++c) {
    if (obs_count[c] == 0 || model_clouds[c].points.empty()) continue;
    Vec3 m = Vec3::Zero();
    for (const auto& p : model_clouds[c].points) m += p;
    from.push_back(obs_sum[c] / static_cast<double>(obs_count[c]));
    to.push_back(m / static_cast<double>(model_clouds[c].points.size()));
  }
  if (from.size() < 3 || !spans_plane(from) || !spans_plane(to)) {
    throw DegenerateCentroids("configuration centroids are collinear or coincident (" +
                              std::to_string(from.size()) +
                              " usable configurations); use more varied robot configurations");
  }
  return kabsch(from, to);
}

// ---------------------------------------------------------------------------
// Correspondences

namespace {

template <class Nearest>
CorrespondenceSet match(const ObservedCloud& observed, std::size_t n_cfg, const Pose& theta, double reject_dist,
                        const std::vector<const PosedModelCloud*>& clouds, Nearest&& nearest) {
  if (!(reject_dist > 0.0)) throw std::invalid_argument("find_correspondences: reject_dist must be > 0");
  CorrespondenceSet out;
  out.model_points.reserve(observed.size());
  out.model_normals.reserve(observed.size());
  out.observed_points.reserve(observed.size());
  out.distances.reserve(observed.size());
  out.config_index.reserve(observed.size());
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const int c = observed.config_index[i];
    if (c < 0 || static_cast<std::size_t>(c) >= n_cfg) {
      throw DimensionMismatch("observed point refers to configuration " + std::to_string(c) + " of " +
                              std::to_string(n_cfg));
    }
    const Vec3 q = apply(theta, observed.points[i]);
    const NearestNeighbor nn = nearest(static_cast<std::size_t>(c), q);
    if (nn.index < 0) continue;
    const double d = std::sqrt(nn.squared_distance);
    if (d > reject_dist) continue;
    const auto& cloud = *clouds[static_cast<std::size_t>(c)];
    out.model_points.push_back(cloud.points[static_cast<std::size_t>(nn.index)]);
    out.model_normals.push_back(cloud.normals[static_cast<std::size_t>(nn.index)]);
    out.observed_points.push_back(observed.points[i]);
    out.distances.push_back(d);
    out.config_index.push_back(c);
  }
  if (out.size() < kMinCorrespondences) {
    throw TooFewCorrespondences(std::to_string(out.size()) + " correspondences within " +
                                std::to_string(reject_dist) + " m; at least " +
                                std::to_string(kMinCorrespondences) + " required");
  }
  return out;
}

}  // namespace

CorrespondenceSet find_correspondences(const ModelIndex& model, const ObservedCloud& observed, const Pose& theta,
                                       double reject_dist) {
  std::vector<const PosedModelCloud*> clouds;
  for (std::size_t c = 0; c < model.num_configurations(); ++c) clouds.push_back(&model.cloud(c));
  return match(observed, model.num_configurations(), theta, reject_dist, clouds,
               [&](std::size_t c, const Vec3& q) { return model.tree(c).nearest(q); });
}

CorrespondenceSet find_correspondences(std::span<const PosedModelCloud> model_clouds, const ObservedCloud& observed,
                                       const Pose& theta, double reject_dist) {
  const ModelIndex index(std::vector<PosedModelCloud>(model_clouds.begin(), model_clouds.end()));
  return find_correspondences(index, observed, theta, reject_dist);
}

CorrespondenceSet find_correspondences_brute_force(std::span<const PosedModelCloud> model_clouds,
                                                   const ObservedCloud& observed, const Pose& theta,
                                                   double reject_dist) {
  std::vector<const PosedModelCloud*> clouds;
  for (const auto& c : model_clouds) clouds.push_back(&c);
  return match(observed, model_clouds.size(), theta, reject_dist, clouds,
               [&](std::size_t c, const Vec3& q) { return brute_force_nearest(model_clouds[c].points, q); });
}

// ---------------------------------------------------------------------------
// Linear system and robust weights

IrlsSystem assemble_system(const CorrespondenceSet& corr, const Pose& theta) {
  const auto n = static_cast<Eigen::Index>(corr.size());
  IrlsSystem sys;
  sys.A.resize(n, 6);
  sys.B.resize(n);
  sys.W = Eigen::VectorXd::Ones(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3& nrm = corr.model_normals[i];
    const Vec3& o = corr.observed_points[i];
    // n^T R [-o_x  I] = [ (o x R^T n)^T , (R^T n)^T ]
    const Vec3 rn = theta.rotation.transpose() * nrm;
    sys.A.row(i).head<3>() = o.cross(rn).transpose();
    sys.A.row(i).tail<3>() = rn.transpose();
    sys.B[i] = nrm.dot(corr.model_points[i] - apply(theta, o));
  }
  return sys;
}

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of empty sequence");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lower + upper);
}

double mad_sigma(const Eigen::VectorXd& B) {
  std::vector<double> v(B.data(), B.data() + B.size());
  const double m = median(v);
  for (auto& x : v) x = std::abs(x - m);
  return median(std::move(v)) / kMadToSigma;
}

Eigen::VectorXd huber_weights(const Eigen::VectorXd& B, double kappa) {
  Eigen::VectorXd w = Eigen::VectorXd::Ones(B.size());
  if (!(kappa > 0.0)) return w;
  for (Eigen::Index i = 0; i < B.size(); ++i) {
    const double a = std::abs(B[i]);
    if (a > kappa) w[i] = kappa / a;
  }
  return w;
}

double huber_loss(const Eigen::VectorXd& r, double kappa) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    const double a = std::abs(r[i]);
    total += (a <= kappa) ? 0.5 * a * a : kappa * (a - 0.5 * kappa);
  }
  return total;
}

Twist solve_weighted_step(const IrlsSystem& sys) {
  const Eigen::Matrix<double, 6, 6> H = sys.A.transpose() * sys.W.asDiagonal() * sys.A;
  const Vec6 g = sys.A.transpose() * sys.W.asDiagonal() * sys.B;
  const Eigen::LDLT<Eigen::Matrix<double, 6, 6>> ldlt(H);
  const Vec6 d = ldlt.vectorD().cwiseAbs();
  const double dmax = d.maxCoeff();
  const double dmin = d.minCoeff();
  if (ldlt.info() != Eigen::Success || !(dmax > 0.0) || !(dmin > 0.0) || dmax / dmin > kMaxConditionNumber) {
    throw IllConditioned("normal matrix is near-singular (pivot ratio " +
                         std::to_string(dmin > 0.0 ? dmax / dmin : std::numeric_limits<double>::infinity()) +
                         "); correspondence geometry does not constrain all 6 degrees of freedom");
  }
  return Twist::from_vector(ldlt.solve(g));
}

InnerLoopResult irls_inner_loop(const CorrespondenceSet& corr, const Pose& theta0, int max_inner, double tol) {
  InnerLoopResult res{theta0, 0};
  for (int it = 0; it < max_inner; ++it) {
    IrlsSystem sys = assemble_system(corr, res.theta);
    const double kappa = kHuberTuning * mad_sigma(sys.B);
    sys.W = huber_weights(sys.B, kappa);
    const Twist step = solve_weighted_step(sys);
    res.theta = compose(res.theta, exp_se3(step));
    ++res.iterations;
    if (step.norm() < tol) break;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Outer loop

RegistrationReport register_clouds(std::span<const PosedModelCloud> model_clouds, const ObservedCloud& observed,
                                   const RegistrationConfig& config, const std::optional<Pose>& initial) {
  const auto start = std::chrono::steady_clock::now();
  if (observed.num_configurations() > static_cast<int>(model_clouds.size())) {
    throw DimensionMismatch("observed cloud has more configurations than model clouds");
  }
  const ModelIndex index(std::vector<PosedModelCloud>(model_clouds.begin(), model_clouds.end()));

  RegistrationReport report;
  Pose theta = initial ? *initial : initialize_centroid_kabsch(model_clouds, observed);
  double reject = config.reject_initial;
  bool settled = false;
  for (int outer = 0; outer < config.max_outer; ++outer) {
    const CorrespondenceSet corr = find_correspondences(index, observed, theta, reject);
    const InnerLoopResult inner = irls_inner_loop(corr, theta, config.max_inner, config.inner_tol);
    report.iterations_inner_total += inner.iterations;
    ++report.iterations_outer;

    double change = std::numeric_limits<double>::infinity();
    try {
      change = log_se3(compose(inverse(theta), inner.theta)).norm();
    } catch (const AngleNearPi&) {
    }
    theta = inner.theta;
    const bool at_floor = reject <= config.reject_floor;
    reject = std::max(config.reject_floor, reject * config.reject_decay);
    if (at_floor && change < config.outer_tol) {
      settled = true;
      break;
    }
  }

  report.base_from_camera = theta;
  try {
    const CorrespondenceSet final_corr = find_correspondences(index, observed, theta, config.reject_floor);
    const IrlsSystem sys = assemble_system(final_corr, theta);
    const Eigen::VectorXd abs_b = sys.B.cwiseAbs();
    report.final_median_residual = median(std::vector<double>(abs_b.data(), abs_b.data() + abs_b.size()));
    report.final_match_fraction = static_cast<double>(final_corr.size()) / static_cast<double>(observed.size());
  } catch (const TooFewCorrespondences&) {
    report.final_median_residual = std::numeric_limits<double>::infinity();
    report.final_match_fraction = 0.0;
  }
  report.converged = settled && report.final_median_residual <= config.converged_residual &&
                     report.final_match_fraction >= config.min_match_fraction;
  report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

RegistrationReport register_robot(const RobotModel& model, std::span<const JointConfiguration> qs,
                                  const ObservedCloud& observed, const RegistrationConfig& config,
                                  const std::optional<Pose>& initial) {
  const auto start = std::chrono::steady_clock::now();
  if (observed.num_configurations() != static_cast<int>(qs.size())) {
    throw DimensionMismatch(std::to_string(qs.size()) + " joint configurations for an observation with " +
                            std::to_string(observed.num_configurations()) + " configurations");
  }
  const ModelSurface surface = sample_model_surface(model, config.samples_per_link, config.seed);
  std::vector<PosedModelCloud> clouds;
  clouds.reserve(qs.size());
  for (const auto& q : qs) clouds.push_back(pose_surface(surface, forward_kinematics(model, q)));
  RegistrationReport report = register_clouds(clouds, observed, config, initial);
  report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace mfcal
