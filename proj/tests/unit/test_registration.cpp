#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "mfcal/errors.hpp"
#include "mfcal/kdtree.hpp"
#include "mfcal/registration.hpp"
#include "mfcal/synthetic.hpp"
#include "oracles.hpp"

using namespace mfcal;
namespace fs = std::filesystem;

namespace {

const fs::path kDemo = fs::path(MFCAL_DEMO_ARM);

const RobotModel& demo_arm() {
  static const RobotModel model = load_robot(kDemo / "demo_arm.urdf", kDemo);
  return model;
}

double translation_error(const Pose& a, const Pose& b) { return (a.translation - b.translation).norm(); }
double rotation_error_deg(const Pose& a, const Pose& b) {
  return rotation_angle(a.rotation.transpose() * b.rotation) * 180.0 / std::numbers::pi;
}

// Exact point pairs sampled from posed demo-arm clouds: observed = truth^-1 * model.
struct FixedPairs {
  CorrespondenceSet corr;
  Pose truth;  // base_from_camera
};

FixedPairs exact_pairs(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  FixedPairs out;
  out.truth = oracle::random_pose(rng, 2.0, 1.5);
  const ModelSurface surface = sample_model_surface(demo_arm(), 500, 0);
  std::uniform_real_distribution<double> uq(-1.5, 1.5);
  for (int c = 0; c < 3; ++c) {
    JointConfiguration q;
    for (std::size_t j = 0; j < demo_arm().dof(); ++j) q.values.push_back(uq(rng));
    const PosedModelCloud cloud = pose_surface(surface, forward_kinematics(demo_arm(), q));
    std::uniform_int_distribution<std::size_t> pick(0, cloud.size() - 1);
    for (std::size_t i = 0; i < n / 3; ++i) {
      const std::size_t k = pick(rng);
      out.corr.model_points.push_back(cloud.points[k]);
      out.corr.model_normals.push_back(cloud.normals[k]);
      out.corr.observed_points.push_back(apply(inverse(out.truth), cloud.points[k]));
      out.corr.distances.push_back(0.0);
      out.corr.config_index.push_back(c);
    }
  }
  return out;
}

double ptp_residual(const Vec3& n, const Vec3& m, const Vec3& o, const Pose& theta) {
  return n.dot(m - apply(theta, o));
}

PosedModelCloud random_cloud(std::mt19937_64& rng, std::size_t n, double extent) {
  std::uniform_real_distribution<double> u(-extent, extent);
  PosedModelCloud c;
  for (std::size_t i = 0; i < n; ++i) {
    c.points.emplace_back(u(rng), u(rng), u(rng));
    c.normals.push_back(oracle::random_unit(rng));
    c.link_index.push_back(0);
  }
  return c;
}

}  // namespace

// --- nearest neighbours ---------------------------------------------------

TEST(KdTree, MatchesPairwiseOracleWithTies) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> gi(-4, 4);
  std::uniform_int_distribution<std::size_t> gn(1, 500);
  for (int inst = 0; inst < 100; ++inst) {
    // Integer grid coordinates with many duplicates force distance ties.
    std::vector<Vec3> pts(gn(rng));
    for (auto& p : pts) p = Vec3(gi(rng), gi(rng), gi(rng)) * 0.5;
    const KdTree tree(pts);
    for (int k = 0; k < 200; ++k) {
      const Vec3 q = Vec3(gi(rng), gi(rng), gi(rng)) * 0.25;
      const NearestNeighbor nn = tree.nearest(q);
      EXPECT_EQ(nn.index, oracle::pairwise_nearest(pts, q));
      EXPECT_EQ(nn.index, brute_force_nearest(pts, q).index);
      EXPECT_EQ(nn.squared_distance, (pts[static_cast<std::size_t>(nn.index)] - q).squaredNorm());
    }
  }
}

TEST(KdTree, EmptyTree) {
  const KdTree tree(std::vector<Vec3>{});
  EXPECT_TRUE(tree.empty());
  EXPECT_EQ(tree.nearest(Vec3::Zero()).index, -1);
}

// --- initialization -------------------------------------------------------

TEST(Kabsch, RecoversRigidTransform) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const Pose g = oracle::random_pose(rng);
    std::vector<Vec3> from, to;
    for (int i = 0; i < 5; ++i) {
      from.push_back(oracle::random_in_ball(rng, 1.0));
      to.push_back(apply(g, from.back()));
    }
    const Pose p = kabsch(from, to);
    EXPECT_LT((p.matrix() - g.matrix()).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(CentroidInit, IdentityWhenCentroidsCoincide) {
  std::mt19937_64 rng(13);
  std::vector<PosedModelCloud> model;
  ObservedCloud obs;
  for (int c = 0; c < 4; ++c) {
    model.push_back(random_cloud(rng, 50, 1.0));
    for (const auto& p : model.back().points) {
      obs.points.push_back(p);
      obs.config_index.push_back(c);
    }
  }
  const Pose p = initialize_centroid_kabsch(model, obs);
  EXPECT_LT((p.matrix() - Mat4::Identity()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(CentroidInit, RecoversInverseOfObservationTransform) {
  std::mt19937_64 rng(14);
  const Pose g = oracle::random_pose(rng);
  std::vector<PosedModelCloud> model;
  ObservedCloud obs;
  for (int c = 0; c < 3; ++c) {
    model.push_back(random_cloud(rng, 40, 1.0));
    for (const auto& p : model.back().points) {
      obs.points.push_back(apply(g, p));
      obs.config_index.push_back(c);
    }
  }
  const Pose p = initialize_centroid_kabsch(model, obs);
  EXPECT_LT((p.matrix() - inverse(g).matrix()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(CentroidInit, CollinearCentroidsThrow) {
  std::vector<PosedModelCloud> model(3);
  ObservedCloud obs;
  for (int c = 0; c < 3; ++c) {
    model[c].points = {Vec3(c, 0, 0)};
    model[c].normals = {Vec3::UnitZ()};
    model[c].link_index = {0};
    obs.points.push_back(Vec3(0, c, 0));
    obs.config_index.push_back(c);
  }
  EXPECT_THROW(initialize_centroid_kabsch(model, obs), DegenerateCentroids);
  model.pop_back();
  obs.points.pop_back();
  obs.config_index.pop_back();
  EXPECT_THROW(initialize_centroid_kabsch(model, obs), DegenerateCentroids);
}

// --- correspondences ------------------------------------------------------

TEST(Correspondences, ObservedModelMatchesItself) {
  std::mt19937_64 rng(15);
  const Pose theta = oracle::random_pose(rng);
  std::vector<PosedModelCloud> model{random_cloud(rng, 300, 0.5), random_cloud(rng, 200, 0.5)};
  ObservedCloud obs;
  for (int c = 0; c < 2; ++c)
    for (const auto& p : model[static_cast<std::size_t>(c)].points) {
      obs.points.push_back(apply(inverse(theta), p));
      obs.config_index.push_back(c);
    }
  const CorrespondenceSet corr = find_correspondences(model, obs, theta, 0.1);
  ASSERT_EQ(corr.size(), obs.size());
  for (std::size_t i = 0; i < corr.size(); ++i) {
    EXPECT_LT(corr.distances[i], 1e-12);
    EXPECT_LT((corr.model_points[i] - apply(theta, corr.observed_points[i])).norm(), 1e-12);
  }
}

TEST(Correspondences, TreeEqualsBruteForce) {
  std::mt19937_64 rng(16);
  std::uniform_real_distribution<double> mm(-0.001, 0.001);
  for (int inst = 0; inst < 20; ++inst) {
    const Pose theta = oracle::random_pose(rng);
    std::vector<PosedModelCloud> model{random_cloud(rng, 100, 0.3), random_cloud(rng, 100, 0.3)};
    ObservedCloud obs;
    for (int c = 0; c < 2; ++c)
      for (const auto& p : model[static_cast<std::size_t>(c)].points) {
        obs.points.push_back(apply(inverse(theta), p + Vec3(mm(rng), mm(rng), mm(rng))));
        obs.config_index.push_back(c);
      }
    const CorrespondenceSet a = find_correspondences(model, obs, theta, 0.05);
    const CorrespondenceSet b = find_correspondences_brute_force(model, obs, theta, 0.05);
    ASSERT_EQ(a.size(), b.size());
    EXPECT_EQ(a.model_points, b.model_points);
    EXPECT_EQ(a.distances, b.distances);
    EXPECT_EQ(a.config_index, b.config_index);
  }
}

TEST(Correspondences, MatchesStayWithinConfiguration) {
  std::vector<PosedModelCloud> model(2);
  model[0].points = {Vec3(0, 0, 0)};
  model[1].points = {Vec3(1, 0, 0)};
  for (auto& m : model) {
    m.normals = {Vec3::UnitZ()};
    m.link_index = {0};
  }
  ObservedCloud obs;
  for (int i = 0; i < 6; ++i) {
    obs.points.push_back(Vec3(0.01 * i, 0, 0));
    obs.config_index.push_back(1);
  }
  const CorrespondenceSet corr = find_correspondences(model, obs, Pose{}, 2.0);
  for (const auto& m : corr.model_points) EXPECT_EQ(m, Vec3(1, 0, 0));
}

TEST(Correspondences, RejectsFarPairs) {
  std::mt19937_64 rng(17);
  std::vector<PosedModelCloud> model{random_cloud(rng, 50, 0.5)};
  ObservedCloud obs;
  for (const auto& p : model[0].points) {
    obs.points.push_back(p + Vec3(0, 0, 10.0));
    obs.config_index.push_back(0);
  }
  EXPECT_THROW(find_correspondences(model, obs, Pose{}, 0.5), TooFewCorrespondences);
  EXPECT_THROW(find_correspondences(model, obs, Pose{}, 0.0), std::invalid_argument);
  obs.config_index[0] = 5;
  EXPECT_THROW(find_correspondences(model, obs, Pose{}, 100.0), DimensionMismatch);
}

// --- linear system --------------------------------------------------------

TEST(AssembleSystem, SingleCorrespondenceAtOrigin) {
  CorrespondenceSet c;
  c.model_points = {Vec3(0, 0, 0.2)};
  c.model_normals = {Vec3::UnitZ()};
  c.observed_points = {Vec3::Zero()};
  c.distances = {0.2};
  c.config_index = {0};
  const IrlsSystem s = assemble_system(c, Pose{});
  Vec6 expected;
  expected << 0, 0, 0, 0, 0, 1;
  EXPECT_EQ(Vec6(s.A.row(0).transpose()), expected);
  EXPECT_DOUBLE_EQ(s.B[0], 0.2);
}

TEST(AssembleSystem, AlignedPairsGiveZeroResidual) {
  const FixedPairs fp = exact_pairs(300, 18);
  EXPECT_LT(assemble_system(fp.corr, fp.truth).B.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(AssembleSystem, RowsMatchCentralDifferences) {
  std::mt19937_64 rng(19);
  const double h = 1e-6;
  for (int i = 0; i < 200; ++i) {
    const Pose theta = oracle::random_pose(rng);
    const Vec3 n = oracle::random_unit(rng);
    const Vec3 m = oracle::random_in_ball(rng, 1.0);
    const Vec3 o = oracle::random_in_ball(rng, 1.0);
    CorrespondenceSet c;
    c.model_points = {m};
    c.model_normals = {n};
    c.observed_points = {o};
    c.distances = {0.0};
    c.config_index = {0};
    const IrlsSystem s = assemble_system(c, theta);
    EXPECT_NEAR(s.B[0], ptp_residual(n, m, o, theta), 1e-15);
    for (int k = 0; k < 6; ++k) {
      Vec6 d = Vec6::Zero();
      d[k] = h;
      const double rp = ptp_residual(n, m, o, compose(theta, exp_se3(Twist::from_vector(d))));
      const double rm = ptp_residual(n, m, o, compose(theta, exp_se3(Twist::from_vector(-d))));
      EXPECT_NEAR(s.A(0, k), -(rp - rm) / (2 * h), 1e-6);
    }
  }
}

// --- robust weights -------------------------------------------------------

TEST(Mad, HandValues) {
  EXPECT_EQ(mad_sigma(Eigen::VectorXd::Constant(7, 3.5)), 0.0);
  EXPECT_NEAR(mad_sigma(Eigen::Vector3d(-1, 0, 1)), 1.0 / 0.6745, 1e-12);
  EXPECT_NEAR(mad_sigma(Eigen::Vector3d(-1, 0, 1)), 1.4826, 1e-4);
}

TEST(Mad, GaussianConsistency) {
  std::mt19937_64 rng(20);
  std::normal_distribution<double> g(0.0, 2.0);
  Eigen::VectorXd b(100000);
  for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = g(rng);
  EXPECT_NEAR(mad_sigma(b), 2.0, 0.1);
}

TEST(Median, EvenAndOdd) {
  EXPECT_EQ(median({3, 1, 2}), 2.0);
  EXPECT_EQ(median({4, 1, 3, 2}), 2.5);
  EXPECT_THROW(median({}), std::invalid_argument);
}

TEST(Huber, BranchTable) {
  EXPECT_EQ(huber_weights(Eigen::Vector2d(0.1, -0.1), 0.2), Eigen::Vector2d(1, 1));
  EXPECT_EQ(huber_weights(Eigen::VectorXd::Constant(1, 2.0), 0.5)[0], 0.25);
  EXPECT_EQ(huber_weights(Eigen::Vector3d::Zero(), 0.0), Eigen::Vector3d::Ones());
  // Boundary belongs to the inlier branch.
  EXPECT_EQ(huber_weights(Eigen::Vector2d(0.5, -0.5), 0.5), Eigen::Vector2d(1, 1));
  EXPECT_EQ(huber_weights(Eigen::Vector2d(-4.0, 1.0), 0.5), Eigen::Vector2d(0.125, 0.5));
}

TEST(Huber, LossBranches) {
  EXPECT_DOUBLE_EQ(huber_loss(Eigen::Vector2d(0.1, -0.2), 0.5), 0.5 * (0.01 + 0.04));
  EXPECT_DOUBLE_EQ(huber_loss(Eigen::VectorXd::Constant(1, 2.0), 0.5), 0.5 * (2.0 - 0.25));
}

// --- weighted solve -------------------------------------------------------

TEST(Solve, IdentitySystem) {
  IrlsSystem s;
  s.A = Eigen::Matrix<double, 6, 6>::Identity();
  s.B = Vec6::Unit(5);
  s.W = Vec6::Ones();
  EXPECT_EQ(solve_weighted_step(s).vector(), Vec6::Unit(5));
}

TEST(Solve, MatchesSvdOracle) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1.0, 1.0), uw(0.1, 1.0);
  for (int t = 0; t < 20; ++t) {
    IrlsSystem s;
    s.A.resize(100, 6);
    s.B.resize(100);
    s.W.resize(100);
    for (int i = 0; i < 100; ++i) {
      for (int k = 0; k < 6; ++k) s.A(i, k) = u(rng);
      s.B[i] = u(rng);
      s.W[i] = uw(rng);
    }
    const Eigen::VectorXd ref = oracle::svd_lstsq(s.A, s.B, s.W);
    EXPECT_LT((solve_weighted_step(s).vector() - ref).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Solve, CoplanarNormalsAreIllConditioned) {
  std::mt19937_64 rng(22);
  CorrespondenceSet c;
  for (int i = 0; i < 100; ++i) {
    const Vec3 o = oracle::random_in_ball(rng, 1.0);
    c.model_points.push_back(o);
    c.model_normals.push_back(Vec3::UnitZ());
    c.observed_points.push_back(o);
    c.distances.push_back(0.0);
    c.config_index.push_back(0);
  }
  EXPECT_THROW(solve_weighted_step(assemble_system(c, Pose{})), IllConditioned);
}

// --- inner loop -----------------------------------------------------------

TEST(InnerLoop, FixedPointAtTruth) {
  const FixedPairs fp = exact_pairs(600, 23);
  const InnerLoopResult r = irls_inner_loop(fp.corr, fp.truth, 20, 1e-7);
  EXPECT_EQ(r.iterations, 1);
  EXPECT_LT(translation_error(r.theta, fp.truth), 1e-12);
}

TEST(InnerLoop, ConvergesFromFiveMillimeterOffset) {
  const FixedPairs fp = exact_pairs(600, 24);
  Pose start = fp.truth;
  start.translation += 0.005 * fp.corr.model_normals[0];
  const InnerLoopResult r = irls_inner_loop(fp.corr, start, 10, 1e-10);
  EXPECT_LE(r.iterations, 10);
  EXPECT_LT(translation_error(r.theta, fp.truth), 1e-6);
  EXPECT_LT(rotation_error_deg(r.theta, fp.truth), 1e-4);
}

TEST(InnerLoop, RobustToDisplacedPoints) {
  FixedPairs fp = exact_pairs(900, 25);
  std::mt19937_64 rng(26);
  std::normal_distribution<double> g(0.0, 0.001);
  for (auto& o : fp.corr.observed_points) o += Vec3(g(rng), g(rng), g(rng));
  Pose start = fp.truth;
  start.translation += Vec3(0.003, -0.002, 0.004);
  const Pose clean = irls_inner_loop(fp.corr, start, 50, 1e-10).theta;

  FixedPairs dirty = fp;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& o : dirty.corr.observed_points) {
    if (u(rng) < 0.2) o += 0.10 * oracle::random_unit(rng);
  }
  const Pose robust = irls_inner_loop(dirty.corr, start, 50, 1e-10).theta;
  EXPECT_LT(translation_error(robust, clean), 0.001);
  EXPECT_LT(rotation_error_deg(robust, clean), 0.1);
}

TEST(InnerLoop, HuberObjectiveDescendsPerSolve) {
  FixedPairs fp = exact_pairs(900, 27);
  std::mt19937_64 rng(28);
  std::normal_distribution<double> g(0.0, 0.002);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& o : fp.corr.observed_points) {
    o += Vec3(g(rng), g(rng), g(rng));
    if (u(rng) < 0.1) o += 0.05 * oracle::random_unit(rng);
  }
  Pose theta = fp.truth;
  theta.translation += Vec3(0.01, 0.0, -0.01);
  for (int it = 0; it < 15; ++it) {
    IrlsSystem sys = assemble_system(fp.corr, theta);
    const double kappa = kHuberTuning * mad_sigma(sys.B);
    sys.W = huber_weights(sys.B, kappa);
    const Twist step = solve_weighted_step(sys);
    const Eigen::VectorXd linear_after = sys.B - sys.A * step.vector();
    EXPECT_LE(huber_loss(linear_after, kappa), huber_loss(sys.B, kappa) + 1e-12) << it;
    theta = compose(theta, exp_se3(step));
    EXPECT_LE(huber_loss(assemble_system(fp.corr, theta).B, kappa), huber_loss(sys.B, kappa) + 1e-12) << it;
  }
}

// --- full registration ----------------------------------------------------

TEST(Register, NoiselessSceneRecoversTruth) {
  const SyntheticScene scene = generate_synthetic_scene(demo_arm(), 3, 0.0, 0.0, 101);
  const RegistrationReport r = register_robot(demo_arm(), scene.qs, scene.observed, RegistrationConfig{});
  EXPECT_TRUE(r.converged);
  EXPECT_LT(translation_error(r.camera_from_base(), scene.true_pose), 1e-4);
  EXPECT_LT(rotation_error_deg(r.camera_from_base(), scene.true_pose), 0.01);
}

TEST(Register, NoisyThreeConfigurations) {
  const SyntheticScene scene = generate_synthetic_scene(demo_arm(), 3, 2.0, 0.0, 102);
  const RegistrationReport r = register_robot(demo_arm(), scene.qs, scene.observed, RegistrationConfig{});
  EXPECT_TRUE(r.converged);
  EXPECT_LT(translation_error(r.camera_from_base(), scene.true_pose), 0.005);
}

TEST(Register, OutliersAndNoise) {
  const SyntheticScene scene = generate_synthetic_scene(demo_arm(), 9, 2.0, 0.2, 103);
  const RegistrationReport r = register_robot(demo_arm(), scene.qs, scene.observed, RegistrationConfig{});
  EXPECT_LT(translation_error(r.camera_from_base(), scene.true_pose), 0.005);
}

TEST(Register, DeterministicAndEquivariant) {
  const SyntheticScene scene = generate_synthetic_scene(demo_arm(), 4, 2.0, 0.1, 104);
  const RegistrationReport a = register_robot(demo_arm(), scene.qs, scene.observed, RegistrationConfig{});
  const RegistrationReport b = register_robot(demo_arm(), scene.qs, scene.observed, RegistrationConfig{});
  EXPECT_EQ(a.base_from_camera.matrix(), b.base_from_camera.matrix());
  EXPECT_EQ(a.iterations_outer, b.iterations_outer);

  // Moving the camera by g moves the estimate by g^-1 on the right.
  std::mt19937_64 rng(29);
  const Pose g = oracle::random_pose(rng, 0.5, 0.2);
  ObservedCloud moved = scene.observed;
  for (auto& p : moved.points) p = apply(g, p);
  const RegistrationReport c = register_robot(demo_arm(), scene.qs, moved, RegistrationConfig{});
  const Pose expected = compose(a.base_from_camera, inverse(g));
  EXPECT_LT(translation_error(c.base_from_camera, expected), 1e-6);
  EXPECT_LT(rotation_error_deg(c.base_from_camera, expected), 1e-4);
}

TEST(Register, SolutionIsStationary) {
  const SyntheticScene scene = generate_synthetic_scene(demo_arm(), 6, 2.0, 0.1, 105);
  const RegistrationConfig cfg;
  const RegistrationReport r = register_robot(demo_arm(), scene.qs, scene.observed, cfg);
  ASSERT_TRUE(r.converged);
  std::vector<PosedModelCloud> clouds;
  const ModelSurface surface = sample_model_surface(demo_arm(), cfg.samples_per_link, cfg.seed);
  for (const auto& q : scene.qs) clouds.push_back(pose_surface(surface, forward_kinematics(demo_arm(), q)));
  const CorrespondenceSet corr = find_correspondences(clouds, scene.observed, r.base_from_camera, cfg.reject_floor);
  IrlsSystem sys = assemble_system(corr, r.base_from_camera);
  sys.W = huber_weights(sys.B, kHuberTuning * mad_sigma(sys.B));
  EXPECT_LT(solve_weighted_step(sys).norm(), 1e-6);
}

TEST(Register, FlippedStartIsNeverSilentlyWrong) {
  const SyntheticScene scene = generate_synthetic_scene(demo_arm(), 1, 1.0, 0.0, 106);
  const Pose truth = inverse(scene.true_pose);
  const Pose flip{exp_so3(Vec3(0, 0, std::numbers::pi - 1e-3)), Vec3::Zero(), 0};
  const Pose start = compose(flip, truth);
  RegistrationReport r;
  try {
    r = register_robot(demo_arm(), scene.qs, scene.observed, RegistrationConfig{}, start);
  } catch (const Error&) {
    SUCCEED();
    return;
  }
  const bool wrong = translation_error(r.base_from_camera, truth) > 0.01 ||
                     rotation_error_deg(r.base_from_camera, truth) > 1.0;
  if (wrong) {
    EXPECT_FALSE(r.converged);
  }
}

TEST(Register, ConfigurationCountMismatch) {
  const SyntheticScene scene = generate_synthetic_scene(demo_arm(), 3, 0.0, 0.0, 107);
  std::vector<JointConfiguration> qs(scene.qs.begin(), scene.qs.begin() + 2);
  EXPECT_THROW(register_robot(demo_arm(), qs, scene.observed, RegistrationConfig{}), DimensionMismatch);
}
