#include <filesystem>

#include <benchmark/benchmark.h>

#include "mfcal/registration.hpp"
#include "mfcal/synthetic.hpp"

using namespace mfcal;

namespace {

const RobotModel& demo_arm() {
  static const RobotModel model = [] {
    const std::filesystem::path dir(MFCAL_DEMO_ARM);
    return load_robot(dir / "demo_arm.urdf", dir);
  }();
  return model;
}

void BM_Register(benchmark::State& state) {
  const SyntheticScene scene =
      generate_synthetic_scene(demo_arm(), static_cast<std::size_t>(state.range(0)), 2.0, 0.1, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(register_robot(demo_arm(), scene.qs, scene.observed, RegistrationConfig{}));
  }
  state.counters["points"] = static_cast<double>(scene.observed.size());
}
BENCHMARK(BM_Register)->Arg(3)->Arg(9)->Unit(benchmark::kMillisecond);

void BM_Correspondences(benchmark::State& state) {
  const SyntheticScene scene = generate_synthetic_scene(demo_arm(), 9, 2.0, 0.1, 2);
  const ModelSurface surface = sample_model_surface(demo_arm(), kDefaultSamplesPerLink, 0);
  std::vector<PosedModelCloud> clouds;
  for (const auto& q : scene.qs) clouds.push_back(pose_surface(surface, forward_kinematics(demo_arm(), q)));
  const ModelIndex index(clouds);
  const Pose theta = inverse(scene.true_pose);
  for (auto _ : state) benchmark::DoNotOptimize(find_correspondences(index, scene.observed, theta, 0.05));
}
BENCHMARK(BM_Correspondences)->Unit(benchmark::kMillisecond);

void BM_BuildIndex(benchmark::State& state) {
  const SyntheticScene scene = generate_synthetic_scene(demo_arm(), 9, 0.0, 0.0, 3);
  const ModelSurface surface = sample_model_surface(demo_arm(), kDefaultSamplesPerLink, 0);
  std::vector<PosedModelCloud> clouds;
  for (const auto& q : scene.qs) clouds.push_back(pose_surface(surface, forward_kinematics(demo_arm(), q)));
  for (auto _ : state) benchmark::DoNotOptimize(ModelIndex(clouds));
}
BENCHMARK(BM_BuildIndex)->Unit(benchmark::kMillisecond);

}  // namespace
