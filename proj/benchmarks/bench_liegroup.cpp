#include <random>

#include <benchmark/benchmark.h>

#include "mfcal/liegroup.hpp"

using namespace mfcal;

namespace {

std::vector<Twist> twists(std::size_t n) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Twist> out(n);
  for (auto& t : out) t = {Vec3(u(rng), u(rng), u(rng)), Vec3(u(rng), u(rng), u(rng))};
  return out;
}

void BM_ExpSe3(benchmark::State& state) {
  const auto ts = twists(1024);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(exp_se3(ts[i++ & 1023]));
}
BENCHMARK(BM_ExpSe3);

void BM_LogSe3(benchmark::State& state) {
  std::vector<Pose> ps;
  for (const auto& t : twists(1024)) ps.push_back(exp_se3(t));
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(log_se3(ps[i++ & 1023]));
}
BENCHMARK(BM_LogSe3);

}  // namespace
BENCHMARK_MAIN();
