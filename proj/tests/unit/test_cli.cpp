#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include <unistd.h>

#include <gtest/gtest.h>
#include <json.hpp>

#include "commands.hpp"
#include "mfcal/dataset.hpp"
#include "mfcal/errors.hpp"
#include "mfcal/liegroup.hpp"

using namespace mfcal;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kPlanar = fs::path(MFCAL_TEST_DATA) / "planar2";
const fs::path kDemo = fs::path(MFCAL_DEMO_ARM);

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "mfcal");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mfcal_cli_" + std::to_string(::getpid()) + "_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::map<std::string, std::string> tree_contents(const fs::path& root) {
  std::map<std::string, std::string> m;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) m[fs::relative(e.path(), root).string()] = slurp(e.path());
  return m;
}

// One synthetic dataset shared by the end-to-end tests.
const fs::path& dataset() {
  static const fs::path dir = [] {
    const fs::path d = scratch("dataset");
    const Result r = run({"synth", "--robot", (kDemo / "demo_arm.urdf").string(), "--noise-mm", "1",
                          "--outlier-frac", "0.05", "--seed", "3", "--out", d.string()});
    if (r.code != 0) throw std::runtime_error("synth failed: " + r.err);
    return d;
  }();
  return dir;
}

std::string manifest() { return (dataset() / "manifest.json").string(); }

}  // namespace

TEST(CliFk, ZeroJointsGiveStaticOrigins) {
  const Result r = run({"fk", "--robot", (kPlanar / "planar2.urdf").string(), "--joints", "0"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  const auto tip = j["links"]["tip"].get<std::vector<double>>();
  EXPECT_NEAR(tip[3], 1.0, 1e-12);
  EXPECT_NEAR(tip[7], 0.0, 1e-12);
  EXPECT_FALSE(j["limit_warning"].get<bool>());
}

TEST(CliFk, QuarterTurnPutsTipOnY) {
  const Result r = run({"fk", "--robot", (kPlanar / "planar2.urdf").string(), "--joints",
                        std::to_string(std::numbers::pi / 2)});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto tip = json::parse(r.out)["links"]["tip"].get<std::vector<double>>();
  EXPECT_NEAR(tip[3], 0.0, 1e-6);
  EXPECT_NEAR(tip[7], 1.0, 1e-6);
  EXPECT_NEAR(tip[11], 0.0, 1e-12);
}

TEST(CliFk, WrongJointCountFails) {
  const Result r = run({"fk", "--robot", (kPlanar / "planar2.urdf").string(), "--joints", "0,1"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("error:"), std::string::npos);
  EXPECT_EQ(run({"fk"}).code, 1);
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"fk", "--help"}).code, 0);
}

TEST(CliSynth, LayoutAndDeterminism) {
  const json m = json::parse(slurp(dataset() / "manifest.json"));
  EXPECT_EQ(m["configurations"].size(), 15u);
  EXPECT_TRUE(fs::exists(dataset() / "ground_truth.json"));

  const fs::path again = scratch("dataset_again");
  const Result r = run({"synth", "--robot", (kDemo / "demo_arm.urdf").string(), "--noise-mm", "1",
                        "--outlier-frac", "0.05", "--seed", "3", "--out", again.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(tree_contents(dataset()), tree_contents(again));
}

TEST(CliSynth, BadArgumentsFail) {
  EXPECT_EQ(run({"synth", "--robot", "/nonexistent/robot.urdf", "--out", scratch("bad").string()}).code, 1);
  EXPECT_EQ(run({"synth", "--robot", (kDemo / "demo_arm.urdf").string(), "--outlier-frac", "1.5", "--out",
                 scratch("bad2").string()})
                .code,
            1);
}

TEST(CliCalibrate, RecoversGroundTruth) {
  const fs::path out = scratch("calibrate");
  const Result r = run({"calibrate", "--manifest", manifest(), "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err << r.out;
  const Pose est = load_pose(out / "pose.json");
  const Pose truth = load_pose(dataset() / "ground_truth.json");
  EXPECT_LT((est.translation - truth.translation).norm(), 0.005);
  EXPECT_LT(rotation_angle(est.rotation.transpose() * truth.rotation) * 180 / std::numbers::pi, 0.5);
  const json rep = json::parse(slurp(out / "report.json"));
  EXPECT_TRUE(rep["converged"].get<bool>());
}

TEST(CliCalibrate, NonConvergedExitsTwo) {
  const fs::path out = scratch("calibrate_nc");
  std::ofstream(out / "cfg.json") << R"({"max_outer": 1})";
  const Result r = run({"calibrate", "--manifest", manifest(), "--config", (out / "cfg.json").string(), "--out",
                        out.string()});
  EXPECT_EQ(r.code, 2) << r.err;
  EXPECT_FALSE(json::parse(slurp(out / "report.json"))["converged"].get<bool>());
}

TEST(CliCalibrate, UnknownConfigKeyFails) {
  const fs::path out = scratch("calibrate_badcfg");
  std::ofstream(out / "cfg.json") << R"({"max_outr": 10})";
  const Result r = run({"calibrate", "--manifest", manifest(), "--config", (out / "cfg.json").string(), "--out",
                        out.string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("max_outr"), std::string::npos);
}

TEST(CliCalibrate, MissingDepthFileNamed) {
  const fs::path copy = scratch("missing_depth");
  fs::copy(dataset(), copy, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
  fs::remove(copy / "config_004_depth.png");
  const Result r = run({"calibrate", "--manifest", (copy / "manifest.json").string(), "--out", copy.string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("config_004_depth.png"), std::string::npos) << r.err;
}

TEST(CliEvaluate, GroundTruthPoseHasZeroError) {
  const fs::path out = scratch("evaluate_gt");
  const Result r = run({"evaluate", "--manifest", manifest(), "--pose", (dataset() / "ground_truth.json").string(),
                        "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(slurp(out / "evaluation.json"));
  EXPECT_LT(j["task_err_mm"]["mean"].get<double>(), 1e-6);
  EXPECT_LT(j["mpd_px"]["mean"].get<double>(), 1e-6);
  EXPECT_TRUE(j["success"].get<bool>());
}

TEST(CliEvaluate, MissingTagsFail) {
  const fs::path copy = scratch("no_tags");
  fs::copy(dataset(), copy, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
  json m = json::parse(slurp(copy / "manifest.json"));
  for (auto& c : m["configurations"]) c.erase("tag");
  std::ofstream(copy / "manifest.json") << m.dump(2);
  const Result r = run({"evaluate", "--manifest", (copy / "manifest.json").string(), "--pose",
                        (copy / "ground_truth.json").string(), "--out", copy.string()});
  EXPECT_EQ(r.code, 1);
}

TEST(CliEvaluate, MonteCarloTableIsStable) {
  const fs::path a = scratch("mc_a"), b = scratch("mc_b");
  const std::vector<std::string> flags{"--sizes", "3,6,9,12", "--repeats", "5", "--seed", "11"};
  std::vector<std::string> args_a{"evaluate", "--manifest", manifest(), "--out", a.string()};
  std::vector<std::string> args_b{"evaluate", "--manifest", manifest(), "--out", b.string()};
  args_a.insert(args_a.end(), flags.begin(), flags.end());
  args_b.insert(args_b.end(), flags.begin(), flags.end());
  const Result ra = run(args_a);
  ASSERT_EQ(ra.code, 0) << ra.err;
  ASSERT_EQ(run(args_b).code, 0);

  const std::string csv = slurp(a / "evaluation.csv");
  EXPECT_EQ(csv, slurp(b / "evaluation.csv"));
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "metric,N,mean,std");
  std::map<std::string, std::vector<std::string>> blocks;
  std::vector<std::string> order;
  while (std::getline(in, line)) {
    const std::string metric = line.substr(0, line.find(','));
    if (blocks.find(metric) == blocks.end()) order.push_back(metric);
    blocks[metric].push_back(line);
  }
  EXPECT_EQ(order, (std::vector<std::string>{"task_error_mm", "pixel_error_px", "success_rate"}));
  for (const auto& [metric, rows] : blocks) {
    ASSERT_EQ(rows.size(), 4u) << metric;
    EXPECT_EQ(rows[0].substr(metric.size() + 1, 2), "3,");
    EXPECT_EQ(rows[3].substr(metric.size() + 1, 3), "12,");
  }
  const json j = json::parse(slurp(a / "evaluation.json"));
  ASSERT_EQ(j["sizes"].size(), 4u);
  EXPECT_GE(j["sizes"][2]["success_rate"].get<double>(), 0.8);
}

TEST(Dataset, JointFilesAreArrays) {
  const json j = json::parse(slurp(dataset() / "config_000_joints.json"));
  EXPECT_TRUE(j.is_array());
  const fs::path dir = scratch("joints");
  std::ofstream(dir / "obj.json") << R"({"joints": [0.5, -1]})";
  std::ofstream(dir / "bad.json") << R"([0.5, "x"])";
  EXPECT_EQ(load_joints(dir / "obj.json").values, (std::vector<double>{0.5, -1.0}));
  EXPECT_THROW(load_joints(dir / "bad.json"), DatasetError);
}

TEST(Dataset, ForeignFormatsUseRegisteredImporter) {
  const fs::path dir = scratch("importer");
  std::ofstream(dir / "foreign.json") << json{{"format", "alias"}, {"target", manifest()}}.dump();
  EXPECT_THROW(load_manifest(dir / "foreign.json"), DatasetError);
  register_manifest_importer("alias", [](const fs::path& p) {
    return load_manifest(json::parse(slurp(p))["target"].get<std::string>());
  });
  EXPECT_EQ(load_manifest(dir / "foreign.json").configurations.size(), 15u);
  EXPECT_THROW(register_manifest_importer("mfcal", {}), std::invalid_argument);
}
