#include "commands.hpp"

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mfcal/dataset.hpp"
#include "mfcal/errors.hpp"
#include "mfcal/evaluation.hpp"
#include "mfcal/kinematics.hpp"
#include "mfcal/registration.hpp"

namespace mfcal::cli {

namespace {

using nlohmann::json;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw DatasetError("cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DatasetError("cannot write " + path.string());
  out << text;
  if (!out) throw DatasetError("failed writing " + path.string());
}

PipelineConfig read_config(const std::string& path) {
  return path.empty() ? PipelineConfig{} : load_pipeline_config(path);
}

json mean_std_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}}; }

std::vector<TagObservation> require_tags(const LoadedDataset& data) {
  std::vector<TagObservation> tags;
  for (std::size_t c = 0; c < data.tags.size(); ++c) {
    if (!data.tags[c]) throw DatasetError("configuration " + std::to_string(c) + " has no tag file");
    tags.push_back(*data.tags[c]);
  }
  return tags;
}

std::vector<double> parse_joint_list(const std::string& text) {
  if (fs::exists(text)) return load_joints(text).values;
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw DatasetError("bad joint value '" + item + "'");
    values.push_back(v);
  }
  return values;
}

// --- calibrate ---------------------------------------------------------------

struct CalibrateArgs {
  std::string manifest, config, out;
};

int cmd_calibrate(const CalibrateArgs& a, std::ostream& out) {
  const PipelineConfig cfg = read_config(a.config);
  const LoadedDataset data = load_dataset(a.manifest, cfg);
  std::vector<std::size_t> all(data.qs.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const ObservedCloud observed = fuse_selected(data, all);
  const RegistrationReport report = register_robot(data.robot, data.qs, observed, cfg.registration);

  const fs::path dir(a.out);
  save_pose(dir / "pose.json", report.camera_from_base());
  write_text(dir / "report.json", report_to_json(report) + "\n");
  out << "converged: " << (report.converged ? "true" : "false") << "\n"
      << "outer iterations: " << report.iterations_outer << "\n"
      << "median residual [m]: " << report.final_median_residual << "\n"
      << "pose written to " << (dir / "pose.json").string() << "\n";
  return report.converged ? kOk : kNotConverged;
}

// --- evaluate ----------------------------------------------------------------

struct EvaluateArgs {
  std::string manifest, config, out, pose;
  std::vector<std::size_t> sizes{3, 6, 9, 12};
  std::size_t repeats = 5;
  std::uint64_t seed = 0;
  double threshold_mm = kDefaultSuccessThresholdMm;
};

std::string csv_header() { return "metric,N,mean,std\n"; }

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  const PipelineConfig cfg = read_config(a.config);
  const LoadedDataset data = load_dataset(a.manifest, cfg);
  const std::vector<TagObservation> tags = require_tags(data);
  const fs::path dir(a.out);
  std::string csv = csv_header();
  json report;

  if (!a.pose.empty()) {
    const Pose pose = load_pose(a.pose);
    const EvalResult r = evaluate_pose(pose, tags, data.intrinsics, a.threshold_mm);
    const std::string n = std::to_string(tags.size());
    csv += "task_error_mm," + n + "," + fmt(r.task_err_mm.mean) + "," + fmt(r.task_err_mm.std) + "\n";
    csv += "pixel_error_px," + n + "," + fmt(r.mpd_px.mean) + "," + fmt(r.mpd_px.std) + "\n";
    csv += "success_rate," + n + "," + fmt(r.success ? 1.0 : 0.0) + ",\n";
    report = {{"mode", "pose"},
              {"threshold_mm", a.threshold_mm},
              {"task_err_mm", mean_std_json(r.task_err_mm)},
              {"mpd_px", mean_std_json(r.mpd_px)},
              {"success", r.success},
              {"per_configuration_task_err_mm", r.task_errors_mm},
              {"per_configuration_pixel_err", r.pixel_errors}};
  } else {
    CvDataset ds;
    ds.num_configurations = data.qs.size();
    ds.tags = tags;
    ds.intrinsics = data.intrinsics;
    ds.calibrate = [&](std::span<const std::size_t> train) -> std::optional<Pose> {
      std::vector<JointConfiguration> qs;
      for (std::size_t c : train) qs.push_back(data.qs[c]);
      try {
        return register_robot(data.robot, qs, fuse_selected(data, train), cfg.registration).camera_from_base();
      } catch (const Error&) {
        return std::nullopt;
      }
    };
    CvOptions opt;
    opt.sizes = a.sizes;
    opt.repeats = a.repeats;
    opt.seed = a.seed;
    opt.threshold_mm = a.threshold_mm;
    const auto results = monte_carlo_cv(ds, opt);

    std::string task, pixel, success;
    json sizes = json::array();
    for (const auto& r : results) {
      const std::string n = std::to_string(r.size);
      task += "task_error_mm," + n + "," + fmt(r.task_err_mm.mean) + "," + fmt(r.task_err_mm.std) + "\n";
      pixel += "pixel_error_px," + n + "," + fmt(r.mpd_px.mean) + "," + fmt(r.mpd_px.std) + "\n";
      success += "success_rate," + n + "," + fmt(r.success_rate) + ",\n";
      json repeats = json::array();
      for (const auto& rep : r.repeats) {
        json jr = {{"train", rep.train}, {"test", rep.test}, {"calibrated", rep.calibrated}, {"success", rep.eval.success}};
        if (!rep.eval.task_errors_mm.empty()) {
          jr["task_err_mm"] = mean_std_json(rep.eval.task_err_mm);
          jr["mpd_px"] = mean_std_json(rep.eval.mpd_px);
        }
        repeats.push_back(jr);
      }
      json js = {{"N", r.size}, {"success_rate", r.success_rate}, {"successes", r.successes}, {"repeats", repeats}};
      if (r.successes > 0) {
        js["task_err_mm"] = mean_std_json(r.task_err_mm);
        js["mpd_px"] = mean_std_json(r.mpd_px);
      }
      sizes.push_back(js);
    }
    csv += task + pixel + success;
    report = {{"mode", "monte_carlo"}, {"threshold_mm", a.threshold_mm}, {"seed", a.seed},
              {"repeats", a.repeats}, {"sizes", sizes}};
  }
  write_text(dir / "evaluation.csv", csv);
  write_text(dir / "evaluation.json", report.dump(2) + "\n");
  out << csv;
  return kOk;
}

// --- synth -------------------------------------------------------------------

struct SynthArgs {
  std::string robot, mesh_root, out;
  std::size_t n_configs = 15;
  double noise_mm = 0.0;
  double outlier_frac = 0.0;
  std::uint64_t seed = 0;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  SynthDatasetOptions opt;
  opt.scene.n_configs = a.n_configs;
  opt.scene.seed = a.seed;
  opt.noise_mm = a.noise_mm;
  opt.outlier_frac = a.outlier_frac;
  const fs::path mesh_root = a.mesh_root.empty() ? fs::path(a.robot).parent_path() : fs::path(a.mesh_root);
  write_synthetic_dataset(a.robot, mesh_root, opt, a.out);
  out << "wrote " << a.n_configs << " configurations to " << a.out << "\n";
  return kOk;
}

// --- fk ----------------------------------------------------------------------

struct FkArgs {
  std::string robot, mesh_root, joints;
};

int cmd_fk(const FkArgs& a, std::ostream& out) {
  const fs::path mesh_root = a.mesh_root.empty() ? fs::path(a.robot).parent_path() : fs::path(a.mesh_root);
  const RobotModel model = load_robot(a.robot, mesh_root);
  const JointConfiguration q{a.joints.empty() ? std::vector<double>{} : parse_joint_list(a.joints)};
  out << link_poses_to_json(forward_kinematics(model, q)) << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Marker-free eye-to-hand calibration from depth images and robot meshes", "mfcal"};
  app.require_subcommand(1);

  CalibrateArgs cal;
  auto* calibrate = app.add_subcommand("calibrate", "Estimate the camera pose from a dataset manifest");
  calibrate->add_option("--manifest", cal.manifest, "Dataset manifest.json")->required();
  calibrate->add_option("--config", cal.config, "Pipeline configuration JSON");
  calibrate->add_option("--out", cal.out, "Output directory for pose.json and report.json")->required();

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Tag-based evaluation of a pose or Monte Carlo cross validation");
  evaluate->add_option("--manifest", ev.manifest, "Dataset manifest.json")->required();
  evaluate->add_option("--config", ev.config, "Pipeline configuration JSON");
  evaluate->add_option("--out", ev.out, "Output directory for evaluation.csv and evaluation.json")->required();
  evaluate->add_option("--pose", ev.pose, "Evaluate this pose JSON instead of cross validation");
  evaluate->add_option("--sizes", ev.sizes, "Training set sizes")->delimiter(',');
  evaluate->add_option("--repeats", ev.repeats, "Repeats per size");
  evaluate->add_option("--seed", ev.seed, "Split seed");
  evaluate->add_option("--threshold-mm", ev.threshold_mm, "Success threshold on the mean tag error")
      ->check(CLI::PositiveNumber);

  SynthArgs sy;
  auto* synth = app.add_subcommand("synth", "Render a synthetic dataset with ground truth");
  synth->add_option("--robot", sy.robot, "URDF file")->required();
  synth->add_option("--mesh-root", sy.mesh_root, "Directory meshes resolve against (default: URDF directory)");
  synth->add_option("--n-configs", sy.n_configs, "Number of joint configurations");
  synth->add_option("--noise-mm", sy.noise_mm, "Depth noise sigma in millimeters")->check(CLI::NonNegativeNumber);
  synth->add_option("--outlier-frac", sy.outlier_frac, "Fraction of displaced robot pixels")->check(CLI::Range(0.0, 0.999999));
  synth->add_option("--seed", sy.seed, "Scene seed");
  synth->add_option("--out", sy.out, "Output directory")->required();

  FkArgs fk;
  auto* fk_cmd = app.add_subcommand("fk", "Print link poses for a joint vector");
  fk_cmd->add_option("--robot", fk.robot, "URDF file")->required();
  fk_cmd->add_option("--mesh-root", fk.mesh_root, "Directory meshes resolve against (default: URDF directory)");
  fk_cmd->add_option("--joints", fk.joints, "Comma separated joint values or a joints JSON file");

  std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kError;
  }

  try {
    if (*calibrate) return cmd_calibrate(cal, out);
    if (*evaluate) return cmd_evaluate(ev, out);
    if (*synth) return cmd_synth(sy, out);
    if (*fk_cmd) return cmd_fk(fk, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kError;
  }
  return kError;
}

}  // namespace mfcal::cli
