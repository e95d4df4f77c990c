#include "mfcal/dataset.hpp"

#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mfcal/errors.hpp"
#include "mfcal/image_io.hpp"
#include "mfcal/render.hpp"

namespace mfcal {

using nlohmann::json;

namespace {

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DatasetError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DatasetError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw DatasetError("failed writing " + path.string());
}

template <typename T>
T field(const json& j, const char* key, const fs::path& source) {
  if (!j.contains(key)) throw DatasetError(source.string() + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw DatasetError(source.string() + ": bad field '" + key + "': " + e.what());
  }
}

json matrix_to_json(const Mat4& m) {
  json arr = json::array();
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) arr.push_back(m(r, c));
  return arr;
}

Pose matrix_from_json(const json& j, const std::string& what) {
  std::vector<double> v;
  try {
    if (j.is_array() && j.size() == 4 && j[0].is_array()) {
      for (const auto& row : j)
        for (const auto& x : row) v.push_back(x.get<double>());
    } else {
      v = j.get<std::vector<double>>();
    }
  } catch (const json::exception& e) {
    throw DatasetError(what + ": expected a 4x4 matrix: " + e.what());
  }
  if (v.size() != 16) throw DatasetError(what + ": expected 16 matrix entries, got " + std::to_string(v.size()));
  Mat4 m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = v[std::size_t(r) * 4 + c];
  const Pose p = Pose::from_matrix(m);
  if (!p.is_valid(1e-6)) throw DatasetError(what + ": matrix is not a rigid transform");
  return p;
}

fs::path resolve(const fs::path& root, const std::string& rel) {
  const fs::path p(rel);
  return p.is_absolute() ? p : root / p;
}

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) throw DatasetError(what + " not found: " + p.string());
}

}  // namespace

namespace {

std::map<std::string, ManifestImporter>& importers() {
  static std::map<std::string, ManifestImporter> registry;
  return registry;
}

DatasetManifest parse_native_manifest(const json& j, const fs::path& manifest_path) {
  DatasetManifest m;
  m.root = manifest_path.parent_path().empty() ? fs::path(".") : manifest_path.parent_path();
  m.intrinsics = resolve(m.root, field<std::string>(j, "intrinsics", manifest_path));
  m.robot = resolve(m.root, field<std::string>(j, "robot", manifest_path));
  m.mesh_root = j.contains("mesh_root") ? resolve(m.root, field<std::string>(j, "mesh_root", manifest_path))
                                        : m.robot.parent_path();
  if (j.contains("ground_truth")) m.ground_truth = resolve(m.root, field<std::string>(j, "ground_truth", manifest_path));
  if (!j.contains("configurations") || !j["configurations"].is_array())
    throw DatasetError(manifest_path.string() + ": missing 'configurations' array");
  for (const auto& e : j["configurations"]) {
    ConfigurationEntry c;
    c.joints = resolve(m.root, field<std::string>(e, "joints", manifest_path));
    c.depth = resolve(m.root, field<std::string>(e, "depth", manifest_path));
    c.mask = resolve(m.root, field<std::string>(e, "mask", manifest_path));
    if (e.contains("tag")) c.tag = resolve(m.root, field<std::string>(e, "tag", manifest_path));
    m.configurations.push_back(std::move(c));
  }
  return m;
}

}  // namespace

void register_manifest_importer(const std::string& format, ManifestImporter importer) {
  if (format == "mfcal") throw std::invalid_argument("the native manifest format cannot be replaced");
  importers()[format] = std::move(importer);
}

DatasetManifest load_manifest(const fs::path& manifest_path) {
  const json j = read_json(manifest_path);
  const std::string format = j.contains("format") ? field<std::string>(j, "format", manifest_path) : "mfcal";
  DatasetManifest m;
  if (format == "mfcal") {
    m = parse_native_manifest(j, manifest_path);
  } else {
    const auto it = importers().find(format);
    if (it == importers().end())
      throw DatasetError(manifest_path.string() + ": no importer registered for format '" + format + "'");
    m = it->second(manifest_path);
  }
  if (m.configurations.empty()) throw DatasetError(manifest_path.string() + ": no configurations");

  require_file(m.intrinsics, "intrinsics file");
  require_file(m.robot, "robot description");
  if (m.ground_truth) require_file(*m.ground_truth, "ground-truth pose file");
  for (const auto& c : m.configurations) {
    require_file(c.joints, "joints file");
    require_file(c.depth, "depth file");
    require_file(c.mask, "mask file");
    if (c.tag) require_file(*c.tag, "tag file");
  }
  return m;
}

CameraIntrinsics load_intrinsics(const fs::path& path) {
  const json j = read_json(path);
  CameraIntrinsics K;
  K.fx = field<double>(j, "fx", path);
  K.fy = field<double>(j, "fy", path);
  K.cx = field<double>(j, "cx", path);
  K.cy = field<double>(j, "cy", path);
  K.width = field<int>(j, "width", path);
  K.height = field<int>(j, "height", path);
  if (!K.is_valid()) throw DatasetError(path.string() + ": invalid intrinsics");
  return K;
}

void save_intrinsics(const fs::path& path, const CameraIntrinsics& K) {
  write_json(path, {{"fx", K.fx}, {"fy", K.fy}, {"cx", K.cx}, {"cy", K.cy}, {"width", K.width}, {"height", K.height}});
}

JointConfiguration load_joints(const fs::path& path) {
  const json j = read_json(path);
  if (j.is_array()) {
    try {
      return {j.get<std::vector<double>>()};
    } catch (const json::exception&) {
      throw DatasetError(path.string() + ": joint values must be numbers");
    }
  }
  return {field<std::vector<double>>(j, "joints", path)};
}

void save_joints(const fs::path& path, const JointConfiguration& q) { write_json(path, json(q.values)); }

Pose load_pose(const fs::path& path) {
  const json j = read_json(path);
  if (!j.contains("camera_T_base")) throw DatasetError(path.string() + ": missing field 'camera_T_base'");
  return matrix_from_json(j["camera_T_base"], path.string());
}

void save_pose(const fs::path& path, const Pose& camera_from_base) {
  write_json(path, {{"camera_T_base", matrix_to_json(camera_from_base.matrix())}});
}

TagObservation load_tag(const fs::path& path, int config_index) {
  const json j = read_json(path);
  TagObservation tag;
  tag.config_index = config_index;
  const auto center = field<std::vector<double>>(j, "center", path);
  if (center.size() != 2) throw DatasetError(path.string() + ": 'center' needs 2 values");
  tag.detected_center_px = Vec2(center[0], center[1]);
  const auto corners = field<std::vector<std::vector<double>>>(j, "corners", path);
  if (corners.size() != 4) throw DatasetError(path.string() + ": 'corners' needs 4 points");
  for (int i = 0; i < 4; ++i) {
    if (corners[i].size() != 2) throw DatasetError(path.string() + ": corner needs 2 values");
    tag.detected_corners_px[i] = Vec2(corners[i][0], corners[i][1]);
  }
  tag.tag_size = field<double>(j, "tag_size", path);
  if (!(tag.tag_size > 0.0)) throw DatasetError(path.string() + ": tag_size must be positive");
  if (!j.contains("tag_in_base")) throw DatasetError(path.string() + ": missing field 'tag_in_base'");
  tag.tag_in_base = matrix_from_json(j["tag_in_base"], path.string());
  return tag;
}

void save_tag(const fs::path& path, const TagObservation& tag) {
  json corners = json::array();
  for (const auto& c : tag.detected_corners_px) corners.push_back({c.x(), c.y()});
  write_json(path, {{"center", {tag.detected_center_px.x(), tag.detected_center_px.y()}},
                    {"corners", corners},
                    {"tag_size", tag.tag_size},
                    {"tag_in_base", matrix_to_json(tag.tag_in_base.matrix())}});
}

PipelineConfig parse_pipeline_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw DatasetError(std::string("malformed config JSON: ") + e.what());
  }
  if (!j.is_object()) throw DatasetError("config must be a JSON object");
  PipelineConfig c;
  RegistrationConfig& r = c.registration;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "inner_tol") r.inner_tol = value.get<double>();
      else if (key == "max_inner") r.max_inner = value.get<int>();
      else if (key == "outer_tol") r.outer_tol = value.get<double>();
      else if (key == "max_outer") r.max_outer = value.get<int>();
      else if (key == "reject_initial") r.reject_initial = value.get<double>();
      else if (key == "reject_decay") r.reject_decay = value.get<double>();
      else if (key == "reject_floor") r.reject_floor = value.get<double>();
      else if (key == "samples_per_link") r.samples_per_link = value.get<std::size_t>();
      else if (key == "converged_residual") r.converged_residual = value.get<double>();
      else if (key == "min_match_fraction") r.min_match_fraction = value.get<double>();
      else if (key == "seed") r.seed = value.get<std::uint64_t>();
      else if (key == "band_px") c.band_px = value.get<int>();
      else if (key == "stride") c.stride = value.get<int>();
      else if (key == "max_depth_jump") c.max_depth_jump = value.get<double>();
      else throw DatasetError("unknown config key '" + key + "'");
    } catch (const json::exception& e) {
      throw DatasetError("bad value for config key '" + key + "': " + e.what());
    }
  }
  if (c.stride < 1) throw DatasetError("stride must be >= 1");
  if (c.band_px < 0) throw DatasetError("band_px must be >= 0");
  if (r.max_inner < 1 || r.max_outer < 1) throw DatasetError("iteration limits must be >= 1");
  if (!(r.reject_floor > 0.0 && r.reject_initial >= r.reject_floor && r.reject_decay > 0.0 && r.reject_decay <= 1.0))
    throw DatasetError("rejection schedule must satisfy 0 < floor <= initial and 0 < decay <= 1");
  return c;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_pipeline_config(ss.str());
}

std::string report_to_json(const RegistrationReport& report) {
  const json j = {{"camera_T_base", matrix_to_json(report.camera_from_base().matrix())},
                  {"iterations_outer", report.iterations_outer},
                  {"iterations_inner_total", report.iterations_inner_total},
                  {"final_median_residual", report.final_median_residual},
                  {"final_match_fraction", report.final_match_fraction},
                  {"converged", report.converged},
                  {"wall_time", report.wall_time}};
  return j.dump(2);
}

std::string link_poses_to_json(const LinkPoses& poses) {
  json links = json::object();
  for (std::size_t i = 0; i < poses.names.size(); ++i) links[poses.names[i]] = matrix_to_json(poses.poses[i].matrix());
  return json{{"links", links}, {"limit_warning", poses.limit_warning}}.dump(2);
}

std::vector<Vec3> observe_configuration(const DepthMap& depth, const SegmentationMask& mask,
                                        const CameraIntrinsics& K, const PipelineConfig& config) {
  const int band = config.band_px > 0 ? config.band_px : default_band_px(K.width);
  const DepthMap filtered = invalidate_depth_edges(depth, config.max_depth_jump);
  return depth_to_cloud(filtered, erode_to_boundary(mask, band), K, config.stride);
}

LoadedDataset load_dataset(const fs::path& manifest_path, const PipelineConfig& config) {
  DatasetManifest manifest = load_manifest(manifest_path);
  const CameraIntrinsics K = load_intrinsics(manifest.intrinsics);
  LoadedDataset data{manifest, K, load_robot(manifest.robot, manifest.mesh_root), {}, {}, {}, std::nullopt};
  for (std::size_t c = 0; c < manifest.configurations.size(); ++c) {
    const auto& e = manifest.configurations[c];
    data.qs.push_back(load_joints(e.joints));
    const DepthMap depth = read_depth_png(e.depth);
    const SegmentationMask mask = read_mask_png(e.mask);
    if (depth.width != K.width || depth.height != K.height || mask.width != K.width || mask.height != K.height)
      throw DimensionMismatch("configuration " + std::to_string(c) + ": image size does not match intrinsics (" +
                              e.depth.string() + ")");
    data.clouds.push_back(observe_configuration(depth, mask, K, config));
    data.tags.push_back(e.tag ? std::optional<TagObservation>(load_tag(*e.tag, static_cast<int>(c))) : std::nullopt);
  }
  if (manifest.ground_truth) data.ground_truth = load_pose(*manifest.ground_truth);
  return data;
}

ObservedCloud fuse_selected(const LoadedDataset& data, std::span<const std::size_t> configs) {
  std::vector<std::vector<Vec3>> selected;
  for (std::size_t c : configs) selected.push_back(data.clouds.at(c));
  return fuse_clouds(selected);
}

void write_synthetic_dataset(const fs::path& urdf_path, const fs::path& mesh_root, const SynthDatasetOptions& options,
                             const fs::path& out_dir) {
  const RobotModel model = load_robot(urdf_path, mesh_root);
  SyntheticSceneConfig scene_cfg = options.scene;
  scene_cfg.noise_mm = 0.0;
  scene_cfg.outlier_frac = 0.0;
  const SyntheticScene scene = generate_synthetic_scene(model, scene_cfg);

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw DatasetError("cannot create output directory " + out_dir.string() + ": " + ec.message());

  // Self-contained copy of the robot description.
  const fs::path robot_dir = out_dir / "robot";
  fs::create_directories(robot_dir, ec);
  if (ec) throw DatasetError("cannot create " + robot_dir.string() + ": " + ec.message());
  fs::copy(mesh_root, robot_dir, fs::copy_options::recursive | fs::copy_options::overwrite_existing, ec);
  if (ec) throw DatasetError("cannot copy meshes from " + mesh_root.string() + ": " + ec.message());
  fs::copy_file(urdf_path, robot_dir / urdf_path.filename(), fs::copy_options::overwrite_existing, ec);
  if (ec) throw DatasetError("cannot copy robot description: " + ec.message());

  const CameraIntrinsics& K = scene.intrinsics;
  save_intrinsics(out_dir / "intrinsics.json", K);
  save_pose(out_dir / "ground_truth.json", scene.true_pose);

  std::seed_seq seq{static_cast<std::uint32_t>(options.scene.seed), static_cast<std::uint32_t>(options.scene.seed >> 32),
                    0xd3e7u};
  std::mt19937_64 rng(seq);
  const DepthCorruption corruption{options.noise_mm, options.outlier_frac, options.scene.clutter_radius, true};

  json configs = json::array();
  for (std::size_t c = 0; c < scene.qs.size(); ++c) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "config_%03zu", c);
    const std::string s(stem);
    RenderedView view = render_robot(model, forward_kinematics(model, scene.qs[c]), scene.true_pose, K);
    corrupt_depth(view.depth, view.mask, corruption, rng);
    save_joints(out_dir / (s + "_joints.json"), scene.qs[c]);
    write_depth_png(view.depth, out_dir / (s + "_depth.png"));
    write_mask_png(view.mask, out_dir / (s + "_mask.png"));
    save_tag(out_dir / (s + "_tag.json"), scene.tag_obs[c]);
    configs.push_back({{"joints", s + "_joints.json"},
                       {"depth", s + "_depth.png"},
                       {"mask", s + "_mask.png"},
                       {"tag", s + "_tag.json"}});
  }
  write_json(out_dir / "manifest.json", {{"intrinsics", "intrinsics.json"},
                                         {"robot", (fs::path("robot") / urdf_path.filename()).generic_string()},
                                         {"mesh_root", "robot"},
                                         {"ground_truth", "ground_truth.json"},
                                         {"configurations", configs}});
}

}  // namespace mfcal
