#include "mfcal/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "mfcal/errors.hpp"

namespace mfcal {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

Mat3 rpy_to_rotation(double roll, double pitch, double yaw) {
  return exp_so3(Vec3::UnitZ() * yaw) * exp_so3(Vec3::UnitY() * pitch) * exp_so3(Vec3::UnitX() * roll);
}

// ---------------------------------------------------------------------------
// RobotModel

RobotModel::RobotModel(std::vector<Link> links, std::vector<Joint> joints)
    : links_(std::move(links)), joints_(std::move(joints)) {
  if (links_.empty()) throw ParseError("robot has no links");

  std::map<std::string, std::size_t, std::less<>> by_name;
  for (std::size_t i = 0; i < links_.size(); ++i) {
    if (!by_name.emplace(links_[i].name, i).second) {
      throw ParseError("duplicate link name '" + links_[i].name + "'");
    }
  }
  auto lookup = [&](const std::string& name, const Joint& j) {
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw ParseError("joint '" + j.name + "' references unknown link '" + name + "'");
    }
    return it->second;
  };

  std::vector<int> parent_joint(links_.size(), -1);
  std::vector<std::vector<std::size_t>> children(links_.size());
  for (std::size_t j = 0; j < joints_.size(); ++j) {
    const Joint& joint = joints_[j];
    const std::size_t p = lookup(joint.parent, joint);
    const std::size_t c = lookup(joint.child, joint);
    if (p == c) throw KinematicLoop("joint '" + joint.name + "' connects a link to itself");
    if (parent_joint[c] >= 0) {
      throw KinematicLoop("link '" + joint.child + "' has more than one parent joint");
    }
    if (joint.type != JointType::fixed && std::abs(joint.axis.norm() - 1.0) > 1e-9) {
      throw ParseError("joint '" + joint.name + "' axis is not unit length");
    }
    parent_joint[c] = static_cast<int>(j);
    children[p].push_back(j);
  }

  std::vector<std::size_t> roots;
  for (std::size_t i = 0; i < links_.size(); ++i) {
    if (parent_joint[i] < 0) roots.push_back(i);
  }
  if (roots.empty()) throw KinematicLoop("every link has a parent; the joint graph has a cycle");
  if (roots.size() > 1) {
    throw ParseError("multiple root links ('" + links_[roots[0]].name + "', '" +
                     links_[roots[1]].name + "')");
  }
  root_ = roots.front();

  // Depth-first traversal, children in document order.
  std::vector<bool> visited(links_.size(), false);
  visited[root_] = true;
  std::size_t reached = 1;
  auto visit = [&](auto&& self, std::size_t link) -> void {
    for (std::size_t j : children[link]) {
      const std::size_t c = by_name.find(joints_[j].child)->second;
      if (visited[c]) throw KinematicLoop("link '" + links_[c].name + "' reached twice");
      visited[c] = true;
      ++reached;
      int slot = -1;
      if (joints_[j].type != JointType::fixed) {
        slot = static_cast<int>(movable_.size());
        movable_.push_back(j);
      }
      order_.push_back({j, link, c, slot});
      self(self, c);
    }
  };
  visit(visit, root_);
  if (reached != links_.size()) {
    throw KinematicLoop("links unreachable from base '" + links_[root_].name +
                        "'; a joint's child is one of its ancestors");
  }
}

std::size_t RobotModel::link_index(std::string_view name) const {
  for (std::size_t i = 0; i < links_.size(); ++i) {
    if (links_[i].name == name) return i;
  }
  throw std::out_of_range("unknown link '" + std::string(name) + "'");
}

const Pose& LinkPoses::at(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return poses[i];
  }
  throw std::out_of_range("unknown link '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// URDF parsing

namespace {

std::vector<double> parse_numbers(const std::string& text, std::size_t expected, const std::string& what) {
  std::istringstream in(text);
  std::vector<double> out;
  double v;
  while (in >> v) out.push_back(v);
  if (!in.eof() || out.size() != expected) {
    throw ParseError("expected " + std::to_string(expected) + " numbers in " + what + ", got '" + text + "'");
  }
  return out;
}

Pose parse_origin(const pt::ptree& node, const std::string& context) {
  Pose p;
  const auto origin = node.get_child_optional("origin");
  if (!origin) return p;
  const auto xyz = parse_numbers(origin->get<std::string>("<xmlattr>.xyz", "0 0 0"), 3, context + " origin xyz");
  const auto rpy = parse_numbers(origin->get<std::string>("<xmlattr>.rpy", "0 0 0"), 3, context + " origin rpy");
  p.translation = Vec3(xyz[0], xyz[1], xyz[2]);
  p.rotation = rpy_to_rotation(rpy[0], rpy[1], rpy[2]);
  return p;
}

std::string required_attr(const pt::ptree& node, const std::string& attr, const std::string& context) {
  auto v = node.get_optional<std::string>("<xmlattr>." + attr);
  if (!v || v->empty()) throw ParseError(context + " is missing attribute '" + attr + "'");
  return *v;
}

fs::path resolve_mesh_path(const std::string& ref, const fs::path& mesh_root) {
  constexpr std::string_view pkg = "package://";
  constexpr std::string_view file = "file://";
  if (ref.rfind(pkg, 0) == 0) {
    const fs::path rest = ref.substr(pkg.size());
    const fs::path with_package = mesh_root / rest;
    if (fs::exists(with_package)) return with_package;
    // Drop the package name: package://pkg/meshes/a.stl -> mesh_root/meshes/a.stl
    auto it = rest.begin();
    fs::path stripped;
    for (++it; it != rest.end(); ++it) stripped /= *it;
    const fs::path without_package = mesh_root / stripped;
    if (fs::exists(without_package)) return without_package;
    return with_package;
  }
  if (ref.rfind(file, 0) == 0) return fs::path(ref.substr(file.size()));
  const fs::path p(ref);
  return p.is_absolute() ? p : mesh_root / p;
}

Link parse_link(const pt::ptree& node, const fs::path& mesh_root, std::vector<std::string>& warnings) {
  Link link;
  link.name = required_attr(node, "name", "<link>");
  for (const auto& [tag, child] : node) {
    if (tag != "visual") continue;
    const auto mesh_node = child.get_child_optional("geometry.mesh");
    if (!mesh_node) continue;  // primitive shapes carry no mesh file
    const std::string ref = required_attr(*mesh_node, "filename", "<mesh> of link '" + link.name + "'");
    const auto scale_v = parse_numbers(mesh_node->get<std::string>("<xmlattr>.scale", "1 1 1"), 3,
                                       "mesh scale of link '" + link.name + "'");
    const Pose origin = parse_origin(child, "visual of link '" + link.name + "'");
    const fs::path path = resolve_mesh_path(ref, mesh_root);
    if (!fs::exists(path)) {
      throw MissingMesh("link '" + link.name + "': mesh '" + ref + "' not found at " + path.string());
    }
    TriangleMesh mesh = load_mesh(path);
    const Vec3 scale(scale_v[0], scale_v[1], scale_v[2]);
    for (auto& v : mesh.vertices) v = apply(origin, scale.cwiseProduct(v));
    if (scale.prod() < 0.0) {
      for (auto& t : mesh.triangles) std::swap(t[1], t[2]);
    }
    if (orient_outward(mesh)) {
      warnings.push_back("link '" + link.name + "': mesh '" + ref +
                         "' had mostly inward-facing triangles; orientation flipped");
    }
    const int offset = static_cast<int>(link.geometry.vertices.size());
    link.geometry.vertices.insert(link.geometry.vertices.end(), mesh.vertices.begin(), mesh.vertices.end());
    for (const auto& t : mesh.triangles) {
      link.geometry.triangles.push_back({t[0] + offset, t[1] + offset, t[2] + offset});
    }
    link.mesh_refs.push_back(ref);
  }
  return link;
}

Joint parse_joint(const pt::ptree& node) {
  Joint j;
  j.name = required_attr(node, "name", "<joint>");
  const std::string ctx = "joint '" + j.name + "'";
  const std::string type = required_attr(node, "type", ctx);
  bool limited = false;
  if (type == "revolute") {
    j.type = JointType::revolute;
    limited = true;
  } else if (type == "continuous") {
    j.type = JointType::revolute;
  } else if (type == "prismatic") {
    j.type = JointType::prismatic;
    limited = true;
  } else if (type == "fixed") {
    j.type = JointType::fixed;
  } else {
    throw ParseError(ctx + " has unsupported type '" + type + "'");
  }
  j.parent = required_attr(node.get_child("parent", pt::ptree{}), "link", ctx + " <parent>");
  j.child = required_attr(node.get_child("child", pt::ptree{}), "link", ctx + " <child>");
  j.origin = parse_origin(node, ctx);
  if (const auto axis = node.get_optional<std::string>("axis.<xmlattr>.xyz")) {
    const auto a = parse_numbers(*axis, 3, ctx + " axis");
    const Vec3 v(a[0], a[1], a[2]);
    if (v.norm() == 0.0) throw ParseError(ctx + " has a zero axis");
    j.axis = v.normalized();
  }
  if (limited) {
    if (const auto limit = node.get_child_optional("limit")) {
      j.lower = limit->get<double>("<xmlattr>.lower", 0.0);
      j.upper = limit->get<double>("<xmlattr>.upper", 0.0);
      if (j.lower > j.upper) throw ParseError(ctx + " has lower limit above upper limit");
    }
  }
  return j;
}

}  // namespace

RobotModel parse_robot(const std::string& description_text, const fs::path& mesh_root) {
  pt::ptree tree;
  try {
    std::istringstream in(description_text);
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& e) {
    throw ParseError("malformed robot description at line " + std::to_string(e.line()) + ": " + e.message());
  }
  const auto robot = tree.get_child_optional("robot");
  if (!robot) throw ParseError("document has no <robot> root element");

  std::vector<std::string> warnings;
  std::vector<Link> links;
  std::vector<Joint> joints;
  try {
    for (const auto& [tag, child] : *robot) {
      if (tag == "link") links.push_back(parse_link(child, mesh_root, warnings));
      else if (tag == "joint") joints.push_back(parse_joint(child));
    }
  } catch (const pt::ptree_error& e) {
    throw ParseError(std::string("invalid robot description: ") + e.what());
  }
  RobotModel model(std::move(links), std::move(joints));
  model.warnings = std::move(warnings);
  return model;
}

RobotModel load_robot(const fs::path& urdf_path, const fs::path& mesh_root) {
  std::ifstream in(urdf_path);
  if (!in) throw ParseError("cannot open robot description " + urdf_path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_robot(ss.str(), mesh_root);
}

// ---------------------------------------------------------------------------
// Forward kinematics and surface sampling

LinkPoses forward_kinematics(const RobotModel& model, const JointConfiguration& q) {
  if (q.values.size() != model.dof()) {
    throw DimensionMismatch("joint configuration has " + std::to_string(q.values.size()) +
                            " values, model has " + std::to_string(model.dof()) + " movable joints");
  }
  LinkPoses out;
  out.names.reserve(model.links().size());
  for (const auto& l : model.links()) out.names.push_back(l.name);
  out.poses.assign(model.links().size(), Pose::identity());

  for (const auto& step : model.traversal()) {
    const Joint& joint = model.joints()[step.joint];
    Pose motion;
    if (step.movable_slot >= 0) {
      const double v = q.values[static_cast<std::size_t>(step.movable_slot)];
      if (v < joint.lower || v > joint.upper) out.limit_warning = true;
      if (joint.type == JointType::revolute) motion.rotation = exp_so3(joint.axis * v);
      else motion.translation = joint.axis * v;
    }
    out.poses[step.child_link] = out.poses[step.parent_link] * joint.origin * motion;
  }
  return out;
}

ModelSurface sample_model_surface(const RobotModel& model, std::size_t samples_per_link, std::uint64_t seed) {
  ModelSurface surface;
  surface.samples_per_link = samples_per_link;
  surface.seed = seed;
  auto& cloud = surface.link_frame;

  for (std::size_t li = 0; li < model.links().size(); ++li) {
    const TriangleMesh& mesh = model.links()[li].geometry;
    if (mesh.vertices.empty()) continue;
    const double area = mesh.surface_area();
    if (!(area > 0.0)) {
      throw DegenerateMesh("link '" + model.links()[li].name + "' mesh has zero surface area");
    }
    const auto vn = mesh.vertex_normals();
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
      cloud.points.push_back(mesh.vertices[v]);
      cloud.normals.push_back(vn[v]);
      cloud.link_index.push_back(static_cast<int>(li));
    }
    if (samples_per_link == 0) continue;

    std::vector<double> cumulative(mesh.triangles.size());
    double acc = 0.0;
    for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
      acc += mesh.face_area(f);
      cumulative[f] = acc;
    }
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(li)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (std::size_t s = 0; s < samples_per_link; ++s) {
      const double pick = uni(rng) * acc;
      auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
      const std::size_t f = std::min<std::size_t>(it - cumulative.begin(), mesh.triangles.size() - 1);
      const auto& t = mesh.triangles[f];
      const double r1 = std::sqrt(uni(rng));
      const double r2 = uni(rng);
      const Vec3 p = (1.0 - r1) * mesh.vertices[t[0]] + r1 * (1.0 - r2) * mesh.vertices[t[1]] +
                     r1 * r2 * mesh.vertices[t[2]];
      cloud.points.push_back(p);
      cloud.normals.push_back(mesh.face_normal(f));
      cloud.link_index.push_back(static_cast<int>(li));
    }
  }
  return surface;
}

PosedModelCloud pose_surface(const ModelSurface& surface, const LinkPoses& link_poses) {
  const auto& src = surface.link_frame;
  PosedModelCloud out;
  out.points.resize(src.size());
  out.normals.resize(src.size());
  out.link_index = src.link_index;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Pose& pose = link_poses.poses[static_cast<std::size_t>(src.link_index[i])];
    out.points[i] = apply(pose, src.points[i]);
    out.normals[i] = pose.rotation * src.normals[i];
  }
  return out;
}

PosedModelCloud pose_model_cloud(const RobotModel& model, const JointConfiguration& q,
                                 std::size_t samples_per_link, std::uint64_t seed) {
  const LinkPoses fk = forward_kinematics(model, q);
  return pose_surface(sample_model_surface(model, samples_per_link, seed), fk);
}

}  // namespace mfcal
