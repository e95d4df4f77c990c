#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "mfcal/liegroup.hpp"
#include "mfcal/mesh.hpp"

namespace mfcal {

struct Link {
  std::string name;
  // Visual geometry already expressed in the link frame (mesh scale and visual
  // origin applied). Empty for links without visual meshes.
  TriangleMesh geometry;
  std::vector<std::string> mesh_refs;
};

enum class JointType { revolute, prismatic, fixed };

struct Joint {
  std::string name;
  JointType type = JointType::fixed;
  std::string parent;
  std::string child;
  Pose origin;
  Vec3 axis = Vec3::UnitX();
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
};

// Kinematic tree with per-link surface geometry. Immutable after construction;
// the constructor validates the tree invariants.
class RobotModel {
 public:
  RobotModel(std::vector<Link> links, std::vector<Joint> joints);

  const std::vector<Link>& links() const { return links_; }
  const std::vector<Joint>& joints() const { return joints_; }
  const std::string& base_link() const { return links_[root_].name; }

  // Non-fixed joints in depth-first chain order; JointConfiguration values
  // follow this order.
  const std::vector<std::size_t>& movable_joints() const { return movable_; }
  std::size_t dof() const { return movable_.size(); }

  // Index of a link by name; throws std::out_of_range if unknown.
  std::size_t link_index(std::string_view name) const;
  // Last link reached depth-first; the end link of a serial chain.
  std::size_t end_link() const { return order_.empty() ? root_ : order_.back().child_link; }

  struct Step {
    std::size_t joint;
    std::size_t parent_link;
    std::size_t child_link;
    int movable_slot;  // -1 for fixed joints
  };
  // Joints in depth-first order from the root, children in document order.
  const std::vector<Step>& traversal() const { return order_; }
  std::size_t root() const { return root_; }

  // Warnings collected while loading (flipped meshes etc.).
  std::vector<std::string> warnings;

 private:
  std::vector<Link> links_;
  std::vector<Joint> joints_;
  std::size_t root_ = 0;
  std::vector<Step> order_;  // joints in depth-first order from the root
  std::vector<std::size_t> movable_;
};

struct JointConfiguration {
  std::vector<double> values;
};

struct LinkPoses {
  std::vector<std::string> names;
  std::vector<Pose> poses;  // indexed like RobotModel::links()
  bool limit_warning = false;

  const Pose& at(std::string_view name) const;
};

// Parses a URDF document. Mesh paths (package:// or relative) resolve against
// mesh_root.
RobotModel parse_robot(const std::string& description_text, const std::filesystem::path& mesh_root);
RobotModel load_robot(const std::filesystem::path& urdf_path, const std::filesystem::path& mesh_root);

LinkPoses forward_kinematics(const RobotModel& model, const JointConfiguration& q);

struct PosedModelCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;
  std::vector<int> link_index;

  std::size_t size() const { return points.size(); }
};

inline constexpr std::size_t kDefaultSamplesPerLink = 2000;

// Per-link surface samples in link frames: the mesh vertices with
// area-weighted vertex normals, followed by samples_per_link area-weighted
// face samples carrying their face normal.
struct ModelSurface {
  PosedModelCloud link_frame;
  std::size_t samples_per_link = 0;
  std::uint64_t seed = 0;
};

ModelSurface sample_model_surface(const RobotModel& model, std::size_t samples_per_link,
                                  std::uint64_t seed);

PosedModelCloud pose_surface(const ModelSurface& surface, const LinkPoses& link_poses);

PosedModelCloud pose_model_cloud(const RobotModel& model, const JointConfiguration& q,
                                 std::size_t samples_per_link = kDefaultSamplesPerLink,
                                 std::uint64_t seed = 0);

Mat3 rpy_to_rotation(double roll, double pitch, double yaw);

}  // namespace mfcal
