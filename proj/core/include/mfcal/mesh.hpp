#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "mfcal/liegroup.hpp"

namespace mfcal {

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;

  double surface_area() const;
  Vec3 face_normal(std::size_t face) const;  // unit, zero for degenerate faces
  double face_area(std::size_t face) const;
  // Area-weighted average of incident face normals, normalized.
  std::vector<Vec3> vertex_normals() const;
};

// Loads binary or ASCII STL and OBJ (positions and faces only). STL vertices
// shared between facets are welded. Unsupported extensions and unreadable
// files raise MissingMesh naming the path.
TriangleMesh load_mesh(const std::filesystem::path& path);
TriangleMesh load_stl(const std::filesystem::path& path);
TriangleMesh load_obj(const std::filesystem::path& path);

void write_obj(const TriangleMesh& mesh, const std::filesystem::path& path);
void write_stl_binary(const TriangleMesh& mesh, const std::filesystem::path& path);

// Majority vote of face orientation against the mesh centroid. If most faces
// point inward every triangle is flipped. Returns true when a flip happened.
bool orient_outward(TriangleMesh& mesh);

}  // namespace mfcal
