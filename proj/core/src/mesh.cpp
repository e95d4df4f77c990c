#include "mfcal/mesh.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "mfcal/errors.hpp"

namespace mfcal {

namespace fs = std::filesystem;

double TriangleMesh::face_area(std::size_t face) const {
  const auto& t = triangles[face];
  const Vec3 e1 = vertices[t[1]] - vertices[t[0]];
  const Vec3 e2 = vertices[t[2]] - vertices[t[0]];
  return 0.5 * e1.cross(e2).norm();
}

Vec3 TriangleMesh::face_normal(std::size_t face) const {
  const auto& t = triangles[face];
  const Vec3 n = (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]);
  const double len = n.norm();
  return len > 0.0 ? Vec3(n / len) : Vec3::Zero();
}

double TriangleMesh::surface_area() const {
  double area = 0.0;
  for (std::size_t f = 0; f < triangles.size(); ++f) area += face_area(f);
  return area;
}

std::vector<Vec3> TriangleMesh::vertex_normals() const {
  std::vector<Vec3> normals(vertices.size(), Vec3::Zero());
  for (const auto& t : triangles) {
    // Unnormalized cross product = 2 * area * unit normal.
    const Vec3 n = (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]);
    for (int i : t) normals[i] += n;
  }
  for (auto& n : normals) {
    const double len = n.norm();
    n = len > 0.0 ? Vec3(n / len) : Vec3::UnitZ();
  }
  return normals;
}

namespace {

class VertexWelder {
 public:
  explicit VertexWelder(TriangleMesh& mesh) : mesh_(mesh) {}

  int add(const Vec3& v) {
    const auto key = std::make_tuple(v.x(), v.y(), v.z());
    const auto [it, inserted] = index_.try_emplace(key, static_cast<int>(mesh_.vertices.size()));
    if (inserted) mesh_.vertices.push_back(v);
    return it->second;
  }

 private:
  TriangleMesh& mesh_;
  std::map<std::tuple<double, double, double>, int> index_;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingMesh("cannot open mesh file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool looks_binary_stl(const std::string& data) {
  if (data.size() < 84) return false;
  std::uint32_t n = 0;
  std::memcpy(&n, data.data() + 80, 4);
  return data.size() == 84 + 50 * static_cast<std::size_t>(n);
}

TriangleMesh parse_binary_stl(const std::string& data) {
  TriangleMesh mesh;
  VertexWelder weld(mesh);
  std::uint32_t n = 0;
  std::memcpy(&n, data.data() + 80, 4);
  mesh.triangles.reserve(n);
  const char* p = data.data() + 84;
  for (std::uint32_t f = 0; f < n; ++f, p += 50) {
    std::array<int, 3> tri{};
    for (int k = 0; k < 3; ++k) {
      float xyz[3];
      std::memcpy(xyz, p + 12 + 12 * k, 12);
      tri[k] = weld.add(Vec3(xyz[0], xyz[1], xyz[2]));
    }
    mesh.triangles.push_back(tri);
  }
  return mesh;
}

TriangleMesh parse_ascii_stl(const std::string& data, const fs::path& path) {
  TriangleMesh mesh;
  VertexWelder weld(mesh);
  std::istringstream in(data);
  std::string token;
  std::vector<int> facet;
  while (in >> token) {
    if (token == "vertex") {
      Vec3 v;
      if (!(in >> v.x() >> v.y() >> v.z())) {
        throw MissingMesh("malformed ASCII STL vertex in " + path.string());
      }
      facet.push_back(weld.add(v));
    } else if (token == "endfacet") {
      if (facet.size() != 3) throw MissingMesh("non-triangular STL facet in " + path.string());
      mesh.triangles.push_back({facet[0], facet[1], facet[2]});
      facet.clear();
    }
  }
  return mesh;
}

std::string lower_extension(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

}  // namespace

TriangleMesh load_stl(const fs::path& path) {
  const std::string data = read_file(path);
  if (looks_binary_stl(data)) return parse_binary_stl(data);
  if (data.rfind("solid", 0) == 0) return parse_ascii_stl(data, path);
  throw MissingMesh("unrecognized STL encoding: " + path.string());
}

TriangleMesh load_obj(const fs::path& path) {
  const std::string data = read_file(path);
  TriangleMesh mesh;
  std::istringstream in(data);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      Vec3 v;
      if (!(ls >> v.x() >> v.y() >> v.z())) {
        throw MissingMesh("malformed OBJ vertex at " + path.string() + ":" + std::to_string(line_no));
      }
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<int> poly;
      std::string ref;
      while (ls >> ref) {
        const int idx = std::stoi(ref.substr(0, ref.find('/')));
        const int n = static_cast<int>(mesh.vertices.size());
        const int resolved = idx < 0 ? n + idx : idx - 1;
        if (resolved < 0 || resolved >= n) {
          throw MissingMesh("OBJ face index out of range at " + path.string() + ":" +
                            std::to_string(line_no));
        }
        poly.push_back(resolved);
      }
      for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
        mesh.triangles.push_back({poly[0], poly[k], poly[k + 1]});
      }
    }
  }
  return mesh;
}

TriangleMesh load_mesh(const fs::path& path) {
  if (!fs::exists(path)) throw MissingMesh("mesh file not found: " + path.string());
  const std::string ext = lower_extension(path);
  if (ext == ".stl") return load_stl(path);
  if (ext == ".obj") return load_obj(path);
  throw MissingMesh("unsupported mesh format '" + ext + "': " + path.string());
}

void write_obj(const TriangleMesh& mesh, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(9);
  for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& t : mesh.triangles) {
    out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  }
}

void write_stl_binary(const TriangleMesh& mesh, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  char header[80] = {};
  out.write(header, 80);
  const auto n = static_cast<std::uint32_t>(mesh.triangles.size());
  out.write(reinterpret_cast<const char*>(&n), 4);
  for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
    const Vec3 nrm = mesh.face_normal(f);
    float buf[12];
    for (int k = 0; k < 3; ++k) buf[k] = static_cast<float>(nrm[k]);
    for (int v = 0; v < 3; ++v) {
      for (int k = 0; k < 3; ++k) buf[3 + 3 * v + k] = static_cast<float>(mesh.vertices[mesh.triangles[f][v]][k]);
    }
    out.write(reinterpret_cast<const char*>(buf), sizeof(buf));
    const std::uint16_t attr = 0;
    out.write(reinterpret_cast<const char*>(&attr), 2);
  }
}

bool orient_outward(TriangleMesh& mesh) {
  if (mesh.vertices.empty()) return false;
  Vec3 centroid = Vec3::Zero();
  for (const auto& v : mesh.vertices) centroid += v;
  centroid /= static_cast<double>(mesh.vertices.size());

  std::size_t outward = 0, inward = 0;
  for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
    const auto& t = mesh.triangles[f];
    const Vec3 c = (mesh.vertices[t[0]] + mesh.vertices[t[1]] + mesh.vertices[t[2]]) / 3.0;
    const double s = mesh.face_normal(f).dot(c - centroid);
    if (s > 0.0) ++outward;
    else if (s < 0.0) ++inward;
  }
  if (inward <= outward) return false;
  for (auto& t : mesh.triangles) std::swap(t[1], t[2]);
  return true;
}

}  // namespace mfcal
