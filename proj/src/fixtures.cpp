#include "plastic_shell/fixtures.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <utility>
#include <vector>

namespace plastic_shell {

namespace {

TriangleMesh make_mesh(const std::vector<Vec3d>& vertices, const std::vector<Eigen::Vector3i>& faces) {
  Eigen::Matrix3Xd x(3, vertices.size());
  for (std::size_t i = 0; i < vertices.size(); ++i) x.col(i) = vertices[i];
  Eigen::Matrix3Xi f(3, faces.size());
  for (std::size_t i = 0; i < faces.size(); ++i) f.col(i) = faces[i];
  return TriangleMesh(std::move(x), std::move(f));
}

void check_positive(int value, const char* what) {
  if (value < 1) throw Error("fixture", std::string(what) + " must be at least 1");
}

// Quad grid on a (cols+1) x (rows+1) lattice, optionally wrapping around in u.
std::vector<Eigen::Vector3i> grid_faces(int cols, int rows, bool wrap_u, bool wrap_v) {
  const int stride = wrap_u ? cols : cols + 1;
  const int vrows = wrap_v ? rows : rows + 1;
  auto id = [&](int i, int j) { return (j % vrows) * stride + (wrap_u ? i % cols : i); };
  std::vector<Eigen::Vector3i> faces;
  for (int j = 0; j < rows; ++j)
    for (int i = 0; i < cols; ++i) {
      faces.emplace_back(id(i, j), id(i + 1, j), id(i + 1, j + 1));
      faces.emplace_back(id(i, j), id(i + 1, j + 1), id(i, j + 1));
    }
  return faces;
}

}  // namespace

TriangleMesh plane_grid(int nx, int ny, double width, double height) {
  check_positive(nx, "nx");
  check_positive(ny, "ny");
  std::vector<Vec3d> v;
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) v.emplace_back(width * i / nx, height * j / ny, 0.0);
  return make_mesh(v, grid_faces(nx, ny, false, false));
}

TriangleMesh icosphere(int subdivisions, double radius) {
  if (subdivisions < 0) throw Error("fixture", "subdivisions must be non-negative");
  const double phi = std::numbers::phi;
  std::vector<Vec3d> v = {{-1, phi, 0}, {1, phi, 0},  {-1, -phi, 0}, {1, -phi, 0}, {0, -1, phi},  {0, 1, phi},
                          {0, -1, -phi}, {0, 1, -phi}, {phi, 0, -1},  {phi, 0, 1},  {-phi, 0, -1}, {-phi, 0, 1}};
  for (auto& p : v) p.normalize();
  std::vector<Eigen::Vector3i> faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                        {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                        {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                        {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int level = 0; level < subdivisions; ++level) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      if (auto it = midpoint.find(key); it != midpoint.end()) return it->second;
      v.push_back((v[a] + v[b]).normalized());
      const int id = static_cast<int>(v.size()) - 1;
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<Eigen::Vector3i> next;
    for (const auto& f : faces) {
      const int a = mid(f(0), f(1));
      const int b = mid(f(1), f(2));
      const int c = mid(f(2), f(0));
      next.emplace_back(f(0), a, c);
      next.emplace_back(f(1), b, a);
      next.emplace_back(f(2), c, b);
      next.emplace_back(a, b, c);
    }
    faces = std::move(next);
  }
  for (auto& p : v) p *= radius;
  return make_mesh(v, faces);
}

TriangleMesh cylinder(int around, int along, double radius, double length) {
  if (around < 3) throw Error("fixture", "a cylinder needs at least 3 segments around");
  check_positive(along, "along");
  std::vector<Vec3d> v;
  for (int j = 0; j <= along; ++j)
    for (int i = 0; i < around; ++i) {
      const double a = 2.0 * std::numbers::pi * i / around;
      v.emplace_back(radius * std::cos(a), radius * std::sin(a), length * j / along);
    }
  return make_mesh(v, grid_faces(around, along, true, false));
}

TriangleMesh torus(int major_segments, int minor_segments, double major_radius, double minor_radius) {
  if (major_segments < 3 || minor_segments < 3) throw Error("fixture", "a torus needs at least 3 segments each way");
  std::vector<Vec3d> v;
  for (int j = 0; j < minor_segments; ++j)
    for (int i = 0; i < major_segments; ++i) {
      const double u = 2.0 * std::numbers::pi * i / major_segments;
      const double w = 2.0 * std::numbers::pi * j / minor_segments;
      const double r = major_radius + minor_radius * std::cos(w);
      v.emplace_back(r * std::cos(u), r * std::sin(u), minor_radius * std::sin(w));
    }
  return make_mesh(v, grid_faces(major_segments, minor_segments, true, true));
}

TriangleMesh disk(int rings, int segments, double radius) {
  check_positive(rings, "rings");
  if (segments < 3) throw Error("fixture", "a disk needs at least 3 segments");
  std::vector<Vec3d> v = {Vec3d::Zero()};
  for (int r = 1; r <= rings; ++r)
    for (int i = 0; i < segments; ++i) {
      const double a = 2.0 * std::numbers::pi * i / segments;
      v.emplace_back(radius * r / rings * std::cos(a), radius * r / rings * std::sin(a), 0.0);
    }
  auto id = [&](int r, int i) { return r == 0 ? 0 : 1 + (r - 1) * segments + i % segments; };
  std::vector<Eigen::Vector3i> faces;
  for (int i = 0; i < segments; ++i) faces.emplace_back(0, id(1, i), id(1, i + 1));
  for (int r = 1; r < rings; ++r)
    for (int i = 0; i < segments; ++i) {
      faces.emplace_back(id(r, i), id(r + 1, i), id(r + 1, i + 1));
      faces.emplace_back(id(r, i), id(r + 1, i + 1), id(r, i + 1));
    }
  return make_mesh(v, faces);
}

}  // namespace plastic_shell
