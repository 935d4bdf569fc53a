#pragma once

#include "plastic_shell/common.hpp"

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <filesystem>
#include <utility>
#include <vector>

namespace plastic_shell {

/// Rest triangles smaller than this fraction of the squared bbox diagonal are rejected.
inline constexpr double kDegenerateAreaFraction = 1e-12;
/// Two face normals whose sum is shorter than this have no mid-edge bisector.
inline constexpr double kAntiParallelTolerance = 1e-8;

/// Triangle mesh with rest and current vertex positions.
///
/// Positions are stored column-wise (3 x n) so that the flat 3n coordinate
/// vector used by the solvers is a plain Map over the same memory. Topology is
/// fixed at construction; positions may be replaced afterwards.
///
/// Local conventions: edge i of a triangle is the edge opposite its local
/// vertex i, i.e. (v[i+1], v[i+2]). `edge_adjacency()(i, t)` is the triangle
/// across edge i of t (or kNone) and `opposite_vertices()(i, t)` is that
/// neighbour's vertex not on the shared edge.
class TriangleMesh {
 public:
  TriangleMesh() = default;
  TriangleMesh(Eigen::Matrix3Xd positions, Eigen::Matrix3Xi triangles);

  int num_vertices() const { return static_cast<int>(rest_.cols()); }
  int num_triangles() const { return static_cast<int>(triangles_.cols()); }

  const Eigen::Matrix3Xd& rest_positions() const { return rest_; }
  const Eigen::Matrix3Xd& current_positions() const { return current_; }
  const Eigen::Matrix3Xi& triangles() const { return triangles_; }
  const Eigen::Matrix3Xi& edge_adjacency() const { return adjacency_; }
  const Eigen::Matrix3Xi& opposite_vertices() const { return opposite_; }

  /// Replaces the rest state; rejects degenerate triangles.
  void set_rest_positions(const Eigen::Matrix3Xd& positions);
  void set_current_positions(const Eigen::Matrix3Xd& positions);

  bool is_boundary_edge(int triangle, int local_edge) const {
    return adjacency_(local_edge, triangle) == kNone;
  }
  /// Boundary edges as (triangle, local edge) pairs in triangle order.
  std::vector<std::pair<int, int>> boundary_edges() const;

  /// Connected component of each vertex, components numbered from 0.
  const std::vector<int>& vertex_components() const { return vertex_component_; }
  int num_components() const { return num_components_; }

  /// The 6-vertex stencil of triangle t: its own vertices followed by the
  /// three opposite vertices (kNone across boundary edges).
  std::array<int, 6> stencil(int t) const;

 private:
  void build_topology();

  Eigen::Matrix3Xd rest_;
  Eigen::Matrix3Xd current_;
  Eigen::Matrix3Xi triangles_;
  Eigen::Matrix3Xi adjacency_;
  Eigen::Matrix3Xi opposite_;
  std::vector<int> vertex_component_;
  int num_components_ = 0;
};

/// Flattened 3n view of a 3 x n position matrix.
inline Eigen::Map<Eigen::VectorXd> flat(Eigen::Matrix3Xd& positions) {
  return {positions.data(), positions.size()};
}
inline Eigen::Map<const Eigen::VectorXd> flat(const Eigen::Matrix3Xd& positions) {
  return {positions.data(), positions.size()};
}
inline Eigen::Matrix3Xd unflat(const Eigen::VectorXd& x) {
  return Eigen::Map<const Eigen::Matrix3Xd>(x.data(), 3, x.size() / 3);
}

double bbox_diagonal(const Eigen::Matrix3Xd& positions);

/// Reads `v` and `f` records; polygons are fan-triangulated (0,1,2),(0,2,3),...
TriangleMesh load_obj(const std::filesystem::path& path);
/// Writes current positions with 17 significant digits.
void save_obj(const TriangleMesh& mesh, const std::filesystem::path& path);

template <typename Scalar>
Vec3<Scalar> face_normal(const Vec3<Scalar>& x0, const Vec3<Scalar>& x1, const Vec3<Scalar>& x2) {
  Vec3<Scalar> c = (x1 - x0).cross(x2 - x0);
  return c / c.norm();
}

template <typename Scalar>
Vec3<Scalar> bisector(const Vec3<Scalar>& n_f, const Vec3<Scalar>& n_g) {
  Vec3<Scalar> m = n_f + n_g;
  return m / m.norm();
}

/// Unit face normals (3 x m) of the given positions. Throws on zero-area faces.
Eigen::Matrix3Xd face_normals(const TriangleMesh& mesh, const Eigen::Matrix3Xd& positions);

/// Mid-edge normals, column 3t+i holding the normal on edge i of triangle t.
Eigen::Matrix3Xd mid_edge_normals(const TriangleMesh& mesh, const Eigen::Matrix3Xd& positions);

}  // namespace plastic_shell
