#include "plastic_shell/mesh.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>
#include <string>

namespace plastic_shell {

namespace {

void check_nondegenerate(const Eigen::Matrix3Xd& positions, const Eigen::Matrix3Xi& triangles) {
  const double diag = bbox_diagonal(positions);
  const double min_area = kDegenerateAreaFraction * diag * diag;
  for (int t = 0; t < triangles.cols(); ++t) {
    const Vec3d x0 = positions.col(triangles(0, t));
    const double area =
        0.5 * (positions.col(triangles(1, t)) - x0).cross(positions.col(triangles(2, t)) - x0).norm();
    if (!(area >= min_area))
      throw Error("mesh", "degenerate rest triangle " + std::to_string(t), t);
  }
}

}  // namespace

TriangleMesh::TriangleMesh(Eigen::Matrix3Xd positions, Eigen::Matrix3Xi triangles)
    : rest_(std::move(positions)), triangles_(std::move(triangles)) {
  if (!rest_.allFinite()) throw Error("mesh", "non-finite vertex position");
  build_topology();
  check_nondegenerate(rest_, triangles_);
  current_ = rest_;
}

void TriangleMesh::build_topology() {
  const int n = num_vertices();
  const int m = num_triangles();
  if (m == 0) throw Error("mesh", "mesh has no triangles");

  std::vector<char> used(n, 0);
  for (int t = 0; t < m; ++t) {
    for (int i = 0; i < 3; ++i) {
      const int v = triangles_(i, t);
      if (v < 0 || v >= n) throw Error("mesh", "triangle " + std::to_string(t) + " has vertex index out of range", t);
      used[v] = 1;
    }
    if (triangles_(0, t) == triangles_(1, t) || triangles_(1, t) == triangles_(2, t) ||
        triangles_(0, t) == triangles_(2, t))
      throw Error("mesh", "triangle " + std::to_string(t) + " repeats a vertex", t);
  }
  for (int v = 0; v < n; ++v)
    if (!used[v]) throw Error("mesh", "vertex " + std::to_string(v) + " is not referenced by any triangle", v);

  // Undirected edge -> incident (triangle, local edge) list.
  std::map<std::pair<int, int>, std::vector<std::pair<int, int>>> incidence;
  for (int t = 0; t < m; ++t)
    for (int i = 0; i < 3; ++i) {
      const int a = triangles_((i + 1) % 3, t);
      const int b = triangles_((i + 2) % 3, t);
      incidence[{std::min(a, b), std::max(a, b)}].emplace_back(t, i);
    }

  adjacency_.setConstant(3, m, kNone);
  opposite_.setConstant(3, m, kNone);
  for (const auto& [edge, faces] : incidence) {
    if (faces.size() > 2)
      throw Error("mesh",
                  "non-manifold edge (" + std::to_string(edge.first) + ", " + std::to_string(edge.second) +
                      ") has " + std::to_string(faces.size()) + " incident triangles",
                  faces.front().first);
    if (faces.size() != 2) continue;
    const auto [t, i] = faces[0];
    const auto [u, j] = faces[1];
    // Consistent orientation: the shared edge is traversed in opposite directions.
    if (triangles_((i + 1) % 3, t) != triangles_((j + 2) % 3, u))
      throw Error("mesh", "triangles " + std::to_string(t) + " and " + std::to_string(u) +
                              " have inconsistent orientation",
                  t);
    adjacency_(i, t) = u;
    adjacency_(j, u) = t;
    opposite_(i, t) = triangles_(j, u);
    opposite_(j, u) = triangles_(i, t);
  }

  // Components over the dual graph, propagated to vertices.
  std::vector<int> tri_component(m, -1);
  num_components_ = 0;
  std::vector<int> stack;
  for (int seed = 0; seed < m; ++seed) {
    if (tri_component[seed] >= 0) continue;
    stack.push_back(seed);
    tri_component[seed] = num_components_;
    while (!stack.empty()) {
      const int t = stack.back();
      stack.pop_back();
      for (int i = 0; i < 3; ++i) {
        const int u = adjacency_(i, t);
        if (u != kNone && tri_component[u] < 0) {
          tri_component[u] = num_components_;
          stack.push_back(u);
        }
      }
    }
    ++num_components_;
  }
  // Triangles touching only at a vertex land in different dual components;
  // merge them through shared vertices.
  std::vector<int> parent(num_components_);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int c) {
    while (parent[c] != c) c = parent[c] = parent[parent[c]];
    return c;
  };
  vertex_component_.assign(n, -1);
  for (int t = 0; t < m; ++t)
    for (int i = 0; i < 3; ++i) {
      int& vc = vertex_component_[triangles_(i, t)];
      if (vc < 0)
        vc = tri_component[t];
      else
        parent[find(vc)] = find(tri_component[t]);
    }
  std::map<int, int> relabel;
  for (int& vc : vertex_component_) {
    const int root = find(vc);
    auto it = relabel.try_emplace(root, static_cast<int>(relabel.size())).first;
    vc = it->second;
  }
  num_components_ = static_cast<int>(relabel.size());
}

void TriangleMesh::set_rest_positions(const Eigen::Matrix3Xd& positions) {
  if (positions.cols() != rest_.cols()) throw Error("mesh", "rest position count mismatch");
  check_nondegenerate(positions, triangles_);
  rest_ = positions;
}

void TriangleMesh::set_current_positions(const Eigen::Matrix3Xd& positions) {
  if (positions.cols() != current_.cols()) throw Error("mesh", "current position count mismatch");
  current_ = positions;
}

std::vector<std::pair<int, int>> TriangleMesh::boundary_edges() const {
  std::vector<std::pair<int, int>> edges;
  for (int t = 0; t < num_triangles(); ++t)
    for (int i = 0; i < 3; ++i)
      if (adjacency_(i, t) == kNone) edges.emplace_back(t, i);
  return edges;
}

std::array<int, 6> TriangleMesh::stencil(int t) const {
  return {triangles_(0, t), triangles_(1, t), triangles_(2, t),
          opposite_(0, t),  opposite_(1, t),  opposite_(2, t)};
}

double bbox_diagonal(const Eigen::Matrix3Xd& positions) {
  if (positions.cols() == 0) return 0.0;
  return (positions.rowwise().maxCoeff() - positions.rowwise().minCoeff()).norm();
}

TriangleMesh load_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open mesh file " + path.string());

  std::vector<Vec3d> vertices;
  std::vector<Eigen::Vector3i> faces;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag) || tag[0] == '#') continue;
    auto fail = [&](const std::string& what) {
      return Error("io", path.string() + ":" + std::to_string(line_no) + ": " + what, line_no);
    };
    if (tag == "v") {
      Vec3d p;
      if (!(ss >> p.x() >> p.y() >> p.z())) throw fail("malformed vertex record");
      vertices.push_back(p);
    } else if (tag == "f") {
      std::vector<int> poly;
      std::string tok;
      while (ss >> tok) {
        // Accept i, i/t, i//n, i/t/n.
        const std::string head = tok.substr(0, tok.find('/'));
        std::size_t used = 0;
        int idx = 0;
        try {
          idx = std::stoi(head, &used);
        } catch (const std::exception&) {
          throw fail("malformed face index '" + tok + "'");
        }
        if (used != head.size() || idx == 0) throw fail("malformed face index '" + tok + "'");
        idx = idx > 0 ? idx - 1 : static_cast<int>(vertices.size()) + idx;
        if (idx < 0 || idx >= static_cast<int>(vertices.size())) throw fail("face index out of range");
        poly.push_back(idx);
      }
      if (poly.size() < 3) throw fail("face with fewer than 3 vertices");
      for (std::size_t k = 1; k + 1 < poly.size(); ++k) faces.emplace_back(poly[0], poly[k], poly[k + 1]);
    }
  }

  Eigen::Matrix3Xd positions(3, vertices.size());
  for (std::size_t v = 0; v < vertices.size(); ++v) positions.col(v) = vertices[v];
  Eigen::Matrix3Xi triangles(3, faces.size());
  for (std::size_t f = 0; f < faces.size(); ++f) triangles.col(f) = faces[f];
  return TriangleMesh(std::move(positions), std::move(triangles));
}

void save_obj(const TriangleMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot write mesh file " + path.string());
  out << std::setprecision(17);
  const auto& x = mesh.current_positions();
  for (int v = 0; v < mesh.num_vertices(); ++v) out << "v " << x(0, v) << ' ' << x(1, v) << ' ' << x(2, v) << '\n';
  const auto& f = mesh.triangles();
  for (int t = 0; t < mesh.num_triangles(); ++t)
    out << "f " << f(0, t) + 1 << ' ' << f(1, t) + 1 << ' ' << f(2, t) + 1 << '\n';
  if (!out) throw Error("io", "failed writing mesh file " + path.string());
}

Eigen::Matrix3Xd face_normals(const TriangleMesh& mesh, const Eigen::Matrix3Xd& positions) {
  const auto& f = mesh.triangles();
  Eigen::Matrix3Xd normals(3, mesh.num_triangles());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Vec3d x0 = positions.col(f(0, t));
    const Vec3d c = (positions.col(f(1, t)) - x0).cross(positions.col(f(2, t)) - x0);
    const double len = c.norm();
    if (!(len > 0.0) || !std::isfinite(len)) throw Error("mesh", "degenerate face " + std::to_string(t), t);
    normals.col(t) = c / len;
  }
  return normals;
}

Eigen::Matrix3Xd mid_edge_normals(const TriangleMesh& mesh, const Eigen::Matrix3Xd& positions) {
  const Eigen::Matrix3Xd faces = face_normals(mesh, positions);
  const auto& adj = mesh.edge_adjacency();
  Eigen::Matrix3Xd normals(3, 3 * mesh.num_triangles());
  for (int t = 0; t < mesh.num_triangles(); ++t)
    for (int i = 0; i < 3; ++i) {
      const int u = adj(i, t);
      if (u == kNone) {
        normals.col(3 * t + i) = faces.col(t);
        continue;
      }
      const Vec3d m = faces.col(t) + faces.col(u);
      if (m.norm() < kAntiParallelTolerance)
        throw Error("mesh", "anti-parallel face normals across an edge of triangle " + std::to_string(t), t);
      normals.col(3 * t + i) = m.normalized();
    }
  return normals;
}

}  // namespace plastic_shell
