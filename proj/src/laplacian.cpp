#include "plastic_shell/laplacian.hpp"

#include <cmath>
#include <numbers>

namespace plastic_shell {

namespace {

int shared_edge(const TriangleMesh& mesh, int tri, int other) {
  for (int e = 0; e < 3; ++e)
    if (mesh.edge_adjacency()(e, tri) == other) return e;
  throw Error("laplacian", "triangles " + std::to_string(tri) + " and " + std::to_string(other) + " are not adjacent",
              tri);
}

RestFrame frame_of(const TriangleMesh& mesh, int t) {
  const auto& x = mesh.rest_positions();
  const auto& f = mesh.triangles();
  return rest_frame(x.col(f(0, t)), x.col(f(1, t)), x.col(f(2, t)));
}

double edge_angle(const RestFrame& frame, const Vec3d& edge) {
  return std::atan2(edge.dot(frame.t2), edge.dot(frame.t1));
}

}  // namespace

Mat2d edge_transport(const TriangleMesh& mesh, int tri_i, int tri_j) {
  const int e = shared_edge(mesh, tri_i, tri_j);
  const auto& f = mesh.triangles();
  const auto& x = mesh.rest_positions();
  const Vec3d edge = x.col(f((e + 2) % 3, tri_i)) - x.col(f((e + 1) % 3, tri_i));
  // Unfolding about the shared edge fixes it, so Q is the rotation taking the
  // edge's angle in j's frame to its angle in i's frame.
  const double phi = edge_angle(frame_of(mesh, tri_i), edge) - edge_angle(frame_of(mesh, tri_j), edge);
  Mat2d q;
  q << std::cos(phi), -std::sin(phi), std::sin(phi), std::cos(phi);
  return q;
}

Eigen::Matrix3d congruence_matrix(const Mat2d& q) {
  Eigen::Matrix3d t;
  for (int k = 0; k < 3; ++k) {
    const Mat2d basis = unpack_sym<double>(Vec3d::Unit(k));
    t.col(k) = pack_sym(Mat2d(q * basis * q.transpose()));
  }
  return t;
}

std::vector<Mat2d> edge_transports(const TriangleMesh& mesh) {
  std::vector<Mat2d> transport(3 * mesh.num_triangles(), Mat2d::Identity());
  for (int t = 0; t < mesh.num_triangles(); ++t)
    for (int e = 0; e < 3; ++e) {
      const int u = mesh.edge_adjacency()(e, t);
      if (u != kNone) transport[3 * t + e] = edge_transport(mesh, t, u);
    }
  return transport;
}

Eigen::Matrix3Xd apply_s_laplacian(const TriangleMesh& mesh, const PlasticStrainField& field,
                                   const std::vector<Mat2d>& transport) {
  Eigen::Matrix3Xd out = Eigen::Matrix3Xd::Zero(3, mesh.num_triangles());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    Mat2d acc = Mat2d::Zero();
    for (int e = 0; e < 3; ++e) {
      const int u = mesh.edge_adjacency()(e, t);
      if (u == kNone) continue;
      const Mat2d& q = transport[3 * t + e];
      acc += field.stretch(t) - q * field.stretch(u) * q.transpose();
    }
    out.col(t) = pack_sym(acc);
  }
  return out;
}

Eigen::Matrix3Xd apply_theta_laplacian(const TriangleMesh& mesh, const PlasticStrainField& field) {
  Eigen::Matrix3Xd out = Eigen::Matrix3Xd::Zero(3, mesh.num_triangles());
  for (int t = 0; t < mesh.num_triangles(); ++t)
    for (int e = 0; e < 3; ++e) {
      const int u = mesh.edge_adjacency()(e, t);
      if (u != kNone) out.col(t) += field.theta(t) - field.theta(u);
    }
  return out;
}

StrainLaplacian assemble_operator(const TriangleMesh& mesh, double lambda_theta, double lambda_s) {
  if (!(lambda_theta >= 0.0 && lambda_s >= 0.0)) throw Error("config", "Laplacian weights must be non-negative");
  StrainLaplacian lap;
  lap.lambda_theta = lambda_theta;
  lap.lambda_s = lambda_s;
  lap.transport = edge_transports(mesh);

  const int m = mesh.num_triangles();
  const double wt = std::sqrt(lambda_theta);
  const double ws = std::sqrt(lambda_s);
  const Vec3d row_scale(ws, ws, ws * std::numbers::sqrt2);
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(m) * 48);
  for (int t = 0; t < m; ++t) {
    int degree = 0;
    for (int e = 0; e < 3; ++e) {
      const int u = mesh.edge_adjacency()(e, t);
      if (u == kNone) continue;
      ++degree;
      for (int k = 0; k < 3; ++k) entries.emplace_back(6 * t + k, 6 * u + k, -wt);
      const Eigen::Matrix3d c = congruence_matrix(lap.transport[3 * t + e]);
      for (int r = 0; r < 3; ++r)
        for (int k = 0; k < 3; ++k)
          if (c(r, k) != 0.0) entries.emplace_back(6 * t + 3 + r, 6 * u + 3 + k, -row_scale(r) * c(r, k));
    }
    if (degree == 0) continue;
    for (int k = 0; k < 3; ++k) {
      entries.emplace_back(6 * t + k, 6 * t + k, wt * degree);
      entries.emplace_back(6 * t + 3 + k, 6 * t + 3 + k, row_scale(k) * degree);
    }
  }
  lap.op.resize(6 * m, 6 * m);
  lap.op.setFromTriplets(entries.begin(), entries.end());
  lap.op.makeCompressed();
  return lap;
}

}  // namespace plastic_shell
