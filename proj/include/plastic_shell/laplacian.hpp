#pragma once

#include "plastic_shell/common.hpp"
#include "plastic_shell/mesh.hpp"
#include "plastic_shell/plasticity.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <vector>

namespace plastic_shell {

/// Smoothness operator on packed plastic coordinates. Rows of triangle i are
/// sqrt(lambda_theta) * sum_j (theta_i - theta_j) followed by
/// sqrt(lambda_s) * sum_j (S_i - Q_ji S_j Q_ji^T), the latter packed as
/// (xx, yy, sqrt(2) xy) so that the squared row norm is the Frobenius norm.
struct StrainLaplacian {
  Eigen::SparseMatrix<double> op;
  /// transport[3i + e]: Q from the neighbour across edge e of i into i's frame
  /// (identity on boundary edges).
  std::vector<Mat2d> transport;
  double lambda_theta = 1.0;
  double lambda_s = 1.0;

  const Mat2d& transport_into(int triangle, int local_edge) const { return transport[3 * triangle + local_edge]; }
  double energy(const Eigen::VectorXd& p) const { return (op * p).squaredNorm(); }
};

/// In-plane rotation taking frame coordinates of tri_j to those of tri_i once
/// j is unfolded about the shared rest edge into i's plane.
Mat2d edge_transport(const TriangleMesh& mesh, int tri_i, int tri_j);

/// 3x3 matrix acting on packed s: pack(Q mat(s) Q^T).
Eigen::Matrix3d congruence_matrix(const Mat2d& q);

/// sum_j mat(s_i) - Q_ji mat(s_j) Q_ji^T per triangle, packed (xx, yy, xy), 3 x m.
Eigen::Matrix3Xd apply_s_laplacian(const TriangleMesh& mesh, const PlasticStrainField& field,
                                   const std::vector<Mat2d>& transport);

/// sum_j theta_i - theta_j over dual-graph neighbours, 3 x m.
Eigen::Matrix3Xd apply_theta_laplacian(const TriangleMesh& mesh, const PlasticStrainField& field);

/// Transport along every edge from the mesh's rest geometry.
std::vector<Mat2d> edge_transports(const TriangleMesh& mesh);

StrainLaplacian assemble_operator(const TriangleMesh& mesh, double lambda_theta = 1.0, double lambda_s = 1.0);

}  // namespace plastic_shell
