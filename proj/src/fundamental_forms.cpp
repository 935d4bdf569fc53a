#include "plastic_shell/fundamental_forms.hpp"

namespace plastic_shell {

namespace {

FundamentalFormPair forms_of(const TriangleMesh& mesh, int t, const Eigen::Matrix3Xd& positions,
                             const Eigen::Matrix3Xd& edge_normals) {
  const auto& f = mesh.triangles();
  const Vec3d xi = positions.col(f(0, t));
  const Vec3d xj = positions.col(f(1, t));
  const Vec3d xk = positions.col(f(2, t));
  FundamentalFormPair forms;
  forms.a = first_form(xi, xj, xk);
  forms.b = second_form<double>(xi, xj, xk, edge_normals.col(3 * t), edge_normals.col(3 * t + 1),
                                edge_normals.col(3 * t + 2));
  return forms;
}

}  // namespace

Mat2d second_form(const TriangleMesh& mesh, int triangle, const Eigen::Matrix3Xd& positions) {
  // Only the three faces around `triangle` matter, but mesh-wide normals keep
  // this consistent with fundamental_forms().
  return forms_of(mesh, triangle, positions, mid_edge_normals(mesh, positions)).b;
}

std::vector<FundamentalFormPair> fundamental_forms(const TriangleMesh& mesh, const Eigen::Matrix3Xd& positions) {
  const Eigen::Matrix3Xd normals = mid_edge_normals(mesh, positions);
  std::vector<FundamentalFormPair> forms(mesh.num_triangles());
  for (int t = 0; t < mesh.num_triangles(); ++t) forms[t] = forms_of(mesh, t, positions, normals);
  return forms;
}

}  // namespace plastic_shell
