#pragma once

#include "plastic_shell/common.hpp"
#include "plastic_shell/mesh.hpp"

#include <vector>

namespace plastic_shell {

/// First (a) and second (b) fundamental form of one triangle, expressed in
/// the canonical parameterization u -> x_j - x_i, v -> x_k - x_i.
template <typename Scalar>
struct FormPair {
  Mat2<Scalar> a = Mat2<Scalar>::Identity();
  Mat2<Scalar> b = Mat2<Scalar>::Zero();
};
using FundamentalFormPair = FormPair<double>;

/// Pull-back of the Euclidean metric to the canonical triangle.
template <typename Scalar>
Mat2<Scalar> first_form(const Vec3<Scalar>& xi, const Vec3<Scalar>& xj, const Vec3<Scalar>& xk) {
  const Vec3<Scalar> e1 = xj - xi;
  const Vec3<Scalar> e2 = xk - xi;
  Mat2<Scalar> a;
  const Scalar off = e1.dot(e2);
  a << e1.squaredNorm(), off, off, e2.squaredNorm();
  return a;
}

/// Mid-edge second fundamental form; n_r lies on the edge opposite x_r.
/// The raw matrix is symmetric only up to round-off and is symmetrized.
template <typename Scalar>
Mat2<Scalar> second_form(const Vec3<Scalar>& xi, const Vec3<Scalar>& xj, const Vec3<Scalar>& xk,
                         const Vec3<Scalar>& ni, const Vec3<Scalar>& nj, const Vec3<Scalar>& nk) {
  const Vec3<Scalar> dij = ni - nj;
  const Vec3<Scalar> dik = ni - nk;
  const Vec3<Scalar> eij = xi - xj;
  const Vec3<Scalar> eik = xi - xk;
  Mat2<Scalar> b;
  b << dij.dot(eij), dij.dot(eik), dik.dot(eij), dik.dot(eik);
  return symmetrize(Mat2<Scalar>(Scalar(2) * b));
}

Mat2d second_form(const TriangleMesh& mesh, int triangle, const Eigen::Matrix3Xd& positions);

/// Both forms for every triangle of the given state.
std::vector<FundamentalFormPair> fundamental_forms(const TriangleMesh& mesh, const Eigen::Matrix3Xd& positions);

}  // namespace plastic_shell
