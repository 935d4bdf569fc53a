#pragma once

#include "plastic_shell/common.hpp"
#include "plastic_shell/fundamental_forms.hpp"
#include "plastic_shell/mesh.hpp"

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <filesystem>
#include <vector>

namespace plastic_shell {

/// Per-triangle rotation-strain coordinates packed as p = [theta_t, s_t]_t,
/// 6 entries per triangle in mesh order. theta is an exponential-map
/// rotation vector; s packs the symmetric stretch [[s0, s2], [s2, s1]]
/// expressed in the triangle's orthonormal rest frame.
struct PlasticStrainField {
  Eigen::VectorXd p;

  static PlasticStrainField identity(int num_triangles);

  int num_triangles() const { return static_cast<int>(p.size() / 6); }
  auto theta(int t) { return p.segment<3>(6 * t); }
  auto theta(int t) const { return p.segment<3>(6 * t); }
  auto s(int t) { return p.segment<3>(6 * t + 3); }
  auto s(int t) const { return p.segment<3>(6 * t + 3); }
  Mat2d stretch(int t) const { return unpack_sym<double>(s(t)); }

  /// Index of the first triangle violating ||theta|| < pi or S > 0, or -1.
  int first_inadmissible() const;
  /// Throws naming the triangle if first_inadmissible() >= 0.
  void validate() const;
};

/// Plastic target forms, and the rotated mid-edge normals they were built
/// from (column 3t+i for edge i of triangle t).
struct PlasticTargets {
  std::vector<FundamentalFormPair> forms;
  Eigen::Matrix3Xd rotated_normals;
};

inline double scalar_value(double x) { return x; }
template <typename AD>
auto scalar_value(const AD& x) -> decltype(x.value()) {
  return x.value();
}

/// Rodrigues formula, with a series expansion near 0 so it stays smooth
/// (and differentiable) at the identity.
template <typename Scalar>
Mat3<Scalar> rodrigues(const Vec3<Scalar>& theta) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  const Scalar t2 = theta.squaredNorm();
  Scalar sinc, cosc;
  if (scalar_value(t2) < 1e-8) {
    sinc = 1.0 - t2 / 6.0 + t2 * t2 / 120.0;
    cosc = 0.5 - t2 / 24.0 + t2 * t2 / 720.0;
  } else {
    const Scalar t = sqrt(t2);
    sinc = sin(t) / t;
    cosc = (1.0 - cos(t)) / t2;
  }
  Mat3<Scalar> k;
  k << Scalar(0), -theta(2), theta(1), theta(2), Scalar(0), -theta(0), -theta(1), theta(0), Scalar(0);
  return Mat3<Scalar>::Identity() + sinc * k + cosc * (k * k);
}

/// S^T abar S. S is the stretch in the same (canonical) coordinates as the form.
template <typename Scalar>
Mat2<Scalar> plastic_first_form(const Mat2<Scalar>& rest_form, const Mat2<Scalar>& stretch) {
  return stretch.transpose() * rest_form * stretch;
}

/// Orthonormal rest frame of a triangle: t1 along x_j - x_i, t2 = n x t1.
/// `to_frame` maps canonical (u, v) coordinates to frame coordinates.
struct RestFrame {
  Vec3d t1;
  Vec3d t2;
  Vec3d normal;
  Mat2d to_frame;
};

RestFrame rest_frame(const Vec3d& xi, const Vec3d& xj, const Vec3d& xk);

/// A frame-coordinate stretch S rewritten in canonical coordinates, G^-1 S G.
template <typename Scalar>
Mat2<Scalar> canonical_stretch(const Mat2d& to_frame, const Mat2<Scalar>& stretch) {
  return inverse2(to_frame).cast<Scalar>() * stretch * to_frame.cast<Scalar>();
}

/// Rest data of one triangle needed to evaluate its plastic targets.
struct LocalRestGeometry {
  std::array<Vec3d, 3> x;
  Vec3d normal;
  std::array<Vec3d, 3> neighbour_normal;
  std::array<int, 3> neighbour;
  Mat2d rest_first_form;
  Mat2d to_frame;
};

/// Plastic (abar, bbar) of one triangle from its own (theta, s) and the
/// rotations of its edge neighbours (ignored across boundary edges).
template <typename Scalar>
FormPair<Scalar> local_plastic_forms(const LocalRestGeometry& g, const Vec3<Scalar>& theta, const Vec3<Scalar>& s,
                                     const std::array<Vec3<Scalar>, 3>& neighbour_theta) {
  const Mat3<Scalar> rot = rodrigues(theta);
  const Vec3<Scalar> own_normal = rot * g.normal.cast<Scalar>();
  std::array<Vec3<Scalar>, 3> nbar;
  for (int i = 0; i < 3; ++i) {
    if (g.neighbour[i] == kNone) {
      nbar[i] = own_normal;
    } else {
      const Vec3<Scalar> sum = own_normal + rodrigues(neighbour_theta[i]) * g.neighbour_normal[i].cast<Scalar>();
      const Scalar len = sum.norm();
      if (scalar_value(len) < kAntiParallelTolerance)
        throw Error("plasticity", "anti-parallel rotated normals across an edge", g.neighbour[i]);
      nbar[i] = sum / len;
    }
  }
  const Mat2<Scalar> stretch = canonical_stretch(g.to_frame, unpack_sym(s));

  // Rest edges take the triangle's own rotation; the normals carry the neighbours'.
  const Vec3<Scalar> eij = rot * (g.x[0] - g.x[1]).cast<Scalar>();
  const Vec3<Scalar> eik = rot * (g.x[0] - g.x[2]).cast<Scalar>();
  const Vec3<Scalar> dij = nbar[0] - nbar[1];
  const Vec3<Scalar> dik = nbar[0] - nbar[2];
  Mat2<Scalar> raw;
  raw << dij.dot(eij), dij.dot(eik), dik.dot(eij), dik.dot(eik);

  FormPair<Scalar> forms;
  forms.a = plastic_first_form<Scalar>(g.rest_first_form.cast<Scalar>(), stretch);
  forms.b = symmetrize(Mat2<Scalar>(2.0 * (stretch.transpose() * raw * stretch)));
  return forms;
}

/// Rest geometry of a mesh prepared for repeated target evaluation.
class PlasticityModel {
 public:
  explicit PlasticityModel(const TriangleMesh& mesh);

  int num_triangles() const { return static_cast<int>(local_.size()); }
  const LocalRestGeometry& local(int t) const { return local_[t]; }

  PlasticTargets build_targets(const PlasticStrainField& field) const;

  /// d(packed abar, packed bbar)/d(theta_t, s_t, theta_n0, theta_n1, theta_n2),
  /// 6 x 15; columns of missing neighbours are zero.
  Eigen::Matrix<double, 6, 15> target_jacobian(int t, const PlasticStrainField& field) const;

 private:
  std::vector<LocalRestGeometry> local_;
};

Eigen::Matrix3Xd rotated_mid_edge_normals(const TriangleMesh& mesh, const PlasticStrainField& field);

/// b-bar of one triangle from its rotation, frame stretch and rotated normals
/// (columns 3t..3t+2 of `rotated_normals`).
Mat2d plastic_second_form(const TriangleMesh& mesh, int triangle, const Mat3d& rotation, const Mat2d& stretch,
                          const Eigen::Matrix3Xd& rotated_normals);

/// Targets for every triangle; throws naming the first inadmissible triangle.
PlasticTargets build_targets(const TriangleMesh& mesh, const PlasticStrainField& field);

/// Plastic field checkpoints: a text file with one value per line (6m
/// doubles, packed order) or raw little-endian doubles for ".bin" paths.
void save_plastic_field(const PlasticStrainField& field, const std::filesystem::path& path);
PlasticStrainField load_plastic_field(const std::filesystem::path& path);

}  // namespace plastic_shell
