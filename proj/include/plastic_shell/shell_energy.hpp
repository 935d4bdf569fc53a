#pragma once

#include "plastic_shell/common.hpp"
#include "plastic_shell/fundamental_forms.hpp"
#include "plastic_shell/mesh.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <array>
#include <cmath>
#include <vector>

namespace plastic_shell {

/// Homogeneous isotropic St. Venant-Kirchhoff shell material.
struct MaterialParams {
  double thickness = 0.01;
  double youngs_modulus = 1.0;
  double poisson_ratio = 0.3;

  double c1() const { return youngs_modulus * poisson_ratio / (1.0 - poisson_ratio * poisson_ratio); }
  double c2() const { return youngs_modulus / (2.0 * (1.0 + poisson_ratio)); }

  /// Throws unless h > 0, E > 0 and -1 < nu < 0.5.
  void validate() const;

  /// E = 1, nu = 0.3, h = 0.01 x the rest bounding-box diagonal.
  static MaterialParams defaults_for(const TriangleMesh& mesh);
};

/// (c1/2) tr(M)^2 + c2 tr(M^2).
template <typename Derived>
typename Derived::Scalar sv_norm(const Eigen::MatrixBase<Derived>& m, double c1, double c2) {
  const typename Derived::Scalar tr = m.trace();
  return 0.5 * c1 * tr * tr + c2 * (m * m).trace();
}

/// Energy of one triangle in the canonical parameterization: membrane and
/// bending terms weighted by sqrt(det abar), the 1/2 canonical area folded
/// into the h/8 and h^3/24 prefactors.
template <typename Scalar>
Scalar membrane_energy(const Mat2<Scalar>& a, const Mat2<Scalar>& abar, const MaterialParams& mat) {
  using std::sqrt;
  const Mat2<Scalar> strain = inverse2(abar) * a - Mat2<Scalar>::Identity();
  return mat.thickness / 8.0 * sv_norm(strain, mat.c1(), mat.c2()) * sqrt(det2(abar));
}

template <typename Scalar>
Scalar bending_energy(const Mat2<Scalar>& b, const Mat2<Scalar>& abar, const Mat2<Scalar>& bbar,
                      const MaterialParams& mat) {
  using std::sqrt;
  const double h3 = mat.thickness * mat.thickness * mat.thickness;
  const Mat2<Scalar> shape = inverse2(abar) * (bbar - b);
  return h3 / 24.0 * sv_norm(shape, mat.c1(), mat.c2()) * sqrt(det2(abar));
}

template <typename Scalar>
Scalar triangle_energy(const Mat2<Scalar>& a, const Mat2<Scalar>& b, const Mat2<Scalar>& abar,
                       const Mat2<Scalar>& bbar, const MaterialParams& mat) {
  return membrane_energy(a, abar, mat) + bending_energy(b, abar, bbar, mat);
}

/// Gradient of triangle_energy with respect to the packed forms (a, b),
/// each packed as (xx, yy, xy). Templated so the mixed derivative with
/// respect to the targets can be taken by automatic differentiation.
template <typename Scalar>
Eigen::Matrix<Scalar, 6, 1> triangle_energy_form_gradient(const Mat2<Scalar>& a, const Mat2<Scalar>& b,
                                                          const Mat2<Scalar>& abar, const Mat2<Scalar>& bbar,
                                                          const MaterialParams& mat) {
  using std::sqrt;
  const double c1 = mat.c1();
  const double c2 = mat.c2();
  const double h = mat.thickness;
  const Mat2<Scalar> inv = inverse2(abar);
  const Scalar root = sqrt(det2(abar));
  const Mat2<Scalar> eye = Mat2<Scalar>::Identity();

  const Mat2<Scalar> strain = inv * a - eye;
  const Mat2<Scalar> g_a =
      (h / 8.0) * root * (c1 * strain.trace() * inv + 2.0 * c2 * (inv * a * inv - inv));

  const Mat2<Scalar> diff = bbar - b;
  const Mat2<Scalar> g_b =
      -(h * h * h / 24.0) * root * (c1 * (inv * diff).trace() * inv + 2.0 * c2 * (inv * diff * inv));

  Eigen::Matrix<Scalar, 6, 1> g;
  g << g_a(0, 0), g_a(1, 1), 2.0 * g_a(0, 1), g_b(0, 0), g_b(1, 1), 2.0 * g_b(0, 1);
  return g;
}

/// Hessian of triangle_energy with respect to the packed forms (a, b). The
/// energy is quadratic in a and in b separately, so this is exact and
/// block-diagonal.
Eigen::Matrix<double, 6, 6> triangle_energy_form_hessian(const Mat2d& abar, const MaterialParams& mat);

struct EnergyReport {
  double total = 0.0;
  Eigen::VectorXd per_triangle;
  double membrane = 0.0;
  double bending = 0.0;
};

/// Local energy, gradient and (PSD-projected, inexact) Hessian of one
/// triangle's 6-vertex stencil. Slots of missing opposite vertices are zero.
struct StencilResult {
  double energy = 0.0;
  double membrane = 0.0;
  double bending = 0.0;
  Eigen::Matrix<double, 18, 1> gradient;
  Eigen::Matrix<double, 18, 18> hessian;
};

/// Forms of a stencil together with their Jacobians with respect to the 18
/// stencil coordinates. Mid-edge normal Jacobians are kept for the
/// approximate second-order term.
struct StencilForms {
  Vec3d a;
  Vec3d b;
  Eigen::Matrix<double, 3, 18> da;
  Eigen::Matrix<double, 3, 18> db;
  std::array<Vec3d, 3> normals;
  std::array<Eigen::Matrix<double, 3, 18>, 3> dnormals;
};

StencilForms stencil_forms(const std::array<Vec3d, 6>& x, const std::array<bool, 3>& has_opposite);

/// kHessian is the inexact Hessian (normals' second derivatives dropped),
/// PSD-projected per stencil; kExactHessian is the full unprojected Hessian.
enum class StencilOutput { kEnergy, kGradient, kHessian, kExactHessian };

StencilResult evaluate_stencil(const std::array<Vec3d, 6>& x, const std::array<bool, 3>& has_opposite,
                               const FundamentalFormPair& target, const MaterialParams& mat, StencilOutput what);

/// Eigen-decomposes a symmetric block and clamps negative eigenvalues to 0.
template <int N>
void project_psd(Eigen::Matrix<double, N, N>& m);

/// Elastic shell model bound to one mesh topology. Builds the 3n x 3n
/// sparsity pattern once, so repeated Hessian assemblies only refill values.
class ElasticModel {
 public:
  explicit ElasticModel(const TriangleMesh& mesh);

  int num_dofs() const { return 3 * num_vertices_; }

  EnergyReport energy(const Eigen::Matrix3Xd& positions, const std::vector<FundamentalFormPair>& targets,
                      const MaterialParams& mat) const;

  /// Total energy, and optionally its gradient and the assembled Hessian
  /// (which must come from pattern() or be empty): the PSD-projected inexact
  /// one, or the exact one when `project` is false.
  double evaluate(const Eigen::Matrix3Xd& positions, const std::vector<FundamentalFormPair>& targets,
                  const MaterialParams& mat, Eigen::VectorXd* gradient, Eigen::SparseMatrix<double>* hessian,
                  bool project = true) const;

  /// Zero-valued matrix carrying the stencil sparsity pattern.
  const Eigen::SparseMatrix<double>& pattern() const { return pattern_; }

  /// d(local gradient)/d(packed abar, bbar) for triangle t: 18 x 6.
  Eigen::Matrix<double, 18, 6> gradient_target_jacobian(int t, const Eigen::Matrix3Xd& positions,
                                                        const FundamentalFormPair& target,
                                                        const MaterialParams& mat) const;

  std::array<Vec3d, 6> gather(int t, const Eigen::Matrix3Xd& positions) const;
  const std::array<int, 6>& stencil(int t) const { return stencils_[t]; }
  std::array<bool, 3> has_opposite(int t) const {
    const auto& s = stencils_[t];
    return {s[3] != kNone, s[4] != kNone, s[5] != kNone};
  }

 private:
  int num_vertices_ = 0;
  std::vector<std::array<int, 6>> stencils_;
  Eigen::SparseMatrix<double> pattern_;
  // For triangle t, value index of local entry (r, c) at [t * 324 + r * 18 + c], -1 if absent.
  std::vector<int> value_index_;
};

EnergyReport total_energy(const TriangleMesh& mesh, const std::vector<FundamentalFormPair>& targets,
                          const MaterialParams& mat);
EnergyReport total_energy(const TriangleMesh& mesh, const Eigen::Matrix3Xd& positions,
                          const std::vector<FundamentalFormPair>& targets, const MaterialParams& mat);

/// dE/dx at the current positions (3n, vertex-major).
Eigen::VectorXd elastic_force(const TriangleMesh& mesh, const std::vector<FundamentalFormPair>& targets,
                              const MaterialParams& mat);
Eigen::VectorXd elastic_force(const TriangleMesh& mesh, const Eigen::Matrix3Xd& positions,
                              const std::vector<FundamentalFormPair>& targets, const MaterialParams& mat);

Eigen::SparseMatrix<double> elastic_hessian_spd(const TriangleMesh& mesh,
                                                const std::vector<FundamentalFormPair>& targets,
                                                const MaterialParams& mat);
Eigen::SparseMatrix<double> elastic_hessian_spd(const TriangleMesh& mesh, const Eigen::Matrix3Xd& positions,
                                                const std::vector<FundamentalFormPair>& targets,
                                                const MaterialParams& mat);

}  // namespace plastic_shell
