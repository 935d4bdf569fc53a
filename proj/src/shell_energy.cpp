#include "plastic_shell/shell_energy.hpp"

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/AutoDiff>

#include <algorithm>

namespace plastic_shell {

namespace {

using Jac = Eigen::Matrix<double, 3, 18>;

Mat3d cross_matrix(const Vec3d& v) {
  Mat3d m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

// Unit normal of the face (x[p0], x[p1], x[p2]) and its Jacobian.
void face_normal_jacobian(const std::array<Vec3d, 6>& x, int p0, int p1, int p2, Vec3d& n, Jac& dn) {
  const Vec3d c = (x[p1] - x[p0]).cross(x[p2] - x[p0]);
  const double len = c.norm();
  if (!(len > 0.0)) throw Error("shell_energy", "degenerate face in stencil");
  n = c / len;
  const Mat3d proj = (Mat3d::Identity() - n * n.transpose()) / len;
  dn.setZero();
  dn.middleCols<3>(3 * p0) = proj * cross_matrix(x[p2] - x[p1]);
  dn.middleCols<3>(3 * p1) = proj * cross_matrix(x[p0] - x[p2]);
  dn.middleCols<3>(3 * p2) = proj * cross_matrix(x[p1] - x[p0]);
}

// Jacobian of x[r] - x[s].
Jac edge_jacobian(int r, int s) {
  Jac d = Jac::Zero();
  d.middleCols<3>(3 * r).setIdentity();
  d.middleCols<3>(3 * s) = -Mat3d::Identity();
  return d;
}

// C += w * du^T * d(x[r] - x[s]); the symmetric second-order contribution of
// w * (u . (x[r] - x[s])) with u's own curvature dropped is C + C^T.
void add_edge_coupling(Eigen::Matrix<double, 18, 18>& c, double w, const Jac& du, int r, int s) {
  c.middleCols<3>(3 * r) += w * du.transpose();
  c.middleCols<3>(3 * s) -= w * du.transpose();
}

// Second derivative of v -> mu . v / |v| at v = len * n.
Mat3d normalize_curvature(const Vec3d& mu, const Vec3d& n, double len) {
  return -(mu * n.transpose() + n * mu.transpose() + mu.dot(n) * (Mat3d::Identity() - 3.0 * n * n.transpose())) /
         (len * len);
}

struct FaceFrame {
  int p0, p1, p2;
  Vec3d n;
  double len;
  Jac dc;  // Jacobian of the unnormalized normal (x[p1] - x[p0]) x (x[p2] - x[p0])
  Jac dn;
};

FaceFrame face_frame(const std::array<Vec3d, 6>& x, int p0, int p1, int p2) {
  FaceFrame f{p0, p1, p2, Vec3d::Zero(), 0.0, Jac::Zero(), Jac::Zero()};
  const Vec3d c = (x[p1] - x[p0]).cross(x[p2] - x[p0]);
  f.len = c.norm();
  f.n = c / f.len;
  f.dc.middleCols<3>(3 * p0) = cross_matrix(x[p2] - x[p1]);
  f.dc.middleCols<3>(3 * p1) = cross_matrix(x[p0] - x[p2]);
  f.dc.middleCols<3>(3 * p2) = cross_matrix(x[p1] - x[p0]);
  f.dn = (Mat3d::Identity() - f.n * f.n.transpose()) / f.len * f.dc;
  return f;
}

// h += Hessian of mu . n(x) for a unit face normal.
void add_face_curvature(Eigen::Matrix<double, 18, 18>& h, const FaceFrame& f, const Vec3d& mu) {
  h += f.dc.transpose() * normalize_curvature(mu, f.n, f.len) * f.dc;
  // The unnormalized normal is bilinear in the two edges.
  const Vec3d nu = (mu - f.n * f.n.dot(mu)) / f.len;
  const Jac e1 = edge_jacobian(f.p1, f.p0);
  const Jac e2 = edge_jacobian(f.p2, f.p0);
  const Eigen::Matrix<double, 18, 18> cross = e1.transpose() * (-cross_matrix(nu)) * e2;
  h += cross + cross.transpose();
}

// h += sum_i Hessian of mu_i . n_i(x) over the three mid-edge normals; the
// curvature term the inexact Hessian leaves out.
void add_normal_curvature(Eigen::Matrix<double, 18, 18>& h, const std::array<Vec3d, 6>& x,
                          const std::array<bool, 3>& has_opposite, const std::array<Vec3d, 3>& mu) {
  const FaceFrame face = face_frame(x, 0, 1, 2);
  Vec3d mu_face = Vec3d::Zero();
  for (int i = 0; i < 3; ++i) {
    if (!has_opposite[i]) {
      mu_face += mu[i];
      continue;
    }
    const FaceFrame nbr = face_frame(x, (i + 2) % 3, (i + 1) % 3, 3 + i);
    const Vec3d m = face.n + nbr.n;
    const double len = m.norm();
    const Vec3d n = m / len;
    const Jac dm = face.dn + nbr.dn;
    h += dm.transpose() * normalize_curvature(mu[i], n, len) * dm;
    const Vec3d nu = (mu[i] - n * n.dot(mu[i])) / len;
    mu_face += nu;
    add_face_curvature(h, nbr, nu);
  }
  add_face_curvature(h, face, mu_face);
}

}  // namespace

void MaterialParams::validate() const {
  if (!(thickness > 0.0)) throw Error("config", "thickness must be positive");
  if (!(youngs_modulus > 0.0)) throw Error("config", "Young's modulus must be positive");
  if (!(poisson_ratio > -1.0 && poisson_ratio < 0.5)) throw Error("config", "Poisson ratio must lie in (-1, 0.5)");
}

MaterialParams MaterialParams::defaults_for(const TriangleMesh& mesh) {
  MaterialParams mat;
  mat.thickness = 0.01 * bbox_diagonal(mesh.rest_positions());
  return mat;
}

Eigen::Matrix<double, 6, 6> triangle_energy_form_hessian(const Mat2d& abar, const MaterialParams& mat) {
  const Mat2d inv = inverse2(abar);
  const double root = std::sqrt(det2(abar));
  const double c1 = mat.c1();
  const double c2 = mat.c2();
  std::array<Mat2d, 3> basis;
  basis[0] << 1, 0, 0, 0;
  basis[1] << 0, 0, 0, 1;
  basis[2] << 0, 1, 1, 0;
  Eigen::Matrix3d q;
  for (int k = 0; k < 3; ++k)
    for (int l = 0; l < 3; ++l) {
      const Mat2d ak = inv * basis[k];
      const Mat2d al = inv * basis[l];
      q(k, l) = c1 * ak.trace() * al.trace() + 2.0 * c2 * (ak * al).trace();
    }
  const double h = mat.thickness;
  Eigen::Matrix<double, 6, 6> hess = Eigen::Matrix<double, 6, 6>::Zero();
  hess.topLeftCorner<3, 3>() = (h / 8.0) * root * q;
  hess.bottomRightCorner<3, 3>() = (h * h * h / 24.0) * root * q;
  return hess;
}

StencilForms stencil_forms(const std::array<Vec3d, 6>& x, const std::array<bool, 3>& has_opposite) {
  StencilForms f;

  Vec3d n_face;
  Jac dn_face;
  face_normal_jacobian(x, 0, 1, 2, n_face, dn_face);
  for (int i = 0; i < 3; ++i) {
    if (!has_opposite[i]) {
      f.normals[i] = n_face;
      f.dnormals[i] = dn_face;
      continue;
    }
    Vec3d n_nbr;
    Jac dn_nbr;
    face_normal_jacobian(x, (i + 2) % 3, (i + 1) % 3, 3 + i, n_nbr, dn_nbr);
    const Vec3d m = n_face + n_nbr;
    const double len = m.norm();
    if (len < kAntiParallelTolerance) throw Error("shell_energy", "anti-parallel normals across stencil edge");
    f.normals[i] = m / len;
    f.dnormals[i] = (Mat3d::Identity() - f.normals[i] * f.normals[i].transpose()) / len * (dn_face + dn_nbr);
  }

  const Vec3d e1 = x[1] - x[0];
  const Vec3d e2 = x[2] - x[0];
  const Jac de1 = edge_jacobian(1, 0);
  const Jac de2 = edge_jacobian(2, 0);
  f.a << e1.squaredNorm(), e2.squaredNorm(), e1.dot(e2);
  f.da.row(0) = 2.0 * e1.transpose() * de1;
  f.da.row(1) = 2.0 * e2.transpose() * de2;
  f.da.row(2) = e2.transpose() * de1 + e1.transpose() * de2;

  const Vec3d u01 = f.normals[0] - f.normals[1];
  const Vec3d u02 = f.normals[0] - f.normals[2];
  const Jac du01 = f.dnormals[0] - f.dnormals[1];
  const Jac du02 = f.dnormals[0] - f.dnormals[2];
  const Vec3d w01 = x[0] - x[1];
  const Vec3d w02 = x[0] - x[2];
  const Jac dw01 = edge_jacobian(0, 1);
  const Jac dw02 = edge_jacobian(0, 2);
  f.b << 2.0 * u01.dot(w01), 2.0 * u02.dot(w02), u01.dot(w02) + u02.dot(w01);
  f.db.row(0) = 2.0 * (w01.transpose() * du01 + u01.transpose() * dw01);
  f.db.row(1) = 2.0 * (w02.transpose() * du02 + u02.transpose() * dw02);
  f.db.row(2) = w02.transpose() * du01 + u01.transpose() * dw02 + w01.transpose() * du02 + u02.transpose() * dw01;
  return f;
}

template <int N>
void project_psd(Eigen::Matrix<double, N, N>& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, N, N>> eig(m);
  if (eig.eigenvalues().minCoeff() >= 0.0) return;
  const Eigen::Matrix<double, N, 1> clamped = eig.eigenvalues().cwiseMax(0.0);
  m = eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose();
}

template void project_psd<3>(Eigen::Matrix<double, 3, 3>&);
template void project_psd<6>(Eigen::Matrix<double, 6, 6>&);
template void project_psd<18>(Eigen::Matrix<double, 18, 18>&);

StencilResult evaluate_stencil(const std::array<Vec3d, 6>& x, const std::array<bool, 3>& has_opposite,
                               const FundamentalFormPair& target, const MaterialParams& mat, StencilOutput what) {
  StencilResult r;
  const StencilForms f = stencil_forms(x, has_opposite);
  const Mat2d a = unpack_sym(f.a);
  const Mat2d b = unpack_sym(f.b);
  r.membrane = membrane_energy(a, target.a, mat);
  r.bending = bending_energy(b, target.a, target.b, mat);
  r.energy = r.membrane + r.bending;
  if (what == StencilOutput::kEnergy) return r;

  const Vec6d g = triangle_energy_form_gradient(a, b, target.a, target.b, mat);
  Eigen::Matrix<double, 6, 18> jac;
  jac << f.da, f.db;
  r.gradient = jac.transpose() * g;
  if (what == StencilOutput::kGradient) return r;

  // Exact chain-rule term through the forms, plus the second derivatives of
  // the forms with the normals' own second derivatives dropped.
  r.hessian = jac.transpose() * triangle_energy_form_hessian(target.a, mat) * jac;
  Eigen::Matrix<double, 18, 18> c = Eigen::Matrix<double, 18, 18>::Zero();
  const Jac de1 = edge_jacobian(1, 0);
  const Jac de2 = edge_jacobian(2, 0);
  add_edge_coupling(c, g(0), de1, 1, 0);
  add_edge_coupling(c, g(1), de2, 2, 0);
  add_edge_coupling(c, g(2), de1, 2, 0);
  const Jac du01 = f.dnormals[0] - f.dnormals[1];
  const Jac du02 = f.dnormals[0] - f.dnormals[2];
  add_edge_coupling(c, 2.0 * g(3), du01, 0, 1);
  add_edge_coupling(c, 2.0 * g(4), du02, 0, 2);
  add_edge_coupling(c, g(5), du01, 0, 2);
  add_edge_coupling(c, g(5), du02, 0, 1);
  r.hessian += c + c.transpose();
  if (what == StencilOutput::kHessian) project_psd<18>(r.hessian);
  if (what == StencilOutput::kExactHessian) {
    const Vec3d w01 = x[0] - x[1];
    const Vec3d w02 = x[0] - x[2];
    const Vec3d k01 = 2.0 * g(3) * w01 + g(5) * w02;  // coefficient of n0 - n1
    const Vec3d k02 = 2.0 * g(4) * w02 + g(5) * w01;  // coefficient of n0 - n2
    add_normal_curvature(r.hessian, x, has_opposite, {k01 + k02, -k01, -k02});
  }
  return r;
}

ElasticModel::ElasticModel(const TriangleMesh& mesh) : num_vertices_(mesh.num_vertices()) {
  const int m = mesh.num_triangles();
  stencils_.resize(m);
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(m) * 18 * 18);
  for (int t = 0; t < m; ++t) {
    stencils_[t] = mesh.stencil(t);
    for (int p = 0; p < 6; ++p)
      for (int q = 0; q < 6; ++q) {
        const int vp = stencils_[t][p];
        const int vq = stencils_[t][q];
        if (vp == kNone || vq == kNone) continue;
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) entries.emplace_back(3 * vp + i, 3 * vq + j, 0.0);
      }
  }
  pattern_.resize(num_dofs(), num_dofs());
  pattern_.setFromTriplets(entries.begin(), entries.end());
  pattern_.makeCompressed();

  value_index_.assign(static_cast<std::size_t>(m) * 324, -1);
  const int* outer = pattern_.outerIndexPtr();
  const int* inner = pattern_.innerIndexPtr();
  for (int t = 0; t < m; ++t)
    for (int r = 0; r < 18; ++r)
      for (int c = 0; c < 18; ++c) {
        const int vr = stencils_[t][r / 3];
        const int vc = stencils_[t][c / 3];
        if (vr == kNone || vc == kNone) continue;
        const int row = 3 * vr + r % 3;
        const int col = 3 * vc + c % 3;
        const int* pos = std::lower_bound(inner + outer[col], inner + outer[col + 1], row);
        value_index_[static_cast<std::size_t>(t) * 324 + r * 18 + c] = static_cast<int>(pos - inner);
      }
}

std::array<Vec3d, 6> ElasticModel::gather(int t, const Eigen::Matrix3Xd& positions) const {
  std::array<Vec3d, 6> x;
  for (int p = 0; p < 6; ++p) {
    const int v = stencils_[t][p];
    x[p] = v == kNone ? Vec3d::Zero() : Vec3d(positions.col(v));
  }
  return x;
}

EnergyReport ElasticModel::energy(const Eigen::Matrix3Xd& positions, const std::vector<FundamentalFormPair>& targets,
                                  const MaterialParams& mat) const {
  const int m = static_cast<int>(stencils_.size());
  if (static_cast<int>(targets.size()) != m) throw Error("shell_energy", "target count does not match triangles");
  EnergyReport report;
  report.per_triangle.resize(m);
  Eigen::VectorXd membrane(m), bending(m);
  parallel_for(m, [&](std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) {
      const int ti = static_cast<int>(t);
      const StencilResult r =
          evaluate_stencil(gather(ti, positions), has_opposite(ti), targets[t], mat, StencilOutput::kEnergy);
      report.per_triangle(ti) = r.energy;
      membrane(ti) = r.membrane;
      bending(ti) = r.bending;
    }
  });
  report.total = report.per_triangle.sum();
  report.membrane = membrane.sum();
  report.bending = bending.sum();
  return report;
}

double ElasticModel::evaluate(const Eigen::Matrix3Xd& positions, const std::vector<FundamentalFormPair>& targets,
                              const MaterialParams& mat, Eigen::VectorXd* gradient,
                              Eigen::SparseMatrix<double>* hessian, bool project) const {
  if (!gradient && !hessian) return energy(positions, targets, mat).total;
  const int m = static_cast<int>(stencils_.size());
  if (static_cast<int>(targets.size()) != m) throw Error("shell_energy", "target count does not match triangles");
  const StencilOutput what = !hessian ? StencilOutput::kGradient
                            : project ? StencilOutput::kHessian
                                      : StencilOutput::kExactHessian;

  std::vector<StencilResult> local(m);
  parallel_for(m, [&](std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) {
      const int ti = static_cast<int>(t);
      local[t] = evaluate_stencil(gather(ti, positions), has_opposite(ti), targets[t], mat, what);
    }
  });

  double total = 0.0;
  if (gradient) gradient->setZero(num_dofs());
  if (hessian) {
    if (hessian->nonZeros() != pattern_.nonZeros() || hessian->rows() != pattern_.rows()) *hessian = pattern_;
    Eigen::Map<Eigen::VectorXd>(hessian->valuePtr(), hessian->nonZeros()).setZero();
  }
  for (int t = 0; t < m; ++t) {
    const StencilResult& r = local[t];
    total += r.energy;
    const auto& s = stencils_[t];
    if (gradient)
      for (int p = 0; p < 6; ++p)
        if (s[p] != kNone) gradient->segment<3>(3 * s[p]) += r.gradient.segment<3>(3 * p);
    if (hessian) {
      double* values = hessian->valuePtr();
      const int* index = &value_index_[static_cast<std::size_t>(t) * 324];
      for (int row = 0; row < 18; ++row)
        for (int col = 0; col < 18; ++col) {
          const int k = index[row * 18 + col];
          if (k >= 0) values[k] += r.hessian(row, col);
        }
    }
  }
  return total;
}

Eigen::Matrix<double, 18, 6> ElasticModel::gradient_target_jacobian(int t, const Eigen::Matrix3Xd& positions,
                                                                    const FundamentalFormPair& target,
                                                                    const MaterialParams& mat) const {
  using AD = Eigen::AutoDiffScalar<Vec6d>;
  const StencilForms f = stencil_forms(gather(t, positions), has_opposite(t));
  const Vec3d abar_packed = pack_sym(target.a);
  const Vec3d bbar_packed = pack_sym(target.b);
  Vec3<AD> abar_ad, bbar_ad;
  for (int k = 0; k < 3; ++k) {
    abar_ad(k) = AD(abar_packed(k), 6, k);
    bbar_ad(k) = AD(bbar_packed(k), 6, 3 + k);
  }
  const Mat2<AD> a = unpack_sym(f.a).cast<AD>();
  const Mat2<AD> b = unpack_sym(f.b).cast<AD>();
  const Eigen::Matrix<AD, 6, 1> g =
      triangle_energy_form_gradient<AD>(a, b, unpack_sym(abar_ad), unpack_sym(bbar_ad), mat);
  Eigen::Matrix<double, 6, 6> mixed;
  for (int i = 0; i < 6; ++i) mixed.row(i) = g(i).derivatives().transpose();
  Eigen::Matrix<double, 6, 18> jac;
  jac << f.da, f.db;
  return jac.transpose() * mixed;
}

EnergyReport total_energy(const TriangleMesh& mesh, const std::vector<FundamentalFormPair>& targets,
                          const MaterialParams& mat) {
  return total_energy(mesh, mesh.current_positions(), targets, mat);
}

EnergyReport total_energy(const TriangleMesh& mesh, const Eigen::Matrix3Xd& positions,
                          const std::vector<FundamentalFormPair>& targets, const MaterialParams& mat) {
  return ElasticModel(mesh).energy(positions, targets, mat);
}

Eigen::VectorXd elastic_force(const TriangleMesh& mesh, const std::vector<FundamentalFormPair>& targets,
                              const MaterialParams& mat) {
  return elastic_force(mesh, mesh.current_positions(), targets, mat);
}

Eigen::VectorXd elastic_force(const TriangleMesh& mesh, const Eigen::Matrix3Xd& positions,
                              const std::vector<FundamentalFormPair>& targets, const MaterialParams& mat) {
  Eigen::VectorXd g;
  ElasticModel(mesh).evaluate(positions, targets, mat, &g, nullptr);
  return g;
}

Eigen::SparseMatrix<double> elastic_hessian_spd(const TriangleMesh& mesh,
                                                const std::vector<FundamentalFormPair>& targets,
                                                const MaterialParams& mat) {
  return elastic_hessian_spd(mesh, mesh.current_positions(), targets, mat);
}

Eigen::SparseMatrix<double> elastic_hessian_spd(const TriangleMesh& mesh, const Eigen::Matrix3Xd& positions,
                                                const std::vector<FundamentalFormPair>& targets,
                                                const MaterialParams& mat) {
  Eigen::SparseMatrix<double> h;
  ElasticModel(mesh).evaluate(positions, targets, mat, nullptr, &h);
  return h;
}

}  // namespace plastic_shell
