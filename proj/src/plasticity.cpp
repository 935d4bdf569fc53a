#include "plastic_shell/plasticity.hpp"

#include <unsupported/Eigen/AutoDiff>

#include <fstream>
#include <iomanip>
#include <numbers>
#include <string>

namespace plastic_shell {

PlasticStrainField PlasticStrainField::identity(int num_triangles) {
  PlasticStrainField field;
  field.p.setZero(6 * num_triangles);
  for (int t = 0; t < num_triangles; ++t) field.s(t) << 1.0, 1.0, 0.0;
  return field;
}

int PlasticStrainField::first_inadmissible() const {
  for (int t = 0; t < num_triangles(); ++t) {
    const Mat2d st = stretch(t);
    if (!theta(t).allFinite() || !s(t).allFinite()) return t;
    if (!(theta(t).norm() < std::numbers::pi)) return t;
    if (!(det2(st) > 0.0 && st.trace() > 0.0)) return t;
  }
  return -1;
}

void PlasticStrainField::validate() const {
  if (p.size() % 6 != 0) throw Error("plasticity", "plastic field length is not a multiple of 6");
  const int t = first_inadmissible();
  if (t >= 0)
    throw Error("plasticity",
                "triangle " + std::to_string(t) + " has a non-positive stretch or a rotation outside the principal branch",
                t);
}

RestFrame rest_frame(const Vec3d& xi, const Vec3d& xj, const Vec3d& xk) {
  RestFrame f;
  const Vec3d e1 = xj - xi;
  const Vec3d e2 = xk - xi;
  f.normal = e1.cross(e2).normalized();
  f.t1 = e1.normalized();
  f.t2 = f.normal.cross(f.t1);
  f.to_frame << e1.dot(f.t1), e2.dot(f.t1), e1.dot(f.t2), e2.dot(f.t2);
  return f;
}

PlasticityModel::PlasticityModel(const TriangleMesh& mesh) : local_(mesh.num_triangles()) {
  const auto& x = mesh.rest_positions();
  const auto& f = mesh.triangles();
  const Eigen::Matrix3Xd normals = face_normals(mesh, x);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    LocalRestGeometry& g = local_[t];
    for (int i = 0; i < 3; ++i) g.x[i] = x.col(f(i, t));
    const RestFrame frame = rest_frame(g.x[0], g.x[1], g.x[2]);
    g.normal = normals.col(t);
    g.to_frame = frame.to_frame;
    g.rest_first_form = first_form(g.x[0], g.x[1], g.x[2]);
    for (int i = 0; i < 3; ++i) {
      g.neighbour[i] = mesh.edge_adjacency()(i, t);
      g.neighbour_normal[i] = g.neighbour[i] == kNone ? Vec3d::Zero() : Vec3d(normals.col(g.neighbour[i]));
    }
  }
}

PlasticTargets PlasticityModel::build_targets(const PlasticStrainField& field) const {
  if (field.num_triangles() != num_triangles() || field.p.size() % 6 != 0)
    throw Error("plasticity", "plastic field size does not match the mesh");
  field.validate();
  PlasticTargets targets;
  targets.forms.resize(num_triangles());
  targets.rotated_normals.resize(3, 3 * num_triangles());
  std::vector<Vec3d> rotated_face(num_triangles());
  std::vector<Mat3d> rotation(num_triangles());
  for (int t = 0; t < num_triangles(); ++t) {
    rotation[t] = rodrigues<double>(field.theta(t));
    rotated_face[t] = rotation[t] * local_[t].normal;
  }
  parallel_for(num_triangles(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t ts = begin; ts < end; ++ts) {
      const int t = static_cast<int>(ts);
      const LocalRestGeometry& g = local_[t];
      std::array<Vec3d, 3> nbr_theta;
      for (int i = 0; i < 3; ++i) {
        const int u = g.neighbour[i];
        nbr_theta[i] = u == kNone ? Vec3d::Zero() : Vec3d(field.theta(u));
        targets.rotated_normals.col(3 * t + i) =
            u == kNone ? rotated_face[t] : Vec3d((rotated_face[t] + rotated_face[u]).normalized());
      }
      targets.forms[t] = local_plastic_forms<double>(g, field.theta(t), field.s(t), nbr_theta);
    }
  });
  return targets;
}

Eigen::Matrix<double, 6, 15> PlasticityModel::target_jacobian(int t, const PlasticStrainField& field) const {
  using Deriv = Eigen::Matrix<double, 15, 1>;
  using AD = Eigen::AutoDiffScalar<Deriv>;
  const LocalRestGeometry& g = local_[t];
  auto seed = [](const Vec3d& v, int offset) {
    Vec3<AD> r;
    for (int k = 0; k < 3; ++k) r(k) = AD(v(k), 15, offset + k);
    return r;
  };
  const Vec3<AD> theta = seed(field.theta(t), 0);
  const Vec3<AD> s = seed(field.s(t), 3);
  std::array<Vec3<AD>, 3> nbr;
  for (int i = 0; i < 3; ++i) {
    const int u = g.neighbour[i];
    nbr[i] = seed(u == kNone ? Vec3d::Zero() : Vec3d(field.theta(u)), 6 + 3 * i);
  }
  const FormPair<AD> forms = local_plastic_forms<AD>(g, theta, s, nbr);
  const Vec3<AD> a = pack_sym(forms.a);
  const Vec3<AD> b = pack_sym(forms.b);
  Eigen::Matrix<double, 6, 15> jac;
  for (int k = 0; k < 3; ++k) {
    jac.row(k) = a(k).derivatives().transpose();
    jac.row(3 + k) = b(k).derivatives().transpose();
  }
  for (int i = 0; i < 3; ++i)
    if (g.neighbour[i] == kNone) jac.middleCols<3>(6 + 3 * i).setZero();
  return jac;
}

Eigen::Matrix3Xd rotated_mid_edge_normals(const TriangleMesh& mesh, const PlasticStrainField& field) {
  if (field.num_triangles() != mesh.num_triangles()) throw Error("plasticity", "plastic field size does not match the mesh");
  const Eigen::Matrix3Xd rest = face_normals(mesh, mesh.rest_positions());
  Eigen::Matrix3Xd rotated(3, mesh.num_triangles());
  for (int t = 0; t < mesh.num_triangles(); ++t) rotated.col(t) = rodrigues<double>(field.theta(t)) * rest.col(t);
  Eigen::Matrix3Xd normals(3, 3 * mesh.num_triangles());
  for (int t = 0; t < mesh.num_triangles(); ++t)
    for (int i = 0; i < 3; ++i) {
      const int u = mesh.edge_adjacency()(i, t);
      if (u == kNone) {
        normals.col(3 * t + i) = rotated.col(t);
        continue;
      }
      const Vec3d sum = rotated.col(t) + rotated.col(u);
      if (sum.norm() < kAntiParallelTolerance)
        throw Error("plasticity", "anti-parallel rotated normals at triangle " + std::to_string(t), t);
      normals.col(3 * t + i) = sum.normalized();
    }
  return normals;
}

Mat2d plastic_second_form(const TriangleMesh& mesh, int triangle, const Mat3d& rotation, const Mat2d& stretch,
                          const Eigen::Matrix3Xd& rotated_normals) {
  const auto& f = mesh.triangles();
  const auto& x = mesh.rest_positions();
  const Vec3d xi = x.col(f(0, triangle));
  const Vec3d xj = x.col(f(1, triangle));
  const Vec3d xk = x.col(f(2, triangle));
  const Mat2d canon = canonical_stretch<double>(rest_frame(xi, xj, xk).to_frame, stretch);
  const Vec3d ni = rotated_normals.col(3 * triangle);
  const Vec3d dij = ni - rotated_normals.col(3 * triangle + 1);
  const Vec3d dik = ni - rotated_normals.col(3 * triangle + 2);
  const Vec3d eij = rotation * (xi - xj);
  const Vec3d eik = rotation * (xi - xk);
  Mat2d raw;
  raw << dij.dot(eij), dij.dot(eik), dik.dot(eij), dik.dot(eik);
  return symmetrize(Mat2d(2.0 * canon.transpose() * raw * canon));
}

PlasticTargets build_targets(const TriangleMesh& mesh, const PlasticStrainField& field) {
  return PlasticityModel(mesh).build_targets(field);
}

void save_plastic_field(const PlasticStrainField& field, const std::filesystem::path& path) {
  const bool binary = path.extension() == ".bin";
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw Error("io", "cannot write plastic field " + path.string());
  if (binary) {
    out.write(reinterpret_cast<const char*>(field.p.data()), static_cast<std::streamsize>(field.p.size() * sizeof(double)));
  } else {
    out << std::setprecision(17);
    for (Eigen::Index k = 0; k < field.p.size(); ++k) out << field.p(k) << '\n';
  }
  if (!out) throw Error("io", "failed writing plastic field " + path.string());
}

PlasticStrainField load_plastic_field(const std::filesystem::path& path) {
  const bool binary = path.extension() == ".bin";
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw Error("io", "cannot open plastic field " + path.string());
  std::vector<double> values;
  if (binary) {
    double v;
    while (in.read(reinterpret_cast<char*>(&v), sizeof v)) values.push_back(v);
  } else {
    double v;
    while (in >> v) values.push_back(v);
    if (!in.eof()) throw Error("io", "malformed plastic field " + path.string());
  }
  if (values.size() % 6 != 0) throw Error("io", "plastic field length is not a multiple of 6");
  PlasticStrainField field;
  field.p = Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
  return field;
}

}  // namespace plastic_shell
