#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "plastic_shell/fundamental_forms.hpp"
#include "test_support.hpp"

#include <Eigen/Eigenvalues>

using namespace plastic_shell;
using namespace test_support;

TEST_CASE("first form of the unit right triangle is the identity") {
  const Mat2d a = first_form<double>(Vec3d(0, 0, 0), Vec3d(1, 0, 0), Vec3d(0, 1, 0));
  CHECK((a - Mat2d::Identity()).norm() == 0.0);
}

TEST_CASE("first form scales quadratically") {
  const Mat2d a = first_form<double>(Vec3d(0, 0, 0), Vec3d(2, 0, 0), Vec3d(0, 2, 0));
  CHECK((a - 4.0 * Mat2d::Identity()).norm() == 0.0);
}

TEST_CASE("det a equals four times the squared area") {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const Vec3d x0 = random_vec(rng), x1 = random_vec(rng), x2 = random_vec(rng);
    const Mat2d a = first_form(x0, x1, x2);
    const double area = 0.5 * (x1 - x0).cross(x2 - x0).norm();
    CHECK(std::abs(a.determinant() - 4.0 * area * area) < 1e-12);
    CHECK(a(0, 1) == a(1, 0));
    CHECK(a.selfadjointView<Eigen::Lower>().eigenvalues().minCoeff() >= -1e-14);
  }
}

TEST_CASE("second form vanishes on flat meshes") {
  for (const TriangleMesh& mesh : {plane_grid(6, 5), disk(3, 10)}) {
    for (const auto& f : fundamental_forms(mesh, mesh.rest_positions())) CHECK(f.b.norm() < 1e-14);
  }
  const TriangleMesh tri = single_triangle();
  CHECK(second_form(tri, 0, tri.rest_positions()).norm() < 1e-14);
}

TEST_CASE("second form of a hinge by hand") {
  // Triangle 0 is (-1,0,0), (0,-1,0), (0,1,0). Its hinge edge is opposite
  // vertex 0 and carries the bisector m; the two boundary edges carry the
  // face normal z. So n0 - n1 = n0 - n2 = m - z.
  const double fold = 0.9;
  const TriangleMesh mesh = hinge(fold);
  const Vec3d z = Vec3d::UnitZ();
  const Vec3d m = (z + Vec3d(std::sin(fold), 0, std::cos(fold))).normalized();
  const Vec3d e01 = Vec3d(-1, 0, 0) - Vec3d(0, -1, 0);
  const Vec3d e02 = Vec3d(-1, 0, 0) - Vec3d(0, 1, 0);
  Mat2d expected;
  expected << (m - z).dot(e01), (m - z).dot(e02), (m - z).dot(e01), (m - z).dot(e02);
  expected = symmetrize(Mat2d(2.0 * expected));
  const Mat2d b = second_form(mesh, 0, mesh.rest_positions());
  CHECK((b - expected).norm() < 1e-14);
  CHECK(b.norm() > 0.1);
}

TEST_CASE("cylinder curvature is recovered from b") {
  // On a cylinder of radius R the shape operator a^-1 b has eigenvalues
  // {1/R, 0} up to discretization error (with the sign of the orientation).
  const double radius = 1.5;
  const TriangleMesh mesh = cylinder(64, 24, radius, 3.0);
  const auto forms = fundamental_forms(mesh, mesh.rest_positions());
  int interior = 0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    bool boundary = false;
    for (int e = 0; e < 3; ++e) boundary |= mesh.is_boundary_edge(t, e);
    if (boundary) continue;
    ++interior;
    const Eigen::Vector2cd ev = Mat2d(forms[t].a.inverse() * forms[t].b).eigenvalues();
    double big = std::abs(ev(0).real()), small = std::abs(ev(1).real());
    if (small > big) std::swap(big, small);
    CHECK(std::abs(big - 1.0 / radius) < 0.1 / radius);
    CHECK(small < 0.1 / radius);
  }
  CHECK(interior > 0);
}

TEST_CASE("forms are invariant under rigid motion") {
  std::mt19937 rng(5);
  const TriangleMesh mesh = icosphere(2);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Matrix3Xd x = jitter(mesh.rest_positions(), rng, 0.03);
    const Eigen::Matrix3Xd y = rigid_motion(x, random_rotation(rng), random_vec(rng, 5.0));
    const auto fx = fundamental_forms(mesh, x);
    const auto fy = fundamental_forms(mesh, y);
    for (int t = 0; t < mesh.num_triangles(); ++t) {
      CHECK((fx[t].a - fy[t].a).norm() < 1e-12);
      CHECK((fx[t].b - fy[t].b).norm() < 1e-12);
    }
  }
}

TEST_CASE("uniform scaling scales a by c^2 and b by c") {
  std::mt19937 rng(9);
  const TriangleMesh mesh = torus(14, 8);
  const Eigen::Matrix3Xd x = jitter(mesh.rest_positions(), rng, 0.01);
  const double c = 2.7;
  const auto fx = fundamental_forms(mesh, x);
  const auto fy = fundamental_forms(mesh, Eigen::Matrix3Xd(c * x));
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    CHECK((c * c * fx[t].a - fy[t].a).norm() < 1e-12 * c * c * fx[t].a.norm());
    CHECK((c * fx[t].b - fy[t].b).norm() < 1e-12 * (1.0 + fy[t].b.norm()));
  }
}
