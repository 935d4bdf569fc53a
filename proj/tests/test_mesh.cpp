#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_support.hpp"

#include <fstream>
#include <numbers>
#include <sstream>

using namespace plastic_shell;
using namespace test_support;

namespace {

std::filesystem::path write_file(const std::string& name, const std::string& text) {
  const auto path = scratch_dir("mesh_" + name) / (name + ".obj");
  std::ofstream(path) << text;
  return path;
}

}  // namespace

TEST_CASE("single triangle OBJ has three boundary edges") {
  const TriangleMesh mesh = load_obj(write_file("tri", "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n"));
  CHECK(mesh.num_vertices() == 3);
  CHECK(mesh.num_triangles() == 1);
  CHECK(mesh.boundary_edges().size() == 3);
  CHECK(mesh.rest_positions() == mesh.current_positions());
}

TEST_CASE("closed tetrahedron has no boundary and full adjacency") {
  const TriangleMesh mesh = load_obj(
      write_file("tet", "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf 1 3 2\nf 1 2 4\nf 2 3 4\nf 3 1 4\n"));
  CHECK(mesh.boundary_edges().empty());
  for (int t = 0; t < 4; ++t)
    for (int e = 0; e < 3; ++e) CHECK(mesh.edge_adjacency()(e, t) != kNone);
}

TEST_CASE("edge shared by three faces is rejected") {
  const auto path = write_file("nonmanifold", "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 -1 0\nv 0 0 1\nf 1 2 3\nf 2 1 4\nf 1 2 5\n");
  CHECK_THROWS_AS(load_obj(path), Error);
}

TEST_CASE("malformed and degenerate input is rejected") {
  CHECK_THROWS_AS(load_obj(write_file("badv", "v 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n")), Error);
  CHECK_THROWS_AS(load_obj(write_file("badf", "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 x\n")), Error);
  CHECK_THROWS_AS(load_obj(write_file("range", "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n")), Error);
  CHECK_THROWS_AS(load_obj(write_file("degenerate", "v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3\n")), Error);
  CHECK_THROWS_AS(load_obj(write_file("unused", "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 5 5 5\nf 1 2 3\n")), Error);
  CHECK_THROWS_AS(load_obj("/nonexistent/file.obj"), Error);
}

TEST_CASE("quads are fan triangulated and texture/normal indices ignored") {
  const TriangleMesh mesh = load_obj(write_file(
      "quad", "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvt 0 0\nvn 0 0 1\nf 1/1/1 2/1/1 3//1 -1\n"));
  REQUIRE(mesh.num_triangles() == 2);
  CHECK(mesh.triangles().col(0) == Eigen::Vector3i(0, 1, 2));
  CHECK(mesh.triangles().col(1) == Eigen::Vector3i(0, 2, 3));
}

TEST_CASE("save writes one v line per vertex and one f line per triangle") {
  const auto dir = scratch_dir("mesh_save");
  save_obj(single_triangle(), dir / "out.obj");
  std::ifstream in(dir / "out.obj");
  int v = 0, f = 0;
  for (std::string line; std::getline(in, line);) {
    if (line.rfind("v ", 0) == 0) ++v;
    if (line.rfind("f ", 0) == 0) ++f;
  }
  CHECK(v == 3);
  CHECK(f == 1);
  CHECK_THROWS_AS(save_obj(single_triangle(), "/nonexistent/dir/out.obj"), Error);
}

TEST_CASE("save/load round trip preserves topology and geometry") {
  std::mt19937 rng(7);
  for (const TriangleMesh& base : {icosphere(2), torus(12, 8), plane_grid(5, 4)}) {
    TriangleMesh mesh = base;
    mesh.set_current_positions(jitter(mesh.rest_positions(), rng, 0.01) * 123.456);
    const auto path = scratch_dir("mesh_roundtrip") / "m.obj";
    save_obj(mesh, path);
    const TriangleMesh back = load_obj(path);
    CHECK(back.triangles() == mesh.triangles());
    const double rel = (back.rest_positions() - mesh.current_positions()).norm() / mesh.current_positions().norm();
    CHECK(rel < 1e-9);
  }
}

TEST_CASE("adjacency is symmetric and orientation consistent") {
  for (const TriangleMesh& mesh : {icosphere(2), cylinder(12, 5), torus(10, 6), disk(4, 9), plane_grid(6, 3)}) {
    const auto& f = mesh.triangles();
    for (int t = 0; t < mesh.num_triangles(); ++t)
      for (int e = 0; e < 3; ++e) {
        const int u = mesh.edge_adjacency()(e, t);
        if (u == kNone) continue;
        int back = -1;
        for (int j = 0; j < 3; ++j)
          if (mesh.edge_adjacency()(j, u) == t) back = j;
        REQUIRE(back >= 0);
        // t traverses (a, b), u traverses (b, a).
        CHECK(f((e + 1) % 3, t) == f((back + 2) % 3, u));
        CHECK(f((e + 2) % 3, t) == f((back + 1) % 3, u));
        const int opp = mesh.opposite_vertices()(e, t);
        CHECK(opp == f(back, u));
      }
  }
}

TEST_CASE("fixture sizes") {
  CHECK(plane_grid(10, 10).num_triangles() == 200);
  CHECK(plane_grid(20, 20).num_vertices() == 441);
  CHECK(plane_grid(20, 20).num_triangles() == 800);
  CHECK(icosphere(3).num_vertices() == 642);
  CHECK(icosphere(3).num_triangles() == 1280);
  CHECK(icosphere(3).boundary_edges().empty());
  CHECK(torus(10, 6).boundary_edges().empty());
  CHECK(cylinder(48, 16).boundary_edges().size() == 96);
}

TEST_CASE("disconnected pieces are separate components") {
  Eigen::Matrix3Xd x(3, 6);
  x << 0, 1, 0, 5, 6, 5, 0, 0, 1, 0, 0, 1, 0, 0, 0, 0, 0, 0;
  Eigen::Matrix3Xi f(3, 2);
  f << 0, 3, 1, 4, 2, 5;
  const TriangleMesh mesh(x, f);
  CHECK(mesh.num_components() == 2);
  CHECK(mesh.vertex_components()[0] != mesh.vertex_components()[3]);
}

TEST_CASE("mid-edge normals of flat meshes and single triangles") {
  const TriangleMesh flat_mesh = plane_grid(4, 3);
  const Eigen::Matrix3Xd n = mid_edge_normals(flat_mesh, flat_mesh.rest_positions());
  for (int c = 0; c < n.cols(); ++c) CHECK((n.col(c) - Vec3d::UnitZ()).norm() < 1e-14);

  const TriangleMesh tri = single_triangle();
  const Eigen::Matrix3Xd nt = mid_edge_normals(tri, tri.rest_positions());
  for (int c = 0; c < 3; ++c) CHECK((nt.col(c) - Vec3d::UnitZ()).norm() < 1e-14);
}

TEST_CASE("hinge mid-edge normal is the dihedral bisector") {
  const double fold = 0.7;
  const TriangleMesh mesh = hinge(fold);
  const Eigen::Matrix3Xd n = mid_edge_normals(mesh, mesh.rest_positions());
  // Face normals by hand: the flat face points up +z; the folded face is
  // that normal rotated about the hinge axis (y) by the fold angle.
  const Vec3d n0(0.0, 0.0, 1.0);
  const Vec3d n1(std::sin(fold), 0.0, std::cos(fold));
  const Vec3d expected = (n0 + n1).normalized();
  // The hinge is edge 0 of triangle 0 and edge 2 of triangle 1.
  CHECK((n.col(0) - expected).norm() < 1e-14);
  CHECK((n.col(3 * 1 + 2) - expected).norm() < 1e-14);
  CHECK(std::abs(expected.dot(n0) - std::cos(fold / 2)) < 1e-14);
  for (int c = 0; c < n.cols(); ++c) CHECK(std::abs(n.col(c).norm() - 1.0) < 1e-14);
}

TEST_CASE("anti-parallel faces have no mid-edge normal") {
  const TriangleMesh mesh = hinge(std::numbers::pi - 1e-10);
  CHECK_THROWS_AS(mid_edge_normals(mesh, mesh.rest_positions()), Error);
}

TEST_CASE("mid-edge normals are rotation equivariant") {
  std::mt19937 rng(11);
  const TriangleMesh mesh = icosphere(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Matrix3Xd x = jitter(mesh.rest_positions(), rng, 0.02);
    const Mat3d r = random_rotation(rng);
    const Eigen::Matrix3Xd n = mid_edge_normals(mesh, x);
    const Eigen::Matrix3Xd nr = mid_edge_normals(mesh, rigid_motion(x, r, random_vec(rng, 3.0)));
    CHECK((r * n - nr).lpNorm<Eigen::Infinity>() < 1e-12);
  }
}
