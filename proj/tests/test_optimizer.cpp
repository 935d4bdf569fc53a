#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "plastic_shell/optimizer.hpp"
#include "test_support.hpp"

#include <Eigen/Dense>

#include <limits>

using namespace plastic_shell;
using namespace test_support;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::VectorXd random_vector(std::mt19937& rng, Eigen::Index n, double scale = 1.0) {
  Eigen::VectorXd v(n);
  for (Eigen::Index k = 0; k < n; ++k) v(k) = scale * uniform(rng);
  return v;
}

Eigen::MatrixXd random_matrix(std::mt19937& rng, Eigen::Index r, Eigen::Index c) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index j = 0; j < c; ++j) m.col(j) = random_vector(rng, r);
  return m;
}

// Golden-section minimization on [lo, hi], the reference the Brent search is
// compared against.
double golden_section(const std::function<double(double)>& f, double lo, double hi, double tol) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

// A gently curved patch, anchored at three corners, at rest under identity plasticity.
struct Patch {
  TriangleMesh mesh = plane_grid(6, 6);
  MaterialParams mat;
  AnchorSet anchors;

  Patch() {
    Eigen::Matrix3Xd x = mesh.rest_positions();
    for (int v = 0; v < x.cols(); ++v) x(2, v) = 0.15 * std::sin(2.5 * x(0, v)) + 0.1 * x(1, v) * x(1, v);
    mesh.set_rest_positions(x);
    mesh.set_current_positions(x);
    mat = MaterialParams::defaults_for(mesh);
    anchors = anchors_at(mesh, {0, 6, 48});
  }
};

}  // namespace

TEST_CASE("objective examples") {
  const TriangleMesh mesh = plane_grid(4, 4);
  const StrainLaplacian lap = assemble_operator(mesh);
  const Eigen::VectorXd p0 = PlasticStrainField::identity(mesh.num_triangles()).p;
  OptimizerConfig config;
  LandmarkSet at_rest;
  for (int v : {3, 12}) at_rest.add(v, mesh.rest_positions().col(v));
  CHECK(objective(p0, mesh.rest_positions(), lap, at_rest, config) == 0.0);

  LandmarkSet displaced;
  const double d = 0.37;
  displaced.add(12, mesh.rest_positions().col(12) + Vec3d(0.0, d, 0.0));
  CHECK(objective(p0, mesh.rest_positions(), lap, displaced, config) == doctest::Approx(config.alpha * d * d));
  CHECK(objective(p0, mesh.rest_positions(), lap, displaced, config, 2.0) ==
        doctest::Approx(config.alpha * d * d / 4.0));
}

TEST_CASE("objective equals its terms recomputed independently") {
  std::mt19937 rng(1);
  const TriangleMesh mesh = icosphere(1);
  OptimizerConfig config;
  config.alpha = 3.0;
  config.beta = 0.25;
  config.lambda_theta = 2.0;
  config.lambda_s = 0.5;
  const StrainLaplacian lap = assemble_operator(mesh, config.lambda_theta, config.lambda_s);
  for (int trial = 0; trial < 5; ++trial) {
    const PlasticStrainField field = smooth_random_field(mesh, rng, 0, 0.4, 0.3);
    const Eigen::Matrix3Xd x = jitter(mesh.rest_positions(), rng, 0.1);
    LandmarkSet landmarks;
    for (int v : {1, 7, 20}) landmarks.add(v, random_vec(rng));

    const Eigen::Matrix3Xd rt = apply_theta_laplacian(mesh, field);
    const Eigen::Matrix3Xd rs = apply_s_laplacian(mesh, field, lap.transport);
    double smooth = 0.0;
    for (int t = 0; t < mesh.num_triangles(); ++t)
      smooth += config.lambda_theta * rt.col(t).squaredNorm() +
                config.lambda_s * unpack_sym<double>(Vec3d(rs.col(t))).squaredNorm();
    double land = 0.0;
    for (int k = 0; k < landmarks.size(); ++k)
      land += (x.col(landmarks.vertices[k]) - landmarks.targets.col(k)).squaredNorm();
    double prox = 0.0;
    for (int t = 0; t < mesh.num_triangles(); ++t)
      prox += field.theta(t).squaredNorm() + (field.s(t) - Vec3d(1.0, 1.0, 0.0)).squaredNorm();
    const double expected = smooth + config.alpha * land + config.beta * prox;
    CHECK(objective(field.p, x, lap, landmarks, config) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("after a rest update the objective is the landmark term alone") {
  std::mt19937 rng(2);
  TriangleMesh mesh = icosphere(2);
  const Eigen::Matrix3Xd x = jitter(mesh.rest_positions(), rng, 0.05);
  mesh.set_rest_positions(x);
  const StrainLaplacian lap = assemble_operator(mesh);
  LandmarkSet landmarks;
  landmarks.add(4, Vec3d(0.0, 0.0, 2.0));
  OptimizerConfig config;
  const Eigen::VectorXd p0 = PlasticStrainField::identity(mesh.num_triangles()).p;
  CHECK(lap.energy(p0) < 1e-28);
  CHECK(objective(p0, x, lap, landmarks, config) ==
        doctest::Approx(config.alpha * landmark_energy(x, landmarks)).epsilon(1e-14));
}

TEST_CASE("landmark error is measured on the bbox-100 scale") {
  const TriangleMesh mesh = plane_grid(2, 2, 3.0, 4.0);  // diagonal 5
  LandmarkSet landmarks;
  landmarks.add(0, Vec3d(0.0, 0.0, 0.5));
  landmarks.add(8, mesh.rest_positions().col(8));
  const LandmarkError err = landmark_error(mesh.rest_positions(), landmarks, 5.0);
  CHECK(err.max == doctest::Approx(10.0));
  CHECK(err.mean == doctest::Approx(5.0));
  CHECK(landmark_error(mesh.rest_positions(), LandmarkSet{}, 5.0).max == 0.0);
}

TEST_CASE("sensitivity matches a re-solved equilibrium") {
  std::mt19937 rng(3);
  const Patch patch;
  const int m = patch.mesh.num_triangles();
  const PlasticityModel plasticity(patch.mesh);
  const PlasticStrainField p0 = PlasticStrainField::identity(m);
  const PlasticTargets targets = plasticity.build_targets(p0);
  EquilibriumOptions tight;
  tight.relative_tolerance = 1e-12;
  EquilibriumSolver solver(patch.mesh, patch.anchors, patch.mat, tight);
  const Eigen::Matrix3Xd x = patch.mesh.rest_positions();
  const Sensitivity sens(solver, plasticity, p0, targets, x);

  CHECK(sens.apply(Eigen::VectorXd::Zero(6 * m)).norm() == 0.0);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXd dp = random_vector(rng, 6 * m);
    dp *= 1e-5 / dp.norm();
    PlasticStrainField moved = p0;
    moved.p += dp;
    const EquilibriumResult r = solver.solve(plasticity.build_targets(moved).forms, x);
    REQUIRE(r.converged);
    const Eigen::VectorXd actual = flat(r.positions) - flat(x);
    const Eigen::VectorXd predicted = sens.apply(dp);
    CHECK((predicted - actual).norm() < 1e-2 * actual.norm());
  }

  // Landmark rows agree with the full action of J.
  const std::vector<int> rows = {5, 17, 30};
  const Eigen::MatrixXd jrows = sens.rows(rows);
  const Eigen::VectorXd dp = random_vector(rng, 6 * m);
  const Eigen::VectorXd full = sens.apply(dp);
  for (std::size_t k = 0; k < rows.size(); ++k)
    CHECK((jrows.middleRows<3>(3 * k) * dp - full.segment<3>(3 * rows[k])).norm() < 1e-10 * (1.0 + full.norm()));
}

TEST_CASE("a local rotation on a clamped sheet has a local response") {
  const TriangleMesh mesh = plane_grid(12, 12);
  const MaterialParams mat = MaterialParams::defaults_for(mesh);
  AnchorSet anchors;
  for (const auto& [t, e] : mesh.boundary_edges())
    for (int c : {(e + 1) % 3, (e + 2) % 3}) {
      const int v = mesh.triangles()(c, t);
      if (std::find(anchors.vertices.begin(), anchors.vertices.end(), v) == anchors.vertices.end())
        anchors.add(v, mesh.rest_positions().col(v));
    }
  const PlasticityModel plasticity(mesh);
  const PlasticStrainField p0 = PlasticStrainField::identity(mesh.num_triangles());
  EquilibriumSolver solver(mesh, anchors, mat);
  const Sensitivity sens(solver, plasticity, p0, plasticity.build_targets(p0), mesh.rest_positions());

  // Pick the triangle nearest the centre.
  const auto& x = mesh.rest_positions();
  const auto& f = mesh.triangles();
  auto centroid = [&](int t) { return Vec3d((x.col(f(0, t)) + x.col(f(1, t)) + x.col(f(2, t))) / 3.0); };
  int centre = 0;
  for (int t = 1; t < mesh.num_triangles(); ++t)
    if ((centroid(t) - Vec3d(0.5, 0.5, 0)).norm() < (centroid(centre) - Vec3d(0.5, 0.5, 0)).norm()) centre = t;
  Eigen::VectorXd dp = Eigen::VectorXd::Zero(6 * mesh.num_triangles());
  dp.segment<3>(6 * centre) = Vec3d(1e-3, 0.0, 0.0);
  const Eigen::Matrix3Xd dx = unflat(sens.apply(dp));

  double near = 0.0, far = 0.0;
  int n_near = 0, n_far = 0;
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    const double r = (x.col(v) - centroid(centre)).norm();
    if (r < 0.15) near += dx.col(v).norm(), ++n_near;
    if (r > 0.35) far += dx.col(v).norm(), ++n_far;
  }
  REQUIRE(n_near > 0);
  REQUIRE(n_far > 0);
  CHECK(near / n_near > 0.0);
  CHECK(far / n_far < 0.2 * near / n_near);
}

TEST_CASE("Gauss-Newton step matches a dense solve") {
  std::mt19937 rng(4);
  const TriangleMesh mesh = plane_grid(5, 2);
  REQUIRE(mesh.num_triangles() == 20);
  const StrainLaplacian lap = assemble_operator(mesh, 1.5, 0.7);
  const int dim = 6 * mesh.num_triangles();
  const Eigen::VectorXd p0 = PlasticStrainField::identity(mesh.num_triangles()).p;
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::MatrixXd g = random_matrix(rng, 9, dim);
    const Eigen::VectorXd r = random_vector(rng, 9);
    const Eigen::VectorXd p = p0 + random_vector(rng, dim, 0.1);
    const double alpha = 10.0, beta = 0.01;
    const Eigen::MatrixXd l(lap.op);
    const Eigen::MatrixXd h = l.transpose() * l + beta * Eigen::MatrixXd::Identity(dim, dim) + alpha * g.transpose() * g;
    const Eigen::VectorXd rhs = -(l.transpose() * l * p + beta * (p - p0) + alpha * g.transpose() * r);
    const Eigen::VectorXd dense = h.ldlt().solve(rhs);
    const Eigen::VectorXd step = gauss_newton_step(lap.op, g, r, p, p0, alpha, beta);
    CHECK((step - dense).norm() < 1e-8 * dense.norm());
    // Descent for the linearized objective.
    CHECK(-rhs.dot(step) <= 0.0);
  }
}

TEST_CASE("Gauss-Newton step limits") {
  std::mt19937 rng(5);
  const TriangleMesh mesh = plane_grid(3, 3);
  const StrainLaplacian lap = assemble_operator(mesh);
  const int dim = 6 * mesh.num_triangles();
  const Eigen::VectorXd p0 = PlasticStrainField::identity(mesh.num_triangles()).p;
  const Eigen::MatrixXd g = random_matrix(rng, 3, dim);

  // Satisfied landmarks at p0: nothing to do.
  CHECK(gauss_newton_step(lap.op, g, Eigen::VectorXd::Zero(3), p0, p0, 1e3, 1e-2).norm() < 1e-12);

  // Vanishing landmark weight: the step vanishes with it.
  const Eigen::VectorXd r = random_vector(rng, 3);
  double previous = kInf;
  for (double alpha : {1.0, 1e-3, 1e-6, 1e-9}) {
    const double size = gauss_newton_step(lap.op, g, r, p0, p0, alpha, 1e-2).norm();
    CHECK(size < previous);
    previous = size;
  }
  CHECK(previous < 1e-6);

  // Without beta and landmarks the Laplacian's null space is left unresolved.
  CHECK_THROWS_AS(gauss_newton_step(lap.op, Eigen::MatrixXd(0, dim), Eigen::VectorXd(0), p0, p0, 1e3, 0.0), Error);
}

TEST_CASE("line search agrees with golden section on a smooth profile") {
  auto phi = [](double eta) { return 1.0 - 0.8 * eta + 0.5 * eta * eta + 0.05 * eta * eta * eta; };
  const LineSearchResult ls = line_search_eta(phi, phi(0.0), 2.0, 12);
  const double reference = golden_section(phi, 0.0, 2.0, 1e-10);
  CHECK(ls.accepted);
  CHECK(ls.probes <= 12);
  CHECK(std::abs(ls.eta - reference) < 1e-3);
  CHECK(ls.value < phi(0.0));
}

TEST_CASE("line search on a real objective profile") {
  // phi(eta) from a small Gauss-Newton step, evaluated with re-solved equilibria.
  const Patch patch;
  const int m = patch.mesh.num_triangles();
  const PlasticityModel plasticity(patch.mesh);
  const PlasticStrainField p0 = PlasticStrainField::identity(m);
  EquilibriumSolver solver(patch.mesh, patch.anchors, patch.mat);
  const Eigen::Matrix3Xd x = patch.mesh.rest_positions();
  const Sensitivity sens(solver, plasticity, p0, plasticity.build_targets(p0), x);
  const StrainLaplacian lap = assemble_operator(patch.mesh);
  LandmarkSet landmarks;
  landmarks.add(24, x.col(24) + Vec3d(0.0, 0.0, 0.002));
  OptimizerConfig config;
  const Eigen::MatrixXd g = sens.rows(landmarks.vertices);
  Eigen::VectorXd r = x.col(24) - landmarks.targets.col(0);
  const Eigen::VectorXd dp = gauss_newton_step(lap.op, g, r, p0.p, p0.p, config.alpha, config.beta);
  auto phi = [&](double eta) {
    PlasticStrainField field;
    field.p = p0.p + eta * dp;
    const EquilibriumResult eq = solver.solve(plasticity.build_targets(field).forms, x);
    return eq.converged ? objective(field.p, eq.positions, lap, landmarks, config) : kInf;
  };
  const LineSearchResult ls = line_search_eta(phi, phi(0.0), 2.0, 12);
  const double reference = golden_section(phi, 0.0, 2.0, 1e-6);
  CHECK(ls.accepted);
  CHECK(std::abs(ls.eta - reference) < 1e-3);
}

TEST_CASE("line search rejects inadmissible probes") {
  // s0 = 1 - 1.5 eta leaves the admissible set for eta >= 2/3, while the
  // smooth part of the objective would prefer eta = 1.2.
  const TriangleMesh mesh = plane_grid(1, 1);
  Eigen::VectorXd dp = Eigen::VectorXd::Zero(12);
  dp(3) = -1.5;
  const Eigen::VectorXd p0 = PlasticStrainField::identity(2).p;
  int rejected = 0;
  auto phi = [&](double eta) {
    PlasticStrainField field;
    field.p = p0 + eta * dp;
    if (field.first_inadmissible() >= 0) {
      ++rejected;
      return kInf;
    }
    return (eta - 1.2) * (eta - 1.2);
  };
  const LineSearchResult ls = line_search_eta(phi, phi(0.0), 2.0, 12);
  CHECK(ls.accepted);
  CHECK(ls.eta < 2.0 / 3.0);
  CHECK(ls.eta > 0.3);
  CHECK(rejected > 0);
}

TEST_CASE("line search with nothing to gain") {
  int calls = 0;
  const LineSearchResult flat_ls = line_search_eta([&](double) { ++calls; return 2.0; }, 2.0, 2.0, 12);
  CHECK_FALSE(flat_ls.accepted);
  CHECK(flat_ls.eta == 0.0);
  CHECK(flat_ls.value == 2.0);
  CHECK(calls <= 12);

  const LineSearchResult none = line_search_eta([](double) { return kInf; }, 1.0, 2.0, 12);
  CHECK_FALSE(none.accepted);
  CHECK(none.eta == 0.0);
  CHECK(none.probes <= 12);
}

TEST_CASE("trivial landmarks stop immediately") {
  const TriangleMesh mesh = plane_grid(4, 4);
  LandmarkSet landmarks;
  for (int v : {6, 12, 18}) landmarks.add(v, mesh.rest_positions().col(v));
  const OptimizeResult r = optimize(mesh, landmarks, anchors_at(mesh, {0, 4, 24}),
                                    MaterialParams::defaults_for(mesh), OptimizerConfig{});
  CHECK(r.converged);
  CHECK(r.trace.size() == 1);
  CHECK(r.trace[0].eps_land_max == 0.0);
  CHECK(r.trace[0].objective == 0.0);
  CHECK(r.mesh.current_positions() == mesh.rest_positions());
}

TEST_CASE("a lifted centre on a small sheet is reached") {
  const TriangleMesh mesh = plane_grid(8, 8);
  const double diag = bbox_diagonal(mesh.rest_positions());
  LandmarkSet landmarks;
  landmarks.add(40, mesh.rest_positions().col(40) + Vec3d(0.0, 0.0, 0.3 * diag));
  const AnchorSet anchors = anchors_at(mesh, {0, 8, 72, 80});
  std::vector<IterationRecord> seen;
  const OptimizeResult r = optimize(mesh, landmarks, anchors, MaterialParams::defaults_for(mesh), OptimizerConfig{},
                                    [&](const IterationRecord& rec) { seen.push_back(rec); });
  CHECK(r.converged);
  CHECK(r.stop_reason == "landmarks-reached");
  CHECK(r.trace.back().eps_land_max < 1.0);
  CHECK(r.trace.size() <= 21);
  CHECK(seen.size() == r.trace.size());
  CHECK(r.history.size() == r.trace.size());
  for (std::size_t k = 1; k < r.trace.size(); ++k) {
    CHECK(r.trace[k].objective <= r.trace[k - 1].objective);
    CHECK(r.trace[k].iteration == static_cast<int>(k));
    CHECK(r.trace[k].eta > 0.0);
    CHECK(r.trace[k].dp_norm > 0.0);
  }
  const auto& f = mesh.triangles();
  const Eigen::Matrix3Xd& y = r.mesh.current_positions();
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Vec3d n = (y.col(f(1, t)) - y.col(f(0, t))).cross(y.col(f(2, t)) - y.col(f(0, t)));
    CHECK(n.norm() > 0.0);
  }
}

TEST_CASE("optimizer configuration is validated") {
  OptimizerConfig config;
  CHECK_NOTHROW(config.validate());
  config.beta = -1.0;
  CHECK_THROWS_AS(config.validate(), Error);
  config = {};
  config.max_iterations = 0;
  CHECK_THROWS_AS(config.validate(), Error);
  config = {};
  config.eta_max = 0.0;
  CHECK_THROWS_AS(config.validate(), Error);
}
