#include "plastic_shell/optimizer.hpp"

#include <boost/math/tools/minima.hpp>

#include <Eigen/Cholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>

namespace plastic_shell {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Stand-in for +inf inside Brent's parabolic fits, which cannot digest infinities.
constexpr double kRejected = 1e30;

void factorize_spd(Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>& ldlt, const Eigen::SparseMatrix<double>& m,
                   const std::string& stage, const std::string& what) {
  ldlt.compute(m);
  if (ldlt.info() != Eigen::Success) throw Error(stage, what + " factorization failed");
  const Eigen::VectorXd& d = ldlt.vectorD();
  if (!(d.minCoeff() > 1e-14 * d.cwiseAbs().maxCoeff())) throw Error(stage, what + " is singular or indefinite");
}

}  // namespace

void OptimizerConfig::validate() const {
  if (!(alpha >= 0.0 && beta >= 0.0 && lambda_theta >= 0.0 && lambda_s >= 0.0))
    throw Error("config", "optimizer weights must be non-negative");
  if (max_iterations < 1) throw Error("config", "max_iter must be at least 1");
  if (!(stop_eps >= 0.0)) throw Error("config", "stop_eps must be non-negative");
  if (!(eta_max > 0.0)) throw Error("config", "eta_max must be positive");
  if (max_probes < 1) throw Error("config", "max_probes must be at least 1");
  if (probe_newton_iterations < 1) throw Error("config", "probe_newton_iterations must be at least 1");
}

LandmarkError landmark_error(const Eigen::Matrix3Xd& x, const LandmarkSet& landmarks, double diagonal) {
  LandmarkError err;
  if (landmarks.size() == 0) return err;
  for (int k = 0; k < landmarks.size(); ++k) {
    const double d = (x.col(landmarks.vertices[k]) - landmarks.targets.col(k)).norm() * 100.0 / diagonal;
    err.max = std::max(err.max, d);
    err.mean += d;
  }
  err.mean /= landmarks.size();
  return err;
}

double landmark_energy(const Eigen::Matrix3Xd& x, const LandmarkSet& landmarks, double length_scale) {
  double e = 0.0;
  for (int k = 0; k < landmarks.size(); ++k)
    e += (x.col(landmarks.vertices[k]) - landmarks.targets.col(k)).squaredNorm();
  return e / (length_scale * length_scale);
}

double objective(const Eigen::VectorXd& p, const Eigen::Matrix3Xd& x, const StrainLaplacian& laplacian,
                 const LandmarkSet& landmarks, const OptimizerConfig& config, double length_scale) {
  const Eigen::VectorXd p0 = PlasticStrainField::identity(static_cast<int>(p.size() / 6)).p;
  return laplacian.energy(p) + config.alpha * landmark_energy(x, landmarks, length_scale) +
         config.beta * (p - p0).squaredNorm();
}

Sensitivity::Sensitivity(const EquilibriumSolver& solver, const PlasticityModel& plasticity,
                         const PlasticStrainField& field, const PlasticTargets& targets, const Eigen::Matrix3Xd& x) {
  factorize_spd(stiffness_, solver.stiffness(targets.forms, x), "sensitivity", "stiffness");

  const ElasticModel& elastic = solver.elastic();
  const int m = plasticity.num_triangles();
  std::vector<Eigen::Matrix<double, 18, 15>> local(m);
  parallel_for(m, [&](std::size_t begin, std::size_t end) {
    for (std::size_t ts = begin; ts < end; ++ts) {
      const int t = static_cast<int>(ts);
      local[t] = elastic.gradient_target_jacobian(t, x, targets.forms[t], solver.material()) *
                 plasticity.target_jacobian(t, field);
    }
  });

  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(m) * 18 * 15);
  for (int t = 0; t < m; ++t) {
    const auto& stencil = elastic.stencil(t);
    const auto& nbr = plasticity.local(t).neighbour;
    std::array<int, 5> cols = {6 * t, 6 * t + 3, kNone, kNone, kNone};
    for (int i = 0; i < 3; ++i)
      if (nbr[i] != kNone) cols[2 + i] = 6 * nbr[i];
    for (int r = 0; r < 18; ++r) {
      if (stencil[r / 3] == kNone) continue;
      const int row = 3 * stencil[r / 3] + r % 3;
      for (int c = 0; c < 15; ++c)
        if (cols[c / 3] != kNone) entries.emplace_back(row, cols[c / 3] + c % 3, local[t](r, c));
    }
  }
  force_jacobian_.resize(elastic.num_dofs(), 6 * m);
  force_jacobian_.setFromTriplets(entries.begin(), entries.end());
}

Eigen::VectorXd Sensitivity::apply(const Eigen::VectorXd& dp) const {
  return -stiffness_.solve(Eigen::VectorXd(force_jacobian_ * dp));
}

Eigen::MatrixXd Sensitivity::rows(const std::vector<int>& vertices) const {
  const int k = static_cast<int>(vertices.size());
  Eigen::MatrixXd selector = Eigen::MatrixXd::Zero(force_jacobian_.rows(), 3 * k);
  for (int l = 0; l < k; ++l)
    for (int c = 0; c < 3; ++c) selector(3 * vertices[l] + c, 3 * l + c) = 1.0;
  // A J = -(K^-1 A^T)^T df/dp, using the symmetry of K.
  const Eigen::MatrixXd z = stiffness_.solve(selector);
  return -(force_jacobian_.transpose() * z).transpose();
}

Eigen::VectorXd gauss_newton_step(const Eigen::SparseMatrix<double>& laplacian, const Eigen::MatrixXd& landmark_jacobian,
                                  const Eigen::VectorXd& landmark_residual, const Eigen::VectorXd& p,
                                  const Eigen::VectorXd& p0, double alpha, double beta) {
  const Eigen::Index dim = p.size();
  Eigen::SparseMatrix<double> identity(dim, dim);
  identity.setIdentity();
  const Eigen::SparseMatrix<double> ltl = laplacian.transpose() * laplacian;
  const Eigen::SparseMatrix<double> base = ltl + beta * identity;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  factorize_spd(ldlt, base, "optimizer", "L^T L + beta I");

  Eigen::VectorXd rhs = -(ltl * p + beta * (p - p0));
  if (landmark_jacobian.rows() > 0) rhs -= alpha * landmark_jacobian.transpose() * landmark_residual;
  Eigen::VectorXd step = ldlt.solve(rhs);
  if (landmark_jacobian.rows() == 0 || alpha == 0.0) return step;

  // (P + U U^T)^-1 b = P^-1 b - P^-1 U (I + U^T P^-1 U)^-1 U^T P^-1 b.
  const Eigen::MatrixXd u = std::sqrt(alpha) * landmark_jacobian.transpose();
  const Eigen::MatrixXd pu = ldlt.solve(u);
  Eigen::MatrixXd capacitance = u.transpose() * pu;
  capacitance.diagonal().array() += 1.0;
  step -= pu * capacitance.ldlt().solve(u.transpose() * step);
  return step;
}

LineSearchResult line_search_eta(const std::function<double(double)>& phi, double phi0, double eta_max,
                                 int max_probes) {
  std::map<double, double> cache;
  auto eval = [&](double eta) {
    eta = std::clamp(eta, 0.0, eta_max);
    if (eta == 0.0) return phi0;
    // Brent and the bracketing pass can revisit a point up to roundoff.
    if (auto it = cache.lower_bound(eta - 1e-9); it != cache.end() && it->first <= eta + 1e-9) return it->second;
    if (static_cast<int>(cache.size()) >= max_probes) return kInf;
    const double v = phi(eta);
    cache.emplace(eta, std::isfinite(v) ? v : kInf);
    return cache[eta];
  };

  double hi = eta_max;
  double start = std::min(1.0, eta_max);
  if (!(eval(start) < phi0)) {
    // Shrink until some step helps, keeping half of the probes for refinement.
    while (static_cast<int>(cache.size()) < (max_probes + 1) / 2) {
      start *= 0.5;
      if (eval(start) < phi0) break;
    }
    hi = 2.0 * start;
  }
  if (eval(start) < phi0 && static_cast<int>(cache.size()) < max_probes) {
    auto f = [&](double eta) {
      const double v = eval(eta);
      return std::isfinite(v) ? v : kRejected;
    };
    std::uintmax_t iterations = static_cast<std::uintmax_t>(max_probes - static_cast<int>(cache.size()));
    boost::math::tools::brent_find_minima(f, 0.0, hi, 16, iterations);
  }

  LineSearchResult result;
  result.value = phi0;
  result.probes = static_cast<int>(cache.size());
  for (const auto& [eta, value] : cache)
    if (value < result.value) {
      result.value = value;
      result.eta = eta;
      result.accepted = true;
    }
  return result;
}

OptimizeResult optimize(const TriangleMesh& mesh, const LandmarkSet& landmarks, const AnchorSet& anchors,
                        const MaterialParams& mat, const OptimizerConfig& config,
                        const std::function<void(const IterationRecord&)>& on_iteration) {
  using Clock = std::chrono::steady_clock;
  config.validate();
  mat.validate();
  landmarks.validate(mesh.num_vertices(), "landmark");
  check_anchors_well_posed(mesh, anchors);

  const double diagonal = bbox_diagonal(mesh.rest_positions());
  const int m = mesh.num_triangles();
  const PlasticStrainField identity = PlasticStrainField::identity(m);

  OptimizeResult result;
  result.mesh = mesh;
  Eigen::Matrix3Xd x = mesh.rest_positions();

  IterationRecord record;
  const LandmarkError err0 = landmark_error(x, landmarks, diagonal);
  record.objective = config.alpha * landmark_energy(x, landmarks, diagonal);
  record.eps_land_max = err0.max;
  record.eps_land_mean = err0.mean;
  result.trace.push_back(record);
  result.history.push_back({0, x, identity});
  if (on_iteration) on_iteration(record);

  result.stop_reason = "max-iterations";
  for (int iter = 1; iter <= config.max_iterations; ++iter) {
    if (result.trace.back().eps_land_max < config.stop_eps) {
      result.converged = true;
      result.stop_reason = "landmarks-reached";
      break;
    }
    const auto started = Clock::now();

    // Rest shape <- previous equilibrium, p <- p0.
    TriangleMesh working = mesh;
    working.set_rest_positions(x);
    working.set_current_positions(x);
    const PlasticityModel plasticity(working);
    EquilibriumOptions probe_options = config.equilibrium;
    probe_options.max_iterations = std::min(probe_options.max_iterations, config.probe_newton_iterations);
    EquilibriumSolver solver(working, anchors, mat, probe_options);
    const StrainLaplacian laplacian = assemble_operator(working, config.lambda_theta, config.lambda_s);
    const PlasticTargets rest_targets = plasticity.build_targets(identity);

    const Sensitivity sensitivity(solver, plasticity, identity, rest_targets, x);
    const Eigen::MatrixXd jac = sensitivity.rows(landmarks.vertices) / diagonal;
    Eigen::VectorXd residual(3 * landmarks.size());
    for (int k = 0; k < landmarks.size(); ++k)
      residual.segment<3>(3 * k) = (x.col(landmarks.vertices[k]) - landmarks.targets.col(k)) / diagonal;
    const Eigen::VectorXd dp =
        gauss_newton_step(laplacian.op, jac, residual, identity.p, identity.p, config.alpha, config.beta);
    const Eigen::VectorXd dx = sensitivity.apply(dp);

    struct Probe {
      Eigen::Matrix3Xd x;
      int iterations = 0;
    };
    std::map<double, Probe> probes;
    auto phi = [&](double eta) {
      PlasticStrainField field;
      field.p = identity.p + eta * dp;
      if (field.first_inadmissible() >= 0) return kInf;
      PlasticTargets targets;
      try {
        targets = plasticity.build_targets(field);
      } catch (const Error&) {
        return kInf;
      }
      // Start from the linearized prediction off the nearest solved probe (or
      // x itself) when that is a valid configuration.
      double base_eta = 0.0;
      const Eigen::Matrix3Xd* base = &x;
      for (const auto& [probe_eta, probe] : probes)
        if (std::abs(probe_eta - eta) < std::abs(base_eta - eta)) {
          base_eta = probe_eta;
          base = &probe.x;
        }
      Eigen::Matrix3Xd warm = *base + (eta - base_eta) * unflat(dx);
      if (!std::isfinite(solver.total_energy(targets.forms, warm))) warm = *base;
      EquilibriumResult eq = solver.solve(targets.forms, warm);
      if (!eq.converged) return kInf;
      const double value = objective(field.p, eq.positions, laplacian, landmarks, config, diagonal);
      probes[eta] = {std::move(eq.positions), eq.iterations};
      return value;
    };
    const double phi0 = config.alpha * landmark_energy(x, landmarks, diagonal);
    const LineSearchResult ls = line_search_eta(phi, phi0, config.eta_max, config.max_probes);
    if (!ls.accepted) {
      result.stop_reason = "step-rejected";
      break;
    }

    const Probe& best = probes.at(ls.eta);
    x = best.x;
    const LandmarkError err = landmark_error(x, landmarks, diagonal);
    record = {};
    record.iteration = iter;
    record.objective = ls.value;
    record.eps_land_max = err.max;
    record.eps_land_mean = err.mean;
    record.dp_norm = dp.norm();
    record.eta = ls.eta;
    record.inner_iterations = best.iterations;
    record.probes = ls.probes;
    record.seconds = std::chrono::duration<double>(Clock::now() - started).count();
    result.trace.push_back(record);
    PlasticStrainField field;
    field.p = identity.p + ls.eta * dp;
    result.history.push_back({iter, x, std::move(field)});
    if (on_iteration) on_iteration(record);
  }
  if (!result.converged && result.trace.back().eps_land_max < config.stop_eps) {
    result.converged = true;
    result.stop_reason = "landmarks-reached";
  }
  result.mesh.set_current_positions(x);
  return result;
}

}  // namespace plastic_shell
