#pragma once

#include "plastic_shell/common.hpp"
#include "plastic_shell/equilibrium.hpp"
#include "plastic_shell/laplacian.hpp"
#include "plastic_shell/mesh.hpp"
#include "plastic_shell/plasticity.hpp"
#include "plastic_shell/shell_energy.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <functional>
#include <string>
#include <vector>

namespace plastic_shell {

struct OptimizerConfig {
  double alpha = 1e3;
  double beta = 1e-2;
  double lambda_theta = 1.0;
  double lambda_s = 1.0;
  int max_iterations = 30;
  /// Stop once the largest landmark error (bbox diagonal = 100) drops below this.
  double stop_eps = 0.5;
  double eta_max = 2.0;
  int max_probes = 12;
  /// Newton iteration cap for line-search probes; slower probes count as failed.
  int probe_newton_iterations = 50;
  EquilibriumOptions equilibrium;

  void validate() const;
};

/// Landmark errors on the scale where the rest bounding-box diagonal is 100.
struct LandmarkError {
  double max = 0.0;
  double mean = 0.0;
};

LandmarkError landmark_error(const Eigen::Matrix3Xd& x, const LandmarkSet& landmarks, double diagonal);

/// sum ||x_v - target_v||^2 / length_scale^2.
double landmark_energy(const Eigen::Matrix3Xd& x, const LandmarkSet& landmarks, double length_scale = 1.0);

/// ||L p||^2 + alpha E_l(x) + beta ||p - p0||^2, E_l measured in units of length_scale.
double objective(const Eigen::VectorXd& p, const Eigen::Matrix3Xd& x, const StrainLaplacian& laplacian,
                 const LandmarkSet& landmarks, const OptimizerConfig& config, double length_scale = 1.0);

/// Implicit-function sensitivity dx/dp = -K^-1 df/dp at an equilibrium x of
/// `field`. K is factorized once; columns are applied on demand.
class Sensitivity {
 public:
  Sensitivity(const EquilibriumSolver& solver, const PlasticityModel& plasticity, const PlasticStrainField& field,
              const PlasticTargets& targets, const Eigen::Matrix3Xd& x);

  /// J dp as a 3n vector.
  Eigen::VectorXd apply(const Eigen::VectorXd& dp) const;
  /// Rows of J for the given vertices (3 per vertex), dense 3l x 6m.
  Eigen::MatrixXd rows(const std::vector<int>& vertices) const;
  /// df/dp, 3n x 6m.
  const Eigen::SparseMatrix<double>& force_jacobian() const { return force_jacobian_; }

 private:
  Eigen::SparseMatrix<double> force_jacobian_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> stiffness_;
};

/// Solves (L^T L + beta I + alpha G^T G) dp = -(L^T L p + beta (p - p0) + alpha G^T r),
/// G the landmark rows of J and r the landmark residual, folding the low-rank
/// landmark term in with the Woodbury identity.
Eigen::VectorXd gauss_newton_step(const Eigen::SparseMatrix<double>& laplacian, const Eigen::MatrixXd& landmark_jacobian,
                                  const Eigen::VectorXd& landmark_residual, const Eigen::VectorXd& p,
                                  const Eigen::VectorXd& p0, double alpha, double beta);

struct LineSearchResult {
  double eta = 0.0;
  double value = 0.0;
  int probes = 0;
  bool accepted = false;
};

/// Brent search for the best eta in [0, eta_max] of phi, which returns +inf
/// for inadmissible probes. Accepts only eta with phi(eta) < phi0 = phi(0).
LineSearchResult line_search_eta(const std::function<double(double)>& phi, double phi0, double eta_max,
                                 int max_probes);

struct IterationRecord {
  int iteration = 0;
  double objective = 0.0;
  double eps_land_max = 0.0;
  double eps_land_mean = 0.0;
  double dp_norm = 0.0;
  double eta = 0.0;
  int inner_iterations = 0;
  int probes = 0;
  double seconds = 0.0;
};

using IterationTrace = std::vector<IterationRecord>;

struct Snapshot {
  int iteration = 0;
  Eigen::Matrix3Xd positions;
  /// Plastic field of this iteration, relative to the previous iteration's shape.
  PlasticStrainField field;
};

struct OptimizeResult {
  TriangleMesh mesh;  // original rest, final current positions
  IterationTrace trace;
  std::vector<Snapshot> history;
  bool converged = false;
  std::string stop_reason;
};

/// Runs the outer loop. `on_iteration`, when set, sees every accepted record.
OptimizeResult optimize(const TriangleMesh& mesh, const LandmarkSet& landmarks, const AnchorSet& anchors,
                        const MaterialParams& mat, const OptimizerConfig& config,
                        const std::function<void(const IterationRecord&)>& on_iteration = {});

}  // namespace plastic_shell
