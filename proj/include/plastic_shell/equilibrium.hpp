#pragma once

#include "plastic_shell/common.hpp"
#include "plastic_shell/mesh.hpp"
#include "plastic_shell/plasticity.hpp"
#include "plastic_shell/shell_energy.hpp"

#include <Eigen/CholmodSupport>
#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <string>
#include <vector>

namespace plastic_shell {

/// Vertex targets: landmarks for the outer objective, anchors for the inner solve.
struct PositionConstraints {
  std::vector<int> vertices;
  Eigen::Matrix3Xd targets;

  int size() const { return static_cast<int>(vertices.size()); }
  void add(int vertex, const Vec3d& target);
  /// Throws on out-of-range or repeated vertices.
  void validate(int num_vertices, const std::string& what) const;
};

struct LandmarkSet : PositionConstraints {};

/// Penalty-anchored vertices, E_c = w * sum ||x_v - d_v||^2. A non-positive
/// weight selects the default 1e3 * E * h.
struct AnchorSet : PositionConstraints {
  double weight = 0.0;

  double weight_for(const MaterialParams& mat) const {
    return weight > 0.0 ? weight : 1e3 * mat.youngs_modulus * mat.thickness;
  }
};

/// Throws unless every connected component holds 3 anchors that are not collinear.
void check_anchors_well_posed(const TriangleMesh& mesh, const AnchorSet& anchors);

/// Fixed-in-place landmarks when there are any; otherwise (and in components
/// they leave under-constrained) deterministic farthest-point samples
/// starting from the component's first vertex, skipping landmark vertices.
AnchorSet pick_default_anchors(const LandmarkSet& landmarks, const TriangleMesh& mesh);

struct EquilibriumOptions {
  int max_iterations = 200;
  /// Residual threshold on the force infinity norm, relative to E * h * bbox diagonal.
  double relative_tolerance = 1e-6;
  double armijo = 1e-4;
  int max_backtracks = 40;
};

enum class EquilibriumStatus { kConverged, kMaxIterations, kLineSearchFailure, kNonFinite };

const char* to_string(EquilibriumStatus status);

struct EquilibriumResult {
  Eigen::Matrix3Xd positions;
  double residual = 0.0;
  double energy = 0.0;
  int iterations = 0;
  bool converged = false;
  EquilibriumStatus status = EquilibriumStatus::kMaxIterations;
  /// Total energy after each accepted Newton step, starting with the warm start.
  std::vector<double> energy_history;
};

/// Newton solver for argmin_x E_e(x) + E_c(x), bound to one mesh, anchor set
/// and material so repeated solves reuse the sparsity analysis.
class EquilibriumSolver {
 public:
  EquilibriumSolver(const TriangleMesh& mesh, AnchorSet anchors, const MaterialParams& mat,
                    EquilibriumOptions options = {});

  EquilibriumResult solve(const std::vector<FundamentalFormPair>& targets, const Eigen::Matrix3Xd& warm_start);

  /// E_e + E_c, +inf where the elastic energy cannot be evaluated.
  double total_energy(const std::vector<FundamentalFormPair>& targets, const Eigen::Matrix3Xd& x) const;
  /// d(E_e + E_c)/dx, the net force.
  Eigen::VectorXd net_force(const std::vector<FundamentalFormPair>& targets, const Eigen::Matrix3Xd& x) const;
  /// Projected elastic Hessian plus 2 w C^T C.
  Eigen::SparseMatrix<double> stiffness(const std::vector<FundamentalFormPair>& targets,
                                        const Eigen::Matrix3Xd& x) const;

  double tolerance() const { return tolerance_; }
  double anchor_weight() const { return weight_; }
  const ElasticModel& elastic() const { return elastic_; }
  const AnchorSet& anchors() const { return anchors_; }
  const MaterialParams& material() const { return mat_; }

 private:
  void add_anchor_terms(const Eigen::Matrix3Xd& x, Eigen::VectorXd* gradient, Eigen::SparseMatrix<double>* hessian,
                        double* energy) const;

  ElasticModel elastic_;
  AnchorSet anchors_;
  MaterialParams mat_;
  EquilibriumOptions options_;
  double weight_;
  double tolerance_;
  std::vector<int> anchor_diagonal_;  // value index of each anchored dof's diagonal entry
  Eigen::CholmodSupernodalLLT<Eigen::SparseMatrix<double>> llt_;
  bool analyzed_ = false;
};

EquilibriumResult solve_equilibrium(const TriangleMesh& mesh, const std::vector<FundamentalFormPair>& targets,
                                    const AnchorSet& anchors, const MaterialParams& mat,
                                    const Eigen::Matrix3Xd& warm_start, EquilibriumOptions options = {});
EquilibriumResult solve_equilibrium(const TriangleMesh& mesh, const PlasticTargets& targets, const AnchorSet& anchors,
                                    const MaterialParams& mat, const Eigen::Matrix3Xd& warm_start,
                                    EquilibriumOptions options = {});

}  // namespace plastic_shell
