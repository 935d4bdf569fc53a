#include "plastic_shell/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace plastic_shell {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kCollinearFraction = 1e-6;
constexpr double kMaxShift = 1e-2;  // relative to the mean stiffness diagonal

double distance_to_line(const Vec3d& p, const Vec3d& a, const Vec3d& b) {
  const Vec3d dir = (b - a).normalized();
  const Vec3d d = p - a;
  return (d - d.dot(dir) * dir).norm();
}

// True if pts contain three points that are not collinear (relative to scale).
bool spans_plane(const std::vector<Vec3d>& pts, double scale) {
  if (pts.size() < 3) return false;
  std::size_t far = 0;
  for (std::size_t k = 1; k < pts.size(); ++k)
    if ((pts[k] - pts[0]).norm() > (pts[far] - pts[0]).norm()) far = k;
  if ((pts[far] - pts[0]).norm() <= kCollinearFraction * scale) return false;
  for (const Vec3d& p : pts)
    if (distance_to_line(p, pts[0], pts[far]) > kCollinearFraction * scale) return true;
  return false;
}

}  // namespace

void PositionConstraints::add(int vertex, const Vec3d& target) {
  vertices.push_back(vertex);
  targets.conservativeResize(3, targets.cols() + 1);
  targets.col(targets.cols() - 1) = target;
}

void PositionConstraints::validate(int num_vertices, const std::string& what) const {
  if (targets.cols() != size()) throw Error("config", what + " targets do not match vertex list");
  std::set<int> seen;
  for (int k = 0; k < size(); ++k) {
    const int v = vertices[k];
    if (v < 0 || v >= num_vertices)
      throw Error("config", what + " vertex " + std::to_string(v) + " out of range", v);
    if (!seen.insert(v).second) throw Error("config", "repeated " + what + " vertex " + std::to_string(v), v);
    if (!targets.col(k).allFinite()) throw Error("config", what + " target of vertex " + std::to_string(v) + " is not finite", v);
  }
}

void check_anchors_well_posed(const TriangleMesh& mesh, const AnchorSet& anchors) {
  anchors.validate(mesh.num_vertices(), "anchor");
  const double scale = bbox_diagonal(mesh.rest_positions());
  std::vector<std::vector<Vec3d>> per_component(mesh.num_components());
  for (int k = 0; k < anchors.size(); ++k)
    per_component[mesh.vertex_components()[anchors.vertices[k]]].push_back(anchors.targets.col(k));
  for (int c = 0; c < mesh.num_components(); ++c)
    if (!spans_plane(per_component[c], scale))
      throw Error("equilibrium",
                  "ill-posed anchors: component " + std::to_string(c) + " needs 3 non-collinear anchored vertices", c);
}

AnchorSet pick_default_anchors(const LandmarkSet& landmarks, const TriangleMesh& mesh) {
  landmarks.validate(mesh.num_vertices(), "landmark");
  const auto& rest = mesh.rest_positions();
  const double scale = bbox_diagonal(rest);
  const auto& component = mesh.vertex_components();

  AnchorSet anchors;
  std::vector<bool> is_landmark(mesh.num_vertices(), false);
  std::vector<std::vector<Vec3d>> chosen(mesh.num_components());
  for (int k = 0; k < landmarks.size(); ++k) {
    const int v = landmarks.vertices[k];
    is_landmark[v] = true;
    if ((landmarks.targets.col(k) - rest.col(v)).norm() <= 1e-12 * scale) {
      anchors.add(v, rest.col(v));
      chosen[component[v]].push_back(rest.col(v));
    }
  }

  for (int c = 0; c < mesh.num_components(); ++c) {
    std::vector<int> candidates;
    for (int v = 0; v < mesh.num_vertices(); ++v)
      if (component[v] == c && !is_landmark[v]) candidates.push_back(v);
    std::vector<bool> taken(candidates.size(), false);
    auto take = [&](std::size_t idx) {
      taken[idx] = true;
      anchors.add(candidates[idx], rest.col(candidates[idx]));
      chosen[c].push_back(rest.col(candidates[idx]));
    };
    // Farthest-point sampling; the last pick falls back to distance from the
    // line through the first two when the farthest point is collinear.
    while (!spans_plane(chosen[c], scale)) {
      std::size_t best = candidates.size();
      double best_score = -1.0;
      for (std::size_t k = 0; k < candidates.size(); ++k) {
        if (taken[k]) continue;
        const Vec3d p = rest.col(candidates[k]);
        double score;
        if (chosen[c].empty()) {
          score = -static_cast<double>(k);
        } else if (chosen[c].size() >= 3) {
          score = distance_to_line(p, chosen[c][0], chosen[c][1]);
        } else {
          score = kInf;
          for (const Vec3d& q : chosen[c]) score = std::min(score, (p - q).norm());
        }
        if (score > best_score) {
          best_score = score;
          best = k;
        }
      }
      if (best == candidates.size())
        throw Error("equilibrium", "component " + std::to_string(c) + " has fewer than 3 eligible anchor vertices", c);
      if (chosen[c].size() == 2) {
        // Prefer the farthest-point sample unless it is collinear with the first two.
        std::vector<Vec3d> trial = chosen[c];
        trial.push_back(rest.col(candidates[best]));
        if (!spans_plane(trial, scale)) {
          double off = -1.0;
          for (std::size_t k = 0; k < candidates.size(); ++k) {
            if (taken[k]) continue;
            const double d = distance_to_line(rest.col(candidates[k]), chosen[c][0], chosen[c][1]);
            if (d > off) {
              off = d;
              best = k;
            }
          }
        }
      }
      take(best);
    }
  }
  return anchors;
}

const char* to_string(EquilibriumStatus status) {
  switch (status) {
    case EquilibriumStatus::kConverged: return "converged";
    case EquilibriumStatus::kMaxIterations: return "max-iterations";
    case EquilibriumStatus::kLineSearchFailure: return "line-search-failure";
    case EquilibriumStatus::kNonFinite: return "non-finite";
  }
  return "unknown";
}

EquilibriumSolver::EquilibriumSolver(const TriangleMesh& mesh, AnchorSet anchors, const MaterialParams& mat,
                                     EquilibriumOptions options)
    : elastic_(mesh), anchors_(std::move(anchors)), mat_(mat), options_(options) {
  mat_.validate();
  check_anchors_well_posed(mesh, anchors_);
  llt_.cholmod().print = 0;  // indefinite trial factorizations are expected
  weight_ = anchors_.weight_for(mat_);
  tolerance_ = options_.relative_tolerance * mat_.youngs_modulus * mat_.thickness * bbox_diagonal(mesh.rest_positions());
  const auto& pattern = elastic_.pattern();
  for (int v : anchors_.vertices)
    for (int k = 0; k < 3; ++k) {
      const int dof = 3 * v + k;
      const int* begin = pattern.innerIndexPtr() + pattern.outerIndexPtr()[dof];
      const int* end = pattern.innerIndexPtr() + pattern.outerIndexPtr()[dof + 1];
      anchor_diagonal_.push_back(static_cast<int>(std::lower_bound(begin, end, dof) - pattern.innerIndexPtr()));
    }
}

void EquilibriumSolver::add_anchor_terms(const Eigen::Matrix3Xd& x, Eigen::VectorXd* gradient,
                                         Eigen::SparseMatrix<double>* hessian, double* energy) const {
  for (int k = 0; k < anchors_.size(); ++k) {
    const int v = anchors_.vertices[k];
    const Vec3d d = x.col(v) - anchors_.targets.col(k);
    if (energy) *energy += weight_ * d.squaredNorm();
    if (gradient) gradient->segment<3>(3 * v) += 2.0 * weight_ * d;
    if (hessian)
      for (int c = 0; c < 3; ++c) hessian->valuePtr()[anchor_diagonal_[3 * k + c]] += 2.0 * weight_;
  }
}

double EquilibriumSolver::total_energy(const std::vector<FundamentalFormPair>& targets,
                                       const Eigen::Matrix3Xd& x) const {
  if (!x.allFinite()) return kInf;
  double e;
  try {
    e = elastic_.evaluate(x, targets, mat_, nullptr, nullptr);
  } catch (const Error&) {
    return kInf;
  }
  add_anchor_terms(x, nullptr, nullptr, &e);
  return std::isfinite(e) ? e : kInf;
}

Eigen::VectorXd EquilibriumSolver::net_force(const std::vector<FundamentalFormPair>& targets,
                                             const Eigen::Matrix3Xd& x) const {
  Eigen::VectorXd g;
  elastic_.evaluate(x, targets, mat_, &g, nullptr);
  add_anchor_terms(x, &g, nullptr, nullptr);
  return g;
}

Eigen::SparseMatrix<double> EquilibriumSolver::stiffness(const std::vector<FundamentalFormPair>& targets,
                                                         const Eigen::Matrix3Xd& x) const {
  Eigen::SparseMatrix<double> h = elastic_.pattern();
  elastic_.evaluate(x, targets, mat_, nullptr, &h);
  add_anchor_terms(x, nullptr, &h, nullptr);
  return h;
}

EquilibriumResult EquilibriumSolver::solve(const std::vector<FundamentalFormPair>& targets,
                                           const Eigen::Matrix3Xd& warm_start) {
  if (warm_start.cols() * 3 != elastic_.num_dofs() || !warm_start.allFinite())
    throw Error("equilibrium", "warm start must be a finite position array matching the mesh");
  EquilibriumResult result;
  result.positions = warm_start;
  Eigen::Matrix3Xd& x = result.positions;
  Eigen::VectorXd g;
  Eigen::SparseMatrix<double> h = elastic_.pattern();
  double levenberg = 0.0;  // shift relative to the mean stiffness diagonal

  for (int iter = 0;; ++iter) {
    double energy;
    try {
      energy = elastic_.evaluate(x, targets, mat_, &g, &h, false);
    } catch (const Error&) {
      result.status = EquilibriumStatus::kNonFinite;
      return result;
    }
    add_anchor_terms(x, &g, &h, &energy);
    if (!std::isfinite(energy) || !g.allFinite()) {
      result.status = EquilibriumStatus::kNonFinite;
      return result;
    }
    result.energy = energy;
    if (iter == 0) result.energy_history.push_back(energy);
    result.residual = g.lpNorm<Eigen::Infinity>();
    result.iterations = iter;
    if (result.residual < tolerance_) {
      result.converged = true;
      result.status = EquilibriumStatus::kConverged;
      return result;
    }
    if (iter == options_.max_iterations) {
      result.status = EquilibriumStatus::kMaxIterations;
      return result;
    }

    if (!analyzed_) {
      llt_.analyzePattern(h);
      analyzed_ = true;
    }
    // Newton on the exact Hessian. Where it is mildly indefinite (buckling,
    // residual stress) a Levenberg shift is added, remembered across
    // iterations and relaxed after each success. Far from equilibrium, e.g. a
    // sheet compressed to half its target size, the needed shift is large and
    // the shifted steps drift into collapsed triangles, so the per-stencil
    // projected Hessian is used instead. Steps that only pass Armijo after
    // heavy backtracking are retried with a larger shift, which bends them
    // toward the gradient.
    double diag_mean = h.diagonal().cwiseAbs().mean();
    double shift = levenberg * diag_mean;
    auto factorize = [&](double min_shift) {
      shift = std::max(shift, min_shift * diag_mean);
      for (int attempt = 0;; ++attempt) {
        llt_.setShift(shift);
        llt_.factorize(h);
        if (llt_.info() == Eigen::Success) return;  // Cholesky succeeds only when definite
        if (attempt == 40) throw Error("equilibrium", "singular stiffness: anchors do not remove the rigid motions");
        shift = shift == 0.0 ? 1e-8 * diag_mean : shift * 4.0;
      }
    };
    factorize(0.0);
    const double exact_shift = shift / diag_mean;
    if (exact_shift > kMaxShift) {
      elastic_.evaluate(x, targets, mat_, nullptr, &h, true);
      add_anchor_terms(x, nullptr, &h, nullptr);
      diag_mean = h.diagonal().mean();
      shift = 0.0;
      factorize(0.0);
    }

    constexpr int kRetries = 6;
    constexpr double kMinUnretriedStep = 1.0 / 1024.0;
    bool accepted = false;
    Eigen::Matrix3Xd fallback;
    double fallback_energy = kInf;
    Eigen::VectorXd step, first_step;
    for (int retry = 0; retry <= kRetries && !accepted; ++retry) {
      if (retry > 0) factorize(std::max(1e-6, 100.0 * shift / diag_mean));
      step = -llt_.solve(g);
      double slope = g.dot(step);
      if (!(slope < 0.0)) {
        step = -g;
        slope = -g.squaredNorm();
      }
      if (retry == 0) first_step = step;
      const Eigen::Map<const Eigen::Matrix3Xd> dx(step.data(), 3, x.cols());
      double alpha = 1.0;
      for (int k = 0; k < options_.max_backtracks; ++k, alpha *= 0.5) {
        const Eigen::Matrix3Xd trial = x + alpha * dx;
        const double e = total_energy(targets, trial);
        if (e <= energy + options_.armijo * alpha * slope) {
          if (alpha >= kMinUnretriedStep || retry == kRetries) {
            x = trial;
            result.energy_history.push_back(e);
            accepted = true;
          } else if (e < fallback_energy) {
            fallback = trial;
            fallback_energy = e;
          }
          break;
        }
      }
    }
    if (!accepted && std::isfinite(fallback_energy)) {
      x = fallback;
      result.energy_history.push_back(fallback_energy);
      accepted = true;
    }
    if (!accepted) {
      // Near convergence the energy decrease drowns in roundoff; take the
      // first full step if it clearly reduces the force instead.
      const Eigen::Matrix3Xd trial = x + Eigen::Map<const Eigen::Matrix3Xd>(first_step.data(), 3, x.cols());
      const double e = total_energy(targets, trial);
      if (std::isfinite(e) && std::abs(e - energy) <= 1e-10 * std::abs(energy) &&
          net_force(targets, trial).lpNorm<Eigen::Infinity>() < 0.5 * result.residual) {
        x = trial;
        result.energy_history.push_back(e);
      } else {
        result.status = EquilibriumStatus::kLineSearchFailure;
        return result;
      }
    }
    levenberg = 0.25 * (exact_shift > kMaxShift ? exact_shift : shift / diag_mean);
  }
}

EquilibriumResult solve_equilibrium(const TriangleMesh& mesh, const std::vector<FundamentalFormPair>& targets,
                                    const AnchorSet& anchors, const MaterialParams& mat,
                                    const Eigen::Matrix3Xd& warm_start, EquilibriumOptions options) {
  return EquilibriumSolver(mesh, anchors, mat, options).solve(targets, warm_start);
}

EquilibriumResult solve_equilibrium(const TriangleMesh& mesh, const PlasticTargets& targets, const AnchorSet& anchors,
                                    const MaterialParams& mat, const Eigen::Matrix3Xd& warm_start,
                                    EquilibriumOptions options) {
  return solve_equilibrium(mesh, targets.forms, anchors, mat, warm_start, options);
}

}  // namespace plastic_shell
