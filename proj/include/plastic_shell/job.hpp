#pragma once

#include "plastic_shell/equilibrium.hpp"
#include "plastic_shell/mesh.hpp"
#include "plastic_shell/optimizer.hpp"
#include "plastic_shell/shell_energy.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace plastic_shell {

/// A deformation job read from a flat `key = value` file; `#` starts a
/// comment. Relative paths resolve against the config file's directory.
///
///   mesh, landmarks          required input paths
///   anchors                  optional anchor file
///   h, E, nu                 material overrides
///   alpha, beta, lambda_theta, lambda_s, max_iter, stop_eps
///   output_dir               defaults to "output"
///   snapshot_every           write iter_%03d.obj every k iterations (0 = never)
///   field_format             "text" (default) or "bin" for the plastic field checkpoint
struct JobConfig {
  std::filesystem::path mesh;
  std::filesystem::path landmarks;
  std::optional<std::filesystem::path> anchors;
  std::optional<double> thickness;
  std::optional<double> youngs_modulus;
  std::optional<double> poisson_ratio;
  OptimizerConfig optimizer;
  std::filesystem::path output_dir = "output";
  int snapshot_every = 1;
  std::string field_format = "text";

  MaterialParams material_for(const TriangleMesh& mesh) const;
};

JobConfig parse_job_config(const std::filesystem::path& path);

/// Lines `index tx ty tz` with 0-based indices; blank lines and `#` comments
/// are skipped. num_vertices < 0 skips the range check.
LandmarkSet parse_landmarks(const std::filesystem::path& path, int num_vertices = -1);

/// Lines `index` (anchored at its rest position) or `index x y z`.
AnchorSet parse_anchors(const std::filesystem::path& path, const TriangleMesh& mesh);

void write_report(const IterationTrace& trace, const std::filesystem::path& path);

struct JobSummary {
  OptimizeResult result;
  std::filesystem::path final_mesh;
  std::filesystem::path report;
  std::filesystem::path field;
};

/// Runs a job end to end, writing final.obj, snapshots, the plastic field
/// checkpoint and report.csv into the output directory. Progress lines go to `log`.
JobSummary run_job(const JobConfig& job, std::ostream* log = nullptr);

/// Finite-difference checks of the elastic force, the projected Hessian near
/// rest and the plastic target Jacobian. Prints one line per check; returns
/// true when all pass.
bool check_gradients(const TriangleMesh& mesh, std::ostream& out, unsigned seed = 1);

}  // namespace plastic_shell
