#include "plastic_shell/job.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

namespace plastic_shell {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::string strip_comment(const std::string& line) { return trim(line.substr(0, line.find('#'))); }

double parse_double(const std::string& text, const std::string& where) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || *end != '\0' || errno == ERANGE || !std::isfinite(v))
    throw Error("config", where + ": expected a number, got '" + text + "'");
  return v;
}

int parse_int(const std::string& text, const std::string& where) {
  errno = 0;
  char* end = nullptr;
  const long v = std::strtol(text.c_str(), &end, 10);
  if (text.empty() || *end != '\0' || errno == ERANGE || v < INT32_MIN || v > INT32_MAX)
    throw Error("config", where + ": expected an integer, got '" + text + "'");
  return static_cast<int>(v);
}

std::filesystem::path existing(const std::filesystem::path& base, const std::string& value, const std::string& where) {
  std::filesystem::path p(value);
  if (p.is_relative()) p = base / p;
  if (!std::filesystem::exists(p)) throw Error("config", where + ": file not found: " + p.string());
  return p;
}

// Each data line of a constraint file: vertex index and optional 3 coordinates.
struct ConstraintLine {
  int line = 0;
  int vertex = 0;
  std::optional<Vec3d> target;
};

std::vector<ConstraintLine> read_constraint_file(const std::filesystem::path& path, bool target_required) {
  std::ifstream in(path);
  if (!in) throw Error("config", "cannot open " + path.string());
  std::vector<ConstraintLine> lines;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = strip_comment(raw);
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    std::istringstream ss(line);
    std::vector<std::string> tokens;
    for (std::string tok; ss >> tok;) tokens.push_back(tok);
    if (!(tokens.size() == 4 || (!target_required && tokens.size() == 1)))
      throw Error("config", where + ": expected 'index x y z'", line_no);
    ConstraintLine c;
    c.line = line_no;
    c.vertex = parse_int(tokens[0], where);
    if (tokens.size() == 4)
      c.target = Vec3d(parse_double(tokens[1], where), parse_double(tokens[2], where), parse_double(tokens[3], where));
    lines.push_back(c);
  }
  std::set<int> seen;
  for (const auto& c : lines)
    if (!seen.insert(c.vertex).second)
      throw Error("config",
                  path.string() + ":" + std::to_string(c.line) + ": duplicate vertex index " + std::to_string(c.vertex),
                  c.line);
  return lines;
}

void check_range(const std::filesystem::path& path, const ConstraintLine& c, int num_vertices) {
  if (c.vertex < 0 || (num_vertices >= 0 && c.vertex >= num_vertices))
    throw Error("config",
                path.string() + ":" + std::to_string(c.line) + ": vertex index " + std::to_string(c.vertex) +
                    " out of range",
                c.line);
}

}  // namespace

MaterialParams JobConfig::material_for(const TriangleMesh& mesh) const {
  MaterialParams mat = MaterialParams::defaults_for(mesh);
  if (thickness) mat.thickness = *thickness;
  if (youngs_modulus) mat.youngs_modulus = *youngs_modulus;
  if (poisson_ratio) mat.poisson_ratio = *poisson_ratio;
  mat.validate();
  return mat;
}

JobConfig parse_job_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("config", "cannot open config " + path.string());
  const std::filesystem::path base = path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path();
  JobConfig job;
  bool have_mesh = false, have_landmarks = false;
  std::set<std::string> seen;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = strip_comment(raw);
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error("config", where + ": expected 'key = value'", line_no);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) throw Error("config", where + ": repeated key '" + key + "'", line_no);
    if (key == "mesh") {
      job.mesh = existing(base, value, where);
      have_mesh = true;
    } else if (key == "landmarks") {
      job.landmarks = existing(base, value, where);
      have_landmarks = true;
    } else if (key == "anchors") {
      job.anchors = existing(base, value, where);
    } else if (key == "h") {
      job.thickness = parse_double(value, where);
    } else if (key == "E") {
      job.youngs_modulus = parse_double(value, where);
    } else if (key == "nu") {
      job.poisson_ratio = parse_double(value, where);
    } else if (key == "alpha") {
      job.optimizer.alpha = parse_double(value, where);
    } else if (key == "beta") {
      job.optimizer.beta = parse_double(value, where);
    } else if (key == "lambda_theta") {
      job.optimizer.lambda_theta = parse_double(value, where);
    } else if (key == "lambda_s") {
      job.optimizer.lambda_s = parse_double(value, where);
    } else if (key == "max_iter") {
      job.optimizer.max_iterations = parse_int(value, where);
    } else if (key == "stop_eps") {
      job.optimizer.stop_eps = parse_double(value, where);
    } else if (key == "output_dir") {
      job.output_dir = std::filesystem::path(value).is_relative() ? base / value : std::filesystem::path(value);
    } else if (key == "snapshot_every") {
      job.snapshot_every = parse_int(value, where);
      if (job.snapshot_every < 0) throw Error("config", where + ": snapshot_every must be non-negative", line_no);
    } else if (key == "field_format") {
      if (value != "text" && value != "bin") throw Error("config", where + ": field_format must be text or bin", line_no);
      job.field_format = value;
    } else {
      throw Error("config", where + ": unknown key '" + key + "'", line_no);
    }
  }
  if (!have_mesh) throw Error("config", path.string() + ": missing required key 'mesh'");
  if (!have_landmarks) throw Error("config", path.string() + ": missing required key 'landmarks'");
  job.optimizer.validate();
  MaterialParams probe;
  if (job.thickness) probe.thickness = *job.thickness;
  if (job.youngs_modulus) probe.youngs_modulus = *job.youngs_modulus;
  if (job.poisson_ratio) probe.poisson_ratio = *job.poisson_ratio;
  probe.validate();
  return job;
}

LandmarkSet parse_landmarks(const std::filesystem::path& path, int num_vertices) {
  LandmarkSet set;
  for (const auto& c : read_constraint_file(path, true)) {
    check_range(path, c, num_vertices);
    set.add(c.vertex, *c.target);
  }
  return set;
}

AnchorSet parse_anchors(const std::filesystem::path& path, const TriangleMesh& mesh) {
  AnchorSet set;
  for (const auto& c : read_constraint_file(path, false)) {
    check_range(path, c, mesh.num_vertices());
    set.add(c.vertex, c.target.value_or(Vec3d(mesh.rest_positions().col(c.vertex))));
  }
  return set;
}

void write_report(const IterationTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot write report " + path.string());
  out << "iteration,objective,eps_land_max,eps_land_mean,dp_norm,eta,inner_iterations,probes,seconds\n";
  out << std::setprecision(17);
  for (const auto& r : trace)
    out << r.iteration << ',' << r.objective << ',' << r.eps_land_max << ',' << r.eps_land_mean << ',' << r.dp_norm
        << ',' << r.eta << ',' << r.inner_iterations << ',' << r.probes << ',' << std::setprecision(6) << r.seconds
        << std::setprecision(17) << '\n';
  if (!out) throw Error("io", "failed writing report " + path.string());
}

JobSummary run_job(const JobConfig& job, std::ostream* log) {
  const TriangleMesh mesh = load_obj(job.mesh);
  const LandmarkSet landmarks = parse_landmarks(job.landmarks, mesh.num_vertices());
  const AnchorSet anchors = job.anchors ? parse_anchors(*job.anchors, mesh) : pick_default_anchors(landmarks, mesh);
  const MaterialParams mat = job.material_for(mesh);

  std::error_code ec;
  std::filesystem::create_directories(job.output_dir, ec);
  if (ec) throw Error("io", "cannot create output directory " + job.output_dir.string() + ": " + ec.message());

  const bool snapshots = job.snapshot_every > 0;
  TriangleMesh snapshot_mesh = mesh;
  auto snapshot_path = [&](int iteration) {
    char name[32];
    std::snprintf(name, sizeof name, "iter_%03d.obj", iteration);
    return job.output_dir / name;
  };

  JobSummary summary;
  summary.result = optimize(mesh, landmarks, anchors, mat, job.optimizer, [&](const IterationRecord& r) {
    if (log)
      *log << "iteration " << r.iteration << ": objective " << r.objective << ", eps_land " << r.eps_land_max
           << ", eta " << r.eta << ", " << r.seconds << " s\n";
  });
  if (snapshots)
    for (const auto& snap : summary.result.history)
      if (snap.iteration % job.snapshot_every == 0) {
        snapshot_mesh.set_current_positions(snap.positions);
        save_obj(snapshot_mesh, snapshot_path(snap.iteration));
      }

  summary.final_mesh = job.output_dir / "final.obj";
  summary.report = job.output_dir / "report.csv";
  summary.field = job.output_dir / (job.field_format == "bin" ? "plastic_field.bin" : "plastic_field.txt");
  save_obj(summary.result.mesh, summary.final_mesh);
  write_report(summary.result.trace, summary.report);
  save_plastic_field(summary.result.history.back().field, summary.field);
  if (log) *log << "stopped: " << summary.result.stop_reason << '\n';
  return summary;
}

bool check_gradients(const TriangleMesh& mesh, std::ostream& out, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double diag = bbox_diagonal(mesh.rest_positions());
  const MaterialParams mat = MaterialParams::defaults_for(mesh);
  const ElasticModel model(mesh);
  const PlasticityModel plasticity(mesh);
  const int n = mesh.num_vertices();
  const int m = mesh.num_triangles();
  bool all = true;
  auto report = [&](const std::string& name, double err, double limit) {
    const bool ok = err < limit;
    all = all && ok;
    out << (ok ? "[pass] " : "[FAIL] ") << name << ": relative error " << std::scientific << std::setprecision(3)
        << err << " (limit " << limit << ")\n"
        << std::defaultfloat;
  };

  // Sample at most this many coordinates per finite-difference check.
  const int max_columns = 240;
  std::vector<int> dofs(3 * n);
  for (int k = 0; k < 3 * n; ++k) dofs[k] = k;
  std::shuffle(dofs.begin(), dofs.end(), rng);
  dofs.resize(std::min<std::size_t>(dofs.size(), max_columns));

  PlasticStrainField field = PlasticStrainField::identity(m);
  for (int t = 0; t < m; ++t) {
    field.theta(t) = 0.05 * Vec3d(unit(rng), unit(rng), unit(rng));
    field.s(t) += 0.05 * Vec3d(unit(rng), unit(rng), unit(rng));
  }
  const PlasticTargets targets = plasticity.build_targets(field);

  {
    Eigen::Matrix3Xd x = mesh.rest_positions();
    for (int v = 0; v < n; ++v) x.col(v) += 0.01 * diag * Vec3d(unit(rng), unit(rng), unit(rng));
    Eigen::VectorXd g;
    model.evaluate(x, targets.forms, mat, &g, nullptr);
    const double step = 1e-6 * diag;
    double err = 0.0;
    for (int k : dofs) {
      Eigen::Matrix3Xd xp = x, xm = x;
      flat(xp)(k) += step;
      flat(xm)(k) -= step;
      const double fd = (model.evaluate(xp, targets.forms, mat, nullptr, nullptr) -
                         model.evaluate(xm, targets.forms, mat, nullptr, nullptr)) /
                        (2.0 * step);
      err = std::max(err, std::abs(fd - g(k)));
    }
    report("elastic force vs central differences", err / g.lpNorm<Eigen::Infinity>(), 1e-5);
  }

  {
    const PlasticTargets rest = plasticity.build_targets(PlasticStrainField::identity(m));
    Eigen::Matrix3Xd x = mesh.rest_positions();
    for (int v = 0; v < n; ++v) x.col(v) += 1e-5 * diag * Vec3d(unit(rng), unit(rng), unit(rng));
    Eigen::SparseMatrix<double> h = model.pattern();
    model.evaluate(x, rest.forms, mat, nullptr, &h);
    const Eigen::MatrixXd dense(h);
    const double step = 1e-6 * diag;
    double num = 0.0, den = 0.0;
    for (int k : dofs) {
      Eigen::Matrix3Xd xp = x, xm = x;
      flat(xp)(k) += step;
      flat(xm)(k) -= step;
      Eigen::VectorXd gp, gm;
      model.evaluate(xp, rest.forms, mat, &gp, nullptr);
      model.evaluate(xm, rest.forms, mat, &gm, nullptr);
      const Eigen::VectorXd col = (gp - gm) / (2.0 * step);
      num += (col - dense.col(k)).squaredNorm();
      den += col.squaredNorm();
    }
    report("projected Hessian near rest vs differenced force", std::sqrt(num / den), 0.05);
  }

  {
    double err = 0.0, scale = 0.0;
    const double step = 1e-6;
    const int samples = std::min(m, 64);
    for (int q = 0; q < samples; ++q) {
      const int t = static_cast<int>(rng() % m);
      const Eigen::Matrix<double, 6, 15> jac = plasticity.target_jacobian(t, field);
      const LocalRestGeometry& g = plasticity.local(t);
      auto forms_at = [&](const Eigen::Matrix<double, 15, 1>& v) {
        std::array<Vec3d, 3> nbr = {Vec3d(v.segment<3>(6)), Vec3d(v.segment<3>(9)), Vec3d(v.segment<3>(12))};
        const FundamentalFormPair f = local_plastic_forms<double>(g, v.head<3>(), v.segment<3>(3), nbr);
        Vec6d packed;
        packed << pack_sym(f.a), pack_sym(f.b);
        return packed;
      };
      Eigen::Matrix<double, 15, 1> v;
      v << field.theta(t), field.s(t), Vec3d::Zero(), Vec3d::Zero(), Vec3d::Zero();
      for (int i = 0; i < 3; ++i)
        if (g.neighbour[i] != kNone) v.segment<3>(6 + 3 * i) = field.theta(g.neighbour[i]);
      for (int c = 0; c < 15; ++c) {
        if (c >= 6 && g.neighbour[(c - 6) / 3] == kNone) continue;
        Eigen::Matrix<double, 15, 1> vp = v, vm = v;
        vp(c) += step;
        vm(c) -= step;
        const Vec6d fd = (forms_at(vp) - forms_at(vm)) / (2.0 * step);
        err = std::max(err, (fd - jac.col(c)).lpNorm<Eigen::Infinity>());
        scale = std::max(scale, jac.col(c).lpNorm<Eigen::Infinity>());
      }
    }
    report("plastic target Jacobian vs central differences", err / std::max(scale, 1e-300), 1e-6);
  }
  return all;
}

}  // namespace plastic_shell
