#include "plastic_shell/fixtures.hpp"
#include "plastic_shell/job.hpp"

#include <CLI11.hpp>

#include <exception>
#include <iostream>

namespace ps = plastic_shell;

int main(int argc, char** argv) {
  CLI::App app{"Landmark-driven plastic shell deformation"};
  app.require_subcommand(1);

  std::string config;
  auto* run = app.add_subcommand("run", "Run a deformation job");
  run->add_option("--config", config, "Job config file (key = value)")->required();

  std::string mesh_path;
  unsigned seed = 1;
  auto* check = app.add_subcommand("check-gradients", "Finite-difference checks on a mesh");
  check->add_option("--mesh", mesh_path, "OBJ mesh")->required();
  check->add_option("--seed", seed, "Random seed");

  std::string kind, out_path;
  int res_a = 10, res_b = 10, level = 3;
  auto* fixture = app.add_subcommand("make-fixture", "Write a benchmark mesh");
  fixture->add_option("--kind", kind, "plane | sphere | cylinder | torus | disk")
      ->required()
      ->check(CLI::IsMember({"plane", "sphere", "cylinder", "torus", "disk"}));
  fixture->add_option("--out", out_path, "Output OBJ path")->required();
  fixture->add_option("--res-a", res_a, "First resolution (grid nx, segments around, rings)");
  fixture->add_option("--res-b", res_b, "Second resolution (grid ny, segments along)");
  fixture->add_option("--level", level, "Sphere subdivision level");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error[cli]: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*run) {
      const ps::JobSummary summary = ps::run_job(ps::parse_job_config(config), &std::cout);
      std::cout << "wrote " << summary.final_mesh.string() << '\n';
      return 0;
    }
    if (*check) return ps::check_gradients(ps::load_obj(mesh_path), std::cout, seed) ? 0 : 1;
    if (*fixture) {
      ps::TriangleMesh mesh;
      if (kind == "plane") mesh = ps::plane_grid(res_a, res_b);
      else if (kind == "sphere") mesh = ps::icosphere(level);
      else if (kind == "cylinder") mesh = ps::cylinder(res_a, res_b);
      else if (kind == "torus") mesh = ps::torus(res_a, res_b);
      else mesh = ps::disk(res_a, res_b);
      ps::save_obj(mesh, out_path);
      return 0;
    }
  } catch (const ps::Error& e) {
    std::cerr << "error[" << e.stage() << "]: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
