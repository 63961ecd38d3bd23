#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "kepreg/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Periodic solutions of the forced Kepler problem in regularized coordinates"};
  app.require_subcommand(1, 1);

  std::string config;
  std::string out;
  int jobs = 0;
  const std::map<std::string, std::string> help{
      {"seed", "sample seeds on the periodic manifolds"},
      {"flow", "integrate the regularized flow from seeds"},
      {"shoot", "find closed orbits by multiple shooting"},
      {"theorem-demo", "continue one orbit per manifold and check distinctness"},
      {"certify", "non-degeneracy certificates for random seeds"},
      {"reconstruct", "shoot, then rebuild physical-time solutions"},
      {"average", "periodic family bifurcating from infinity"},
      {"remove-collisions", "deform a collision orbit into collisionless ones"},
  };
  for (const auto& name : kepreg::command_names()) {
    auto* sub = app.add_subcommand(name, help.count(name) ? help.at(name) : "");
    sub->add_option("--config", config, "INI configuration file")->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory (overrides run.output)");
    sub->add_option("--jobs", jobs, "worker threads (overrides run.jobs)")->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return e.get_exit_code() == 0 ? 0 : (rc == 0 ? 0 : kepreg::kExitConfig);
  }
  const std::string name = app.get_subcommands().front()->get_name();
  return kepreg::run_cli(name, config, out, jobs, std::cerr);
}
