#include <CLI11.hpp>

#include <odstop/cli.hpp>

int main(int argc, char** argv) {
  CLI::App app{"Optimal stopping of one-dimensional diffusions"};
  app.require_subcommand(1);

  std::string solve_cfg;
  auto* solve = app.add_subcommand("solve", "compute the value function and write value.csv, solution.json");
  solve->add_option("config", solve_cfg, "RunConfig JSON")->required();

  std::string sim_cfg;
  odstop::cli::SimulateArgs args;
  auto* sim = app.add_subcommand("simulate", "Monte Carlo estimate of a stopping strategy");
  sim->add_option("config", sim_cfg, "RunConfig JSON")->required();
  sim->add_option("--strategy", args.strategy, "tau_star | never | immediate | two_sided:lo,hi | pasted:file");
  sim->add_option("--paths", args.paths, "number of paths");
  sim->add_option("--dt", args.dt, "time step");
  sim->add_option("--seed", args.seed, "RNG seed");
  sim->add_option("--x0", args.x0, "starting point (overrides sim.x0)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : odstop::cli::Validation;
  }
  if (*solve) return odstop::cli::cmd_solve(solve_cfg);
  return odstop::cli::cmd_simulate(sim_cfg, args);
}
