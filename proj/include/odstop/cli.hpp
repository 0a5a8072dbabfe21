#pragma once

// Command implementations behind the `odstop` executable.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "io.hpp"

namespace odstop::cli {

enum ExitCode : int { Ok = 0, Other = 1, Validation = 2, Infinite = 3, MissingArtifacts = 4 };

struct SolveArtifacts {
  DiffusionProblem problem;
  FundamentalPair fp;
  ValueSolution sol;
};

inline SolveArtifacts run_solve(const RunConfig& cfg) {
  SolveArtifacts a;
  a.problem = build_problem(cfg.problem);
  auto g = build_grid(a.problem, cfg.grid.n_nodes, cfg.grid.trunc);
  a.fp = fundamental_pair(a.problem, g);
  a.sol = solve(a.problem, a.fp, Reward::from_problem(a.problem), cfg.solve);
  return a;
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out << s;
}

inline int cmd_solve(const std::string& config_path, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  try {
    RunConfig cfg = load_config(config_path);
    std::filesystem::path dir(cfg.outputs.dir);
    std::filesystem::create_directories(dir);
    SolveArtifacts a;
    try {
      a = run_solve(cfg);
    } catch (const InfiniteValue& e) {
      if (cfg.outputs.json)
        write_text(dir / "solution.json",
                   json{{"finite", false}, {"limA", num(e.limA())}, {"limB", num(e.limB())}}.dump(2) + "\n");
      err << "odstop: infinite value function (limA=" << e.limA() << ", limB=" << e.limB() << ")\n";
      return Infinite;
    }
    const Reward rew = Reward::from_problem(a.problem);
    if (cfg.outputs.csv) {
      std::ofstream v(dir / "value.csv", std::ios::binary);
      write_value_csv(a.sol, a.fp, v);
      std::ofstream f(dir / "fundamental.csv", std::ios::binary);
      write_fundamental_csv(a.fp, f);
    }
    if (cfg.outputs.json) {
      write_text(dir / "solution.json", solution_json(a.sol).dump(2) + "\n");
      write_text(dir / "smoothfit.json", smoothfit_json(smooth_fit_report(a.problem, a.fp, rew, a.sol)).dump(2) + "\n");
    }
    for (const auto& w : a.sol.flags.warnings) err << "odstop: warning: " << w << '\n';
    out << "limA=" << a.sol.limA << " limB=" << a.sol.limB << " waiting intervals=" << a.sol.waiting.size()
        << " -> " << dir.string() << '\n';
    return Ok;
  } catch (const ValidationError& e) {
    err << "odstop: validation error: " << e.what() << '\n';
    return Validation;
  } catch (const ExprError& e) {
    err << "odstop: expression error: " << e.what() << '\n';
    return Validation;
  } catch (const std::exception& e) {
    err << "odstop: error: " << e.what() << '\n';
    return Other;
  }
}

struct SimulateArgs {
  std::string strategy = "tau_star";
  std::optional<std::size_t> paths;
  std::optional<double> dt;
  std::optional<std::uint64_t> seed;
  std::optional<double> x0;
};

/// tau_star | never | immediate | two_sided:lo,hi | pasted:file
inline mc::Strategy parse_strategy_arg(const std::string& s, const std::filesystem::path& solve_dir,
                                       std::vector<std::string>* warnings) {
  auto load_tau = [&]() -> std::optional<mc::Strategy> {
    auto p = solve_dir / "solution.json";
    std::ifstream in(p);
    if (!in) return std::nullopt;
    json j = json::parse(in);
    if (!j.contains("tau_star_strategy")) return std::nullopt;
    return strategy_from_intervals(j["tau_star_strategy"]);
  };
  if (s == "tau_star") {
    auto t = load_tau();
    if (!t) throw std::filesystem::filesystem_error("missing solve artifacts", solve_dir / "solution.json",
                                                    std::make_error_code(std::errc::no_such_file_or_directory));
    return *t;
  }
  if (s == "never") return mc::Never{};
  if (s == "immediate") return mc::Immediate{};
  if (s.rfind("two_sided:", 0) == 0) {
    auto rest = s.substr(10);
    auto comma = rest.find(',');
    if (comma == std::string::npos) detail::config_fail("two_sided needs lo,hi");
    double lo = 0, hi = 0;
    try {
      lo = std::stod(rest.substr(0, comma));
      hi = std::stod(rest.substr(comma + 1));
    } catch (const std::exception&) {
      detail::config_fail("two_sided bounds must be numbers");
    }
    if (!(lo < hi)) detail::config_fail("two_sided needs lo < hi");
    return mc::TwoSided{lo, hi};
  }
  if (s.rfind("pasted:", 0) == 0) {
    std::ifstream in(s.substr(7));
    if (!in) detail::config_fail("cannot read pasted strategy file " + s.substr(7));
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      detail::config_fail(std::string("pasted strategy file is not JSON: ") + e.what());
    }
    return strategy_from_json(j, load_tau(), warnings);
  }
  detail::config_fail("unknown strategy '" + s + "'");
}

inline int cmd_simulate(const std::string& config_path, const SimulateArgs& args, std::ostream& out = std::cout,
                        std::ostream& err = std::cerr) {
  try {
    RunConfig cfg = load_config(config_path);
    if (args.paths) cfg.sim.n_paths = *args.paths;
    if (args.dt) cfg.sim.dt = *args.dt;
    if (args.seed) cfg.sim.seed = *args.seed;
    std::optional<double> x0 = args.x0 ? args.x0 : cfg.x0;
    if (!x0) detail::config_fail("starting point missing (sim.x0 or --x0)");
    DiffusionProblem p = build_problem(cfg.problem);
    std::filesystem::path dir(cfg.outputs.dir);
    std::vector<std::string> warnings;
    mc::Strategy strat;
    try {
      strat = parse_strategy_arg(args.strategy, dir, &warnings);
    } catch (const std::filesystem::filesystem_error& e) {
      err << "odstop: " << e.what() << " (run `odstop solve` first)\n";
      return MissingArtifacts;
    }
    auto batch = mc::simulate_paths(p, *x0, cfg.sim);
    auto est = mc::evaluate_strategy(p, batch, strat, Reward::from_problem(p));
    for (auto& w : warnings) est.warnings.push_back(w);
    std::filesystem::create_directories(dir);
    json j = estimate_json(est);
    j["strategy"] = args.strategy;
    j["x0"] = num(*x0);
    write_text(dir / "estimate.json", j.dump(2) + "\n");
    for (const auto& w : est.warnings) err << "odstop: warning: " << w << '\n';
    out.precision(8);
    out << est.mean << " +/- " << 1.96 * est.std_error << '\n';
    return Ok;
  } catch (const ValidationError& e) {
    err << "odstop: validation error: " << e.what() << '\n';
    return Validation;
  } catch (const ExprError& e) {
    err << "odstop: expression error: " << e.what() << '\n';
    return Validation;
  } catch (const std::exception& e) {
    err << "odstop: error: " << e.what() << '\n';
    return Other;
  }
}

}  // namespace odstop::cli
