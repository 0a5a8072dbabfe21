#pragma once

// RunConfig: one JSON document per problem, validated strictly.

#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "montecarlo.hpp"
#include "odecore.hpp"

namespace odstop {

using json = nlohmann::json;

struct GridConfig {
  std::size_t n_nodes = 2001;
  TruncPolicy trunc;
};

struct OutputConfig {
  std::string dir = "out";
  bool csv = true;
  bool json = true;
};

struct RunConfig {
  ProblemSpec problem;
  GridConfig grid;
  SolveOptions solve;
  mc::SimConfig sim;
  std::optional<double> x0;
  OutputConfig outputs;
};

namespace detail {

[[noreturn]] inline void config_fail(const std::string& what) {
  throw ValidationError(ValidationError::Kind::InvalidConfig, 0.0, 0.0, "config: " + what);
}

inline void reject_unknown(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) config_fail(where + " must be an object");
  std::set<std::string> ok(keys.begin(), keys.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key())) config_fail("unknown key '" + it.key() + "' in " + where);
}

/// Numbers, or "inf"/"-inf" strings; null means the given default.
inline double number(const json& j, const std::string& where, double dflt = 0.0) {
  if (j.is_null()) return dflt;
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    auto s = j.get<std::string>();
    if (s == "inf" || s == "+inf") return kInf;
    if (s == "-inf") return -kInf;
  }
  config_fail(where + " must be a number");
}

inline std::string text(const json& j, const std::string& where) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number()) {
    std::ostringstream os;
    os.precision(17);
    os << j.get<double>();
    return os.str();
  }
  config_fail(where + " must be an expression string");
}

inline BoundaryKind boundary(const json& j, const std::string& where) {
  if (!j.is_string()) config_fail(where + " must be a string");
  auto s = j.get<std::string>();
  if (s == "inaccessible") return BoundaryKind::Inaccessible;
  if (s == "absorbing") return BoundaryKind::Absorbing;
  config_fail(where + " must be 'inaccessible' or 'absorbing'");
}

}  // namespace detail

inline RunConfig parse_config(const json& j) {
  using namespace detail;
  reject_unknown(j, "config", {"problem", "grid", "solve", "sim", "outputs"});
  RunConfig c;
  if (!j.contains("problem")) config_fail("missing 'problem'");
  const json& p = j.at("problem");
  reject_unknown(p, "problem",
                 {"alpha", "beta", "left", "right", "b", "sigma", "r", "f", "breakpoints", "f_alpha", "f_beta",
                  "r_floor", "constants", "probe_window"});
  auto& ps = c.problem;
  if (p.contains("alpha")) ps.alpha = number(p["alpha"], "problem.alpha", -kInf);
  if (p.contains("beta")) ps.beta = number(p["beta"], "problem.beta", kInf);
  if (p.contains("left")) ps.left = boundary(p["left"], "problem.left");
  if (p.contains("right")) ps.right = boundary(p["right"], "problem.right");
  if (p.contains("b")) ps.b = text(p["b"], "problem.b");
  if (p.contains("sigma")) ps.sigma = text(p["sigma"], "problem.sigma");
  if (p.contains("r")) ps.r = text(p["r"], "problem.r");
  if (!p.contains("f")) config_fail("missing 'problem.f'");
  ps.f = text(p["f"], "problem.f");
  if (p.contains("breakpoints")) {
    if (!p["breakpoints"].is_array()) config_fail("problem.breakpoints must be an array");
    for (const auto& v : p["breakpoints"]) ps.breakpoints.push_back(number(v, "problem.breakpoints"));
  }
  if (p.contains("f_alpha") && !p["f_alpha"].is_null()) ps.f_alpha = number(p["f_alpha"], "problem.f_alpha");
  if (p.contains("f_beta") && !p["f_beta"].is_null()) ps.f_beta = number(p["f_beta"], "problem.f_beta");
  if (p.contains("r_floor") && !p["r_floor"].is_null()) ps.r_floor = number(p["r_floor"], "problem.r_floor");
  if (p.contains("constants")) {
    if (!p["constants"].is_object()) config_fail("problem.constants must be an object");
    for (auto it = p["constants"].begin(); it != p["constants"].end(); ++it)
      ps.constants[it.key()] = number(it.value(), "problem.constants." + it.key());
  }
  if (p.contains("probe_window") && !p["probe_window"].is_null()) {
    const auto& w = p["probe_window"];
    if (!w.is_array() || w.size() != 2) config_fail("problem.probe_window must be [lo, hi]");
    ps.probe_window = std::make_pair(number(w[0], "probe_window"), number(w[1], "probe_window"));
  }

  if (j.contains("grid")) {
    const json& g = j["grid"];
    reject_unknown(g, "grid", {"n_nodes", "trunc", "tail_tol", "spacing", "ref_point"});
    if (g.contains("n_nodes")) {
      if (!g["n_nodes"].is_number_integer() || g["n_nodes"].get<long long>() < 5)
        config_fail("grid.n_nodes must be an integer >= 5");
      c.grid.n_nodes = g["n_nodes"].get<std::size_t>();
    }
    if (g.contains("trunc")) {
      const auto& t = g["trunc"];
      if (t.is_string()) {
        if (t.get<std::string>() != "auto") config_fail("grid.trunc must be 'auto' or {lo, hi}");
      } else {
        reject_unknown(t, "grid.trunc", {"lo", "hi"});
        if (!t.contains("lo") || !t.contains("hi")) config_fail("grid.trunc needs lo and hi");
        c.grid.trunc.bounds = std::make_pair(number(t["lo"], "grid.trunc.lo"), number(t["hi"], "grid.trunc.hi"));
      }
    }
    if (g.contains("tail_tol")) c.grid.trunc.tail_tol = number(g["tail_tol"], "grid.tail_tol");
    if (g.contains("spacing")) {
      auto s = g["spacing"].is_string() ? g["spacing"].get<std::string>() : "";
      if (s == "uniform") c.grid.trunc.spacing = Spacing::Uniform;
      else if (s == "log") c.grid.trunc.spacing = Spacing::Log;
      else config_fail("grid.spacing must be 'uniform' or 'log'");
    }
    if (g.contains("ref_point") && !g["ref_point"].is_null())
      c.grid.trunc.ref_point = number(g["ref_point"], "grid.ref_point");
  }

  if (j.contains("solve")) {
    const json& s = j["solve"];
    reject_unknown(s, "solve", {"tol_contact"});
    if (s.contains("tol_contact")) c.solve.tol_contact = number(s["tol_contact"], "solve.tol_contact");
  }

  if (j.contains("sim")) {
    const json& s = j["sim"];
    reject_unknown(s, "sim",
                   {"dt", "n_paths", "seed", "max_time", "bridge_correction", "antithetic", "threads", "x0"});
    if (s.contains("dt")) c.sim.dt = number(s["dt"], "sim.dt");
    if (s.contains("n_paths")) {
      if (!s["n_paths"].is_number_integer() || s["n_paths"].get<long long>() < 1)
        config_fail("sim.n_paths must be a positive integer");
      c.sim.n_paths = s["n_paths"].get<std::size_t>();
    }
    if (s.contains("seed")) {
      if (!s["seed"].is_number_integer()) config_fail("sim.seed must be an integer");
      c.sim.seed = s["seed"].get<std::uint64_t>();
    }
    if (s.contains("max_time")) c.sim.max_time = number(s["max_time"], "sim.max_time");
    if (s.contains("bridge_correction")) {
      if (!s["bridge_correction"].is_boolean()) config_fail("sim.bridge_correction must be a boolean");
      c.sim.bridge_correction = s["bridge_correction"].get<bool>();
    }
    if (s.contains("antithetic")) {
      if (!s["antithetic"].is_boolean()) config_fail("sim.antithetic must be a boolean");
      c.sim.antithetic = s["antithetic"].get<bool>();
    }
    if (s.contains("threads")) {
      if (!s["threads"].is_number_integer() || s["threads"].get<long long>() < 0)
        config_fail("sim.threads must be a non-negative integer");
      c.sim.threads = s["threads"].get<unsigned>();
    }
    if (s.contains("x0") && !s["x0"].is_null()) c.x0 = number(s["x0"], "sim.x0");
    if (!(c.sim.dt > 0.0)) config_fail("sim.dt must be positive");
    if (!(c.sim.max_time > 0.0)) config_fail("sim.max_time must be positive");
  }

  if (j.contains("outputs")) {
    const json& o = j["outputs"];
    reject_unknown(o, "outputs", {"dir", "formats"});
    if (o.contains("dir")) {
      if (!o["dir"].is_string()) config_fail("outputs.dir must be a string");
      c.outputs.dir = o["dir"].get<std::string>();
    }
    if (o.contains("formats")) {
      if (!o["formats"].is_array()) config_fail("outputs.formats must be an array");
      c.outputs.csv = c.outputs.json = false;
      for (const auto& f : o["formats"]) {
        auto s = f.is_string() ? f.get<std::string>() : "";
        if (s == "csv") c.outputs.csv = true;
        else if (s == "json") c.outputs.json = true;
        else config_fail("outputs.formats entries must be 'csv' or 'json'");
      }
    }
  }
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(ValidationError::Kind::InvalidConfig, 0, 0, "cannot read config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(ValidationError::Kind::InvalidConfig, 0, 0, std::string("config is not JSON: ") + e.what());
  }
  return parse_config(j);
}

}  // namespace odstop
