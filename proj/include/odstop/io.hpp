#pragma once

// CSV / JSON emission and the canonical JSON form used by golden files.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>

#include "config.hpp"

namespace odstop {

/// Number as JSON: finite values as numbers, infinities as "inf"/"-inf".
inline json num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

inline void write_value_csv(const ValueSolution& sol, const FundamentalPair& fp, std::ostream& os) {
  const Grid& g = *sol.grid;
  os << "x,f,f_bar,phi,psi,v,in_stopping_set\n";
  for (std::size_t i = 0; i < g.size(); ++i) {
    os << expr::detail::format_double(g[i]) << ',' << expr::detail::format_double(sol.f[i]) << ','
       << expr::detail::format_double(sol.f_bar.values[i]) << ',' << expr::detail::format_double(fp.phi.values[i])
       << ',' << expr::detail::format_double(fp.psi.values[i]) << ','
       << expr::detail::format_double(sol.v.values[i]) << ',' << (sol.in_stopping_set[i] ? 1 : 0) << '\n';
  }
}

inline json intervals_json(const std::vector<ClosedInterval>& iv) {
  json a = json::array();
  for (const auto& i : iv) a.push_back({num(i.lo), num(i.hi)});
  return a;
}

inline json strategy_intervals_json(const mc::Strategy& s) {
  json a = json::array();
  for (const auto& i : mc::detail::stop_set(s)) a.push_back({num(i.lo), num(i.hi)});
  return a;
}

inline json solution_json(const ValueSolution& sol, const std::string& value_csv = "value.csv") {
  json j;
  j["finite"] = sol.finite;
  j["limA"] = num(sol.limA);
  j["limB"] = num(sol.limB);
  json w = json::array();
  for (const auto& x : sol.waiting) w.push_back({{"c", num(x.c)}, {"d", num(x.d)}, {"A", num(x.A)}, {"B", num(x.B)}});
  j["waiting"] = w;
  j["stopping_set"] = intervals_json(sol.stopping_set);
  j["tau_star_region"] = intervals_json(sol.tau_star_intervals);
  j["tau_star_strategy"] = strategy_intervals_json(mc::tau_star_strategy(sol));
  j["flags"] = {{"cond121", sol.flags.cond121},
                {"cond122", sol.flags.cond122},
                {"usc", sol.flags.usc},
                {"tau_star_optimal", sol.flags.tau_star_optimal}};
  j["warnings"] = sol.flags.warnings;
  j["v"] = value_csv;
  return j;
}

inline json smoothfit_json(const std::vector<SmoothFitPoint>& pts) {
  json a = json::array();
  for (const auto& p : pts)
    a.push_back({{"x", num(p.x)},
                 {"f_plus", num(p.f_plus)},
                 {"v_plus", num(p.v_plus)},
                 {"v_minus", num(p.v_minus)},
                 {"f_minus", num(p.f_minus)},
                 {"skipped", p.skipped},
                 {"ok", p.ok},
                 {"equality", p.equality}});
  return a;
}

inline json estimate_json(const mc::Estimate& e) {
  return {{"mean", num(e.mean)},
          {"std_error", num(e.std_error)},
          {"n_paths", e.n_paths},
          {"n_effective", e.n_effective},
          {"dt", num(e.dt)},
          {"seed", e.seed},
          {"truncation_bound", num(e.truncation_bound)},
          {"warnings", e.warnings}};
}

namespace detail {

inline void canonical(const json& j, std::string& out) {
  char buf[64];
  switch (j.type()) {
    case json::value_t::object: {
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {  // std::map order: keys sorted
        if (!first) out += ',';
        first = false;
        out += json(it.key()).dump();
        out += ':';
        canonical(it.value(), out);
      }
      out += '}';
      break;
    }
    case json::value_t::array: {
      out += '[';
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ',';
        canonical(j[i], out);
      }
      out += ']';
      break;
    }
    case json::value_t::number_float: {
      double v = j.get<double>();
      if (v == 0.0) v = 0.0;  // drop the sign of zero
      std::snprintf(buf, sizeof buf, "%.12g", v);
      out += buf;
      break;
    }
    default:
      out += j.dump();
  }
}

}  // namespace detail

/// Sorted keys, numbers to 12 significant digits, no whitespace.
inline std::string canonical_json(const json& j) {
  std::string s;
  detail::canonical(j, s);
  return s;
}

/// Strategy from JSON: "never" | "immediate" | {"hit": y} | {"two_sided": [lo, hi]} |
/// {"stop_at": [[lo, hi], ...]} | {"base": S, "targets": [{"level": a, "strategy": S}, ...]}.
/// "tau_star" resolves to `tau_star` when given.
inline mc::Strategy strategy_from_json(const json& j, const std::optional<mc::Strategy>& tau_star,
                                       std::vector<std::string>* warnings = nullptr) {
  auto bad = [](const std::string& w) -> mc::Strategy { detail::config_fail("strategy: " + w); };
  if (j.is_string()) {
    auto s = j.get<std::string>();
    if (s == "never") return mc::Never{};
    if (s == "immediate") return mc::Immediate{};
    if (s == "tau_star") {
      if (!tau_star) bad("tau_star needs solve artifacts");
      return *tau_star;
    }
    return bad("unknown strategy '" + s + "'");
  }
  if (!j.is_object()) return bad("expected a string or an object");
  if (j.contains("hit")) return mc::HitLevel{detail::number(j["hit"], "hit")};
  if (j.contains("two_sided")) {
    const auto& a = j["two_sided"];
    if (!a.is_array() || a.size() != 2) return bad("two_sided needs [lo, hi]");
    double lo = detail::number(a[0], "two_sided"), hi = detail::number(a[1], "two_sided");
    if (!(lo < hi)) return bad("two_sided needs lo < hi");
    return mc::TwoSided{lo, hi};
  }
  if (j.contains("stop_at")) {
    mc::StopAtSet s;
    for (const auto& p : j["stop_at"]) {
      if (!p.is_array() || p.size() != 2) return bad("stop_at entries are [lo, hi]");
      s.intervals.push_back({detail::number(p[0], "stop_at"), detail::number(p[1], "stop_at")});
    }
    mc::detail::normalize(s.intervals);
    return s;
  }
  if (j.contains("base")) {
    detail::reject_unknown(j, "pasted strategy", {"base", "targets"});
    auto base = strategy_from_json(j["base"], tau_star, warnings);
    std::map<double, mc::Strategy> t;
    if (j.contains("targets")) {
      for (const auto& e : j["targets"]) {
        if (!e.is_object() || !e.contains("level") || !e.contains("strategy"))
          return bad("targets entries are {level, strategy}");
        double a = detail::number(e["level"], "level");
        if (t.count(a)) return bad("duplicate target level");
        t.emplace(a, strategy_from_json(e["strategy"], tau_star, warnings));
      }
    }
    return mc::paste_strategies(base, t, warnings);
  }
  return bad("unrecognized strategy object");
}

/// Stopping intervals as written in solution.json back into a strategy.
inline mc::Strategy strategy_from_intervals(const json& a) {
  mc::StopAtSet s;
  for (const auto& p : a) s.intervals.push_back({detail::number(p[0], "interval"), detail::number(p[1], "interval")});
  if (s.intervals.empty()) return mc::Never{};
  mc::detail::normalize(s.intervals);
  return s;
}

}  // namespace odstop
