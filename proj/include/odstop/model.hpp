#pragma once

// Problem description: coefficients, state interval, reward, and the
// numerical checks of the standing assumptions.

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "expr.hpp"
#include "grid.hpp"

namespace odstop {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Unvalidated problem description, expressions as text.
struct ProblemSpec {
  double alpha = -kInf;
  double beta = kInf;
  BoundaryKind left = BoundaryKind::Inaccessible;
  BoundaryKind right = BoundaryKind::Inaccessible;
  std::string b = "0";
  std::string sigma = "1";
  std::string r = "0.5";
  std::string f = "0";
  std::vector<double> breakpoints;
  std::optional<double> f_alpha;
  std::optional<double> f_beta;
  std::optional<double> r_floor;  // defaults to the sampled minimum of r
  expr::Constants constants;
  /// Window used to probe the assumptions; defaults from the interval.
  std::optional<std::pair<double, double>> probe_window;
};

struct DiffusionProblem {
  double alpha = -kInf;
  double beta = kInf;
  BoundaryKind left = BoundaryKind::Inaccessible;
  BoundaryKind right = BoundaryKind::Inaccessible;
  expr::Expr b, sigma, r, f;
  expr::Compiled cb, csigma, cr, cf;
  expr::Breakpoints breakpoints;
  std::optional<double> f_alpha;
  std::optional<double> f_beta;
  double r_floor = 0.0;
  expr::Constants constants;

  double drift(double x) const { return cb(x); }
  double diffusion(double x) const { return csigma(x); }
  double sigma2(double x) const {
    double s = csigma(x);
    return s * s;
  }
  double rate(double x) const { return cr(x); }
  double reward(double x) const { return cf(x); }

  /// Reward at an absorbing endpoint: the declared value, else the expression.
  double reward_at_alpha() const { return f_alpha ? *f_alpha : f(alpha); }
  double reward_at_beta() const { return f_beta ? *f_beta : f(beta); }

  bool contains(double x) const {
    bool lo = left == BoundaryKind::Absorbing ? x >= alpha : x > alpha;
    bool hi = right == BoundaryKind::Absorbing ? x <= beta : x < beta;
    return lo && hi;
  }
};

namespace detail {

inline std::string fmt_num(double x) {
  std::ostringstream os;
  os.precision(12);
  os << x;
  return os.str();
}

/// Interior probe points used to check the assumptions.
inline std::vector<double> probe_points(const ProblemSpec& spec) {
  double lo, hi;
  if (spec.probe_window) {
    lo = spec.probe_window->first;
    hi = spec.probe_window->second;
  } else {
    double bmin = spec.breakpoints.empty() ? 0.0 : spec.breakpoints.front();
    double bmax = spec.breakpoints.empty() ? 0.0 : spec.breakpoints.back();
    if (std::isfinite(spec.alpha) && std::isfinite(spec.beta)) {
      lo = spec.alpha;
      hi = spec.beta;
    } else if (std::isfinite(spec.alpha)) {
      lo = spec.alpha;
      hi = std::max(spec.alpha + 50.0, bmax + 10.0);
    } else if (std::isfinite(spec.beta)) {
      hi = spec.beta;
      lo = std::min(spec.beta - 50.0, bmin - 10.0);
    } else {
      lo = std::min(-20.0, bmin - 10.0);
      hi = std::max(20.0, bmax + 10.0);
    }
  }
  const int n = 2000;
  std::vector<double> pts;
  pts.reserve(n + 40);
  for (int i = 0; i <= n; ++i) pts.push_back(lo + (hi - lo) * i / n);
  // geometric clusters toward finite endpoints of the window
  for (int k = 1; k <= 8; ++k) {
    double eps = (hi - lo) * std::pow(10.0, -k) * 0.5;
    pts.push_back(lo + eps);
    pts.push_back(hi - eps);
  }
  for (double bp : spec.breakpoints) pts.push_back(bp);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  std::vector<double> inside;
  for (double x : pts)
    if (x > spec.alpha && x < spec.beta) inside.push_back(x);
  return inside;
}

}  // namespace detail

/// Validates the description and returns an immutable problem.
inline DiffusionProblem build_problem(const ProblemSpec& spec) {
  using VE = ValidationError;
  if (!(spec.alpha < spec.beta))
    throw VE(VE::Kind::InvalidInterval, spec.alpha, spec.beta, "interval requires alpha < beta");
  if (spec.left == BoundaryKind::Absorbing && !std::isfinite(spec.alpha))
    throw VE(VE::Kind::InvalidInterval, spec.alpha, spec.alpha, "absorbing endpoint must be finite");
  if (spec.right == BoundaryKind::Absorbing && !std::isfinite(spec.beta))
    throw VE(VE::Kind::InvalidInterval, spec.beta, spec.beta, "absorbing endpoint must be finite");
  for (std::size_t i = 0; i < spec.breakpoints.size(); ++i) {
    double bp = spec.breakpoints[i];
    if (!(bp > spec.alpha && bp < spec.beta) || (i > 0 && !(bp > spec.breakpoints[i - 1])))
      throw VE(VE::Kind::InvalidBreakpoints, bp, bp,
               "breakpoints must be strictly increasing and inside the state interval");
  }

  DiffusionProblem p;
  p.alpha = spec.alpha;
  p.beta = spec.beta;
  p.left = spec.left;
  p.right = spec.right;
  p.constants = spec.constants;
  p.b = expr::parse(spec.b, spec.constants);
  p.sigma = expr::parse(spec.sigma, spec.constants);
  p.r = expr::parse(spec.r, spec.constants);
  p.f = expr::parse(spec.f, spec.constants);
  p.cb = expr::Compiled(p.b);
  p.csigma = expr::Compiled(p.sigma);
  p.cr = expr::Compiled(p.r);
  p.cf = expr::Compiled(p.f);
  p.breakpoints = spec.breakpoints;
  p.f_alpha = spec.f_alpha;
  p.f_beta = spec.f_beta;

  const auto pts = detail::probe_points(spec);
  std::vector<double> s2(pts.size()), sg(pts.size()), rv(pts.size()), bv(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double x = pts[i];
    sg[i] = p.diffusion(x);
    s2[i] = sg[i] * sg[i];
    rv[i] = p.rate(x);
    bv[i] = p.drift(x);
    if (!(s2[i] > 0.0))
      throw VE(VE::Kind::NonPositiveSigma, x, x, "sigma^2 is not positive at x=" + detail::fmt_num(x));
  }
  // a sign change of sigma brackets a zero of sigma^2
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    if ((sg[i] > 0) != (sg[i + 1] > 0)) {
      double a = pts[i], c = pts[i + 1];
      for (int it = 0; it < 200 && c - a > 1e-15 * (1 + std::fabs(a)); ++it) {
        double m = 0.5 * (a + c);
        if ((p.diffusion(m) > 0) == (sg[i] > 0)) a = m;
        else c = m;
      }
      double z = 0.5 * (a + c);
      throw VE(VE::Kind::NonPositiveSigma, z, z, "sigma vanishes near x=" + detail::fmt_num(z));
    }
  }
  double rmin = kInf;
  for (double v : rv) rmin = std::min(rmin, v);
  p.r_floor = spec.r_floor ? *spec.r_floor : rmin;
  if (!(p.r_floor > 0.0))
    throw VE(VE::Kind::RateBelowFloor, 0.0, 0.0, "discount floor must be positive");
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (rv[i] < p.r_floor)
      throw VE(VE::Kind::RateBelowFloor, pts[i], pts[i],
               "r(x) < r_floor at x=" + detail::fmt_num(pts[i]));
  }
  // trapezoid integrability on compact cells
  const double cutoff = 1e12;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    double h = pts[i + 1] - pts[i];
    double i1 = 0.5 * h * ((1 + std::fabs(bv[i])) / s2[i] + (1 + std::fabs(bv[i + 1])) / s2[i + 1]);
    double i2 = 0.5 * h * (rv[i] / s2[i] + rv[i + 1] / s2[i + 1]);
    if (!(i1 < cutoff) || !(i2 < cutoff))
      throw VE(VE::Kind::LocalIntegrabilityFailure, pts[i], pts[i + 1],
               "local integrability fails on [" + detail::fmt_num(pts[i]) + ", " +
                   detail::fmt_num(pts[i + 1]) + "]");
  }
  for (double x : pts) {
    double fv = p.reward(x);
    if (fv < 0.0) throw VE(VE::Kind::NegativeReward, x, x, "f(x) < 0 at x=" + detail::fmt_num(x));
  }
  if (p.left == BoundaryKind::Absorbing && p.reward_at_alpha() < 0.0)
    throw VE(VE::Kind::NegativeReward, p.alpha, p.alpha, "f(alpha) < 0");
  if (p.right == BoundaryKind::Absorbing && p.reward_at_beta() < 0.0)
    throw VE(VE::Kind::NegativeReward, p.beta, p.beta, "f(beta) < 0");
  return p;
}

enum class End { Left, Right };

struct FellerReport {
  bool consistent = true;
  bool divergent = false;
  double explosion_integral = 0.0;
};

/// Feller explosion integral v = int p'(y) int_y^c m(z) dz dy toward one
/// endpoint, evaluated from the grid's reference point past the truncation.
/// Advisory only.
inline FellerReport feller_boundary_check(const DiffusionProblem& p, End end, const Grid& g) {
  const double c = g.ref_point();
  const double dir = end == End::Left ? -1.0 : 1.0;
  const double endpoint = end == End::Left ? p.alpha : p.beta;
  const bool finite_end = std::isfinite(endpoint);
  const double w = std::max(1e-300, std::fabs((end == End::Left ? g.left_trunc() : g.right_trunc()) - c));

  // state: L = log p', M = int m, V = int p' M; t = distance from c
  struct State {
    double L, M, V;
  };
  auto rhs = [&](double y, const State& s) {
    double s2 = p.sigma2(y);
    double bb = p.drift(y);
    State d;
    d.L = -2.0 * dir * bb / s2;
    d.M = 2.0 / (s2 * std::exp(s.L));
    d.V = std::exp(s.L) * s.M;
    return d;
  };

  std::vector<double> checkpoints;
  if (finite_end) {
    for (int k = 1; k <= 14; ++k) checkpoints.push_back(std::fabs(endpoint - c) * (1.0 - std::pow(10.0, -k)));
  } else {
    for (int k = 0; k <= 40; ++k) checkpoints.push_back(w * std::ldexp(1.0, k));
  }

  FellerReport rep;
  State s{0.0, 0.0, 0.0};
  double t = 0.0;
  std::vector<double> vs;
  bool broke = false;
  const double cutoff = 1e12;
  try {
    for (double target : checkpoints) {
      while (t < target) {
        double remaining = target - t;
        double h = finite_end ? std::min(remaining, 0.02 * std::max(std::fabs(endpoint - c) - t, 1e-300) + 0.0)
                              : std::min(remaining, 0.01 * std::max(w, t));
        if (finite_end) h = std::max(h, remaining * 1e-3);
        h = std::min(h, remaining);
        auto at = [&](double tt) { return c + dir * tt; };
        auto add = [](const State& a, const State& b, double k) {
          return State{a.L + k * b.L, a.M + k * b.M, a.V + k * b.V};
        };
        State k1 = rhs(at(t), s);
        State k2 = rhs(at(t + 0.5 * h), add(s, k1, 0.5 * h));
        State k3 = rhs(at(t + 0.5 * h), add(s, k2, 0.5 * h));
        State k4 = rhs(at(t + h), add(s, k3, h));
        s.L += h / 6 * (k1.L + 2 * k2.L + 2 * k3.L + k4.L);
        s.M += h / 6 * (k1.M + 2 * k2.M + 2 * k3.M + k4.M);
        s.V += h / 6 * (k1.V + 2 * k2.V + 2 * k3.V + k4.V);
        t += h;
        if (!std::isfinite(s.V) || std::fabs(s.L) > 700) {
          broke = true;
          break;
        }
      }
      if (broke) break;
      vs.push_back(s.V);
      if (s.V > cutoff) break;
    }
  } catch (const ExprError&) {
    // coefficients undefined further out; judge from what was integrated
  }

  if (broke || vs.empty() || !std::isfinite(s.V) || s.V > cutoff) {
    rep.divergent = true;
    rep.explosion_integral = (vs.empty() || broke) ? kInf : s.V;
  } else if (vs.size() >= 3) {
    double d1 = vs[vs.size() - 2] - vs[vs.size() - 3];
    double d2 = vs.back() - vs[vs.size() - 2];
    rep.divergent = d1 > 0 && d2 >= 0.5 * d1;
    rep.explosion_integral = rep.divergent ? kInf : vs.back();
  } else {
    rep.explosion_integral = vs.back();
  }
  BoundaryKind declared = end == End::Left ? p.left : p.right;
  rep.consistent = (declared == BoundaryKind::Inaccessible) == rep.divergent;
  return rep;
}

}  // namespace odstop
