#pragma once

// Value function as the least concave majorant of f/phi in s = psi/phi,
// waiting/stopping regions, optimality flags, smooth-fit and verification
// reports, and the running-reward extension.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "calculus.hpp"
#include "excessive.hpp"
#include "hull.hpp"

namespace odstop {

/// Reward either as an expression with breakpoints or as grid data.
struct Reward {
  std::optional<expr::Expr> f;
  expr::Breakpoints breakpoints;
  std::optional<GridFunction> grid_values;
  std::optional<double> f_alpha;
  std::optional<double> f_beta;

  static Reward from_problem(const DiffusionProblem& p) {
    Reward r;
    r.f = p.f;
    r.breakpoints = p.breakpoints;
    r.f_alpha = p.f_alpha;
    r.f_beta = p.f_beta;
    return r;
  }

  static Reward from_expr(expr::Expr f, expr::Breakpoints bp = {}, std::optional<double> fa = {},
                          std::optional<double> fb = {}) {
    Reward r;
    r.f = std::move(f);
    r.breakpoints = std::move(bp);
    r.f_alpha = fa;
    r.f_beta = fb;
    return r;
  }

  /// Grid data; values at closed endpoint nodes are taken as the endpoint values.
  static Reward from_grid(GridFunction g) {
    Reward r;
    r.grid_values = std::move(g);
    return r;
  }

  /// f itself at x (endpoint rule applies at absorbing endpoints).
  double value(double x, const Grid& g) const {
    if (grid_values) return (*grid_values)(x);
    if (g.left_closed() && x == g.alpha && f_alpha) return *f_alpha;
    if (g.right_closed() && x == g.beta && f_beta) return *f_beta;
    return (*f)(x);
  }

  /// Upper semicontinuous envelope at x.
  double envelope(double x, const Grid& g) const {
    if (grid_values) return (*grid_values)(x);
    if ((g.left_closed() && x == g.alpha) || (g.right_closed() && x == g.beta)) return value(x, g);
    auto l = expr::one_sided_limits(*f, breakpoints, x);
    return std::max({l.value, l.left, l.right});
  }

  /// One-sided derivatives of f at x (side -1 left, +1 right).
  double derivative(double x, int side, const Grid& g) const {
    if (grid_values) {
      std::size_t i = g.find(x);
      if (i < g.size()) return side < 0 ? grid_values->left_slope[i] : grid_values->right_slope[i];
      return grid_values->derivative(x);
    }
    return f->derivative(x, side);
  }

  /// One-sided limits of f at x.
  expr::OneSided limits(double x, const Grid& g) const {
    if (grid_values) {
      double v = (*grid_values)(x);
      return {v, v, v};
    }
    return expr::one_sided_limits(*f, breakpoints, x);
  }
};

/// f-bar on the grid: values per the envelope rule, slopes from the adjacent branches.
inline GridFunction usc_envelope(const Reward& rew, GridPtr g) {
  if (rew.grid_values) return *rew.grid_values;
  GridFunction out(g);
  const Grid& G = *g;
  for (std::size_t i = 0; i < G.size(); ++i) {
    double x = G[i];
    bool closed = (i == 0 && G.left_closed()) || (i + 1 == G.size() && G.right_closed());
    out.values[i] = rew.envelope(x, G);
    if (closed) {
      // slopes of the interior branch
      int side = (i == 0) ? +1 : -1;
      double d = 0.0;
      try {
        d = rew.f->derivative(x, side);
      } catch (const ExprError&) {
      }
      out.left_slope[i] = out.right_slope[i] = d;
    } else {
      out.left_slope[i] = rew.f->derivative(x, -1);
      out.right_slope[i] = rew.f->derivative(x, +1);
    }
  }
  return out;
}

inline std::vector<double> reward_values(const Reward& rew, const Grid& g) {
  std::vector<double> v(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) v[i] = rew.value(g[i], g);
  return v;
}

struct Finiteness {
  bool finite = true;
  double limA = 0.0;
  double limB = 0.0;
  bool left_divergent = false;
  bool right_divergent = false;
};

namespace detail {

/// Limit of y at the far end of a sequence sampled at (roughly) geometric
/// abscissae: Aitken extrapolation when the differences contract, else the
/// outermost value.
inline double tail_limit(double y1, double y2, double y3) {
  double d1 = y2 - y1, d2 = y3 - y2;
  if (d1 == 0.0 || d2 == 0.0) return y3;
  double q = d2 / d1;
  if (!(q > 0.0 && q < 0.95)) return y3;
  return y3 + d2 * q / (1.0 - q);
}

struct TailData {
  double limit;
  bool divergent;
};

/// ratio[k] for k ordered from the interior outward; last element is the outermost node.
inline TailData tail(const std::vector<double>& ratio) {
  const std::size_t n = ratio.size();
  double outer = ratio.back();
  std::size_t k5 = std::max<std::size_t>(1, n / 20);
  double inner = ratio[n - 1 - k5];
  double scale = 0.0;
  for (std::size_t i = n - 1 - k5; i < n; ++i) {
    if (!std::isfinite(ratio[i])) return {kInf, true};
    scale = std::max(scale, std::fabs(ratio[i]));
  }
  if (scale > 1e12 * (1.0 + std::fabs(ratio.front()))) return {kInf, true};
  bool growing = outer > inner * (1.0 + 1e-3) + 1e-12 * scale;
  if (growing) return {kInf, true};
  std::size_t k = std::max<std::size_t>(1, n / 100);
  double lim = tail_limit(ratio[n - 1 - 2 * k], ratio[n - 1 - k], outer);
  // phi and psi carry ~1e-8 relative error, so smaller limits are not resolved
  if (std::fabs(lim) <= 1e-7 * std::fabs(outer)) lim = 0.0;
  return {std::max(0.0, lim), false};
}

}  // namespace detail

namespace detail {

/// Limit of f at a closed endpoint from inside: the adjacent branch evaluated
/// there, else quadratic extrapolation of the interior node values.
inline double inner_limit(const Reward& rew, const GridFunction& fbar, bool left) {
  const Grid& g = *fbar.grid;
  const std::size_t n = g.size();
  double x0 = left ? g.alpha : g.beta;
  if (rew.f) {
    try {
      double v = rew.f->eval_dual(x0, left ? +1 : -1).v;
      if (std::isfinite(v)) return v;
    } catch (const ExprError&) {
    }
  }
  std::size_t i1 = left ? 1 : n - 2, i2 = left ? 2 : n - 3, i3 = left ? 3 : n - 4;
  if (n < 5) return fbar.values[i1];
  double x1 = g[i1], x2 = g[i2], x3 = g[i3];
  return fbar.values[i1] * (x0 - x2) * (x0 - x3) / ((x1 - x2) * (x1 - x3)) +
         fbar.values[i2] * (x0 - x1) * (x0 - x3) / ((x2 - x1) * (x2 - x3)) +
         fbar.values[i3] * (x0 - x1) * (x0 - x2) / ((x3 - x1) * (x3 - x2));
}

}  // namespace detail

/// limA = lim f/phi at the left end, limB = lim f/psi at the right end. At an
/// absorbing end the endpoint value takes part in the limsup.
inline Finiteness check_finiteness(const DiffusionProblem& p, const FundamentalPair& fp, const Reward& rew,
                                   const GridFunction& fbar) {
  (void)p;
  const Grid& g = *fp.grid;
  const std::size_t n = g.size();
  std::size_t i0 = g.first_interior(), i1 = g.last_interior();
  Finiteness out;
  if (g.left_closed()) {
    double inner = std::max(0.0, detail::inner_limit(rew, fbar, true));
    out.limA = std::max(inner, fbar.values[0]) / fp.phi.values[0];
  } else {
    std::vector<double> left;
    for (std::size_t i = i1 + 1; i-- > i0;) left.push_back(fbar.values[i] / fp.phi.values[i]);
    auto tl = detail::tail(left);
    out.limA = tl.limit;
    out.left_divergent = tl.divergent;
  }
  if (g.right_closed()) {
    double inner = std::max(0.0, detail::inner_limit(rew, fbar, false));
    out.limB = std::max(inner, fbar.values[n - 1]) / fp.psi.values[n - 1];
  } else {
    std::vector<double> right;
    for (std::size_t i = i0; i <= i1; ++i) right.push_back(fbar.values[i] / fp.psi.values[i]);
    auto tr = detail::tail(right);
    out.limB = tr.limit;
    out.right_divergent = tr.divergent;
  }
  out.finite = !out.left_divergent && !out.right_divergent && std::isfinite(out.limA) && std::isfinite(out.limB);
  return out;
}

inline Finiteness check_finiteness(const DiffusionProblem& p, const FundamentalPair& fp, const Reward& rew) {
  return check_finiteness(p, fp, rew, usc_envelope(rew, fp.grid));
}

struct WaitingInterval {
  double c;
  double d;
  double A;
  double B;
};

struct ClosedInterval {
  double lo;
  double hi;
};

struct OptimalityFlags {
  bool cond121 = true;  // zero boundary ratio limits at inaccessible ends
  bool cond122 = true;  // f attains its limsup at absorbing ends
  bool usc = true;      // f == f-bar
  bool tau_star_optimal = true;
  std::vector<std::string> warnings;
};

struct SolveOptions {
  double tol_contact = 1e-9;
};

struct ValueSolution {
  GridPtr grid;
  GridFunction v;
  GridFunction f_bar;
  std::vector<double> f;  // the reward itself at the nodes
  double limA = 0.0;
  double limB = 0.0;
  bool finite = true;
  std::vector<WaitingInterval> waiting;
  std::vector<ClosedInterval> stopping_set;  // the closed set {v = f-bar}
  std::vector<bool> in_stopping_set;
  std::vector<ClosedInterval> tau_star_intervals;  // runs of {v = f-bar} meeting {v = f}
  OptimalityFlags flags;
  std::vector<HullPoint> hull;  // vertices in (s, f-bar/phi - limB s); tag = node or -1 (anchor)
};

namespace detail {

struct Line {
  double A, B;
};

/// The hull edge (in f-bar/phi coordinates) covering abscissa s.
inline Line hull_line(const std::vector<HullPoint>& h, double limB, double s) {
  std::size_t k = hull_segment(h, s);
  if (k + 1 >= h.size()) return {h.back().g, limB};
  double m = (h[k + 1].g - h[k].g) / (h[k + 1].s - h[k].s);
  return {h[k].g - m * h[k].s, m + limB};
}

inline double slope_tol(double a, double b) { return 1e-3 * (1.0 + std::max(std::fabs(a), std::fabs(b))); }

}  // namespace detail

inline ValueSolution solve(const DiffusionProblem& p, const FundamentalPair& fp, const Reward& rew,
                           const SolveOptions& opt = {}) {
  const Grid& g = *fp.grid;
  const std::size_t n = g.size();
  ValueSolution sol;
  sol.grid = fp.grid;
  sol.f_bar = usc_envelope(rew, fp.grid);
  sol.f = reward_values(rew, g);
  auto fin = check_finiteness(p, fp, rew, sol.f_bar);
  sol.limA = fin.limA;
  sol.limB = fin.limB;
  sol.finite = fin.finite;
  if (!fin.finite) throw InfiniteValue(fin.limA, fin.limB);

  const std::size_t i0 = g.first_interior(), i1 = g.last_interior();
  std::vector<HullPoint> pts;
  pts.reserve(i1 - i0 + 2);
  pts.push_back({0.0, sol.limA, -1});
  for (std::size_t i = i0; i <= i1; ++i) {
    double s = fp.s(i);
    pts.push_back({s, sol.f_bar.values[i] / fp.phi.values[i] - sol.limB * s, static_cast<std::ptrdiff_t>(i)});
  }
  auto h = upper_hull(pts);
  while (h.size() >= 2 && h.back().g <= h[h.size() - 2].g) h.pop_back();
  sol.hull = h;

  sol.v = GridFunction(fp.grid);
  std::vector<detail::Line> node_line(n);
  for (std::size_t i = i0; i <= i1; ++i) {
    double s = fp.s(i);
    auto ln = detail::hull_line(h, sol.limB, s);
    node_line[i] = ln;
    double v = ln.A * fp.phi.values[i] + ln.B * fp.psi.values[i];
    sol.v.values[i] = std::max(v, sol.f_bar.values[i]);
  }
  if (g.left_closed()) sol.v.values[0] = sol.f_bar.values[0];
  if (g.right_closed()) sol.v.values[n - 1] = sol.f_bar.values[n - 1];

  // contact is judged in hull coordinates, where the dominant psi part is removed
  sol.in_stopping_set.assign(n, false);
  for (std::size_t i = i0; i <= i1; ++i) {
    double s = fp.s(i);
    double gt = sol.f_bar.values[i] / fp.phi.values[i] - sol.limB * s;
    double gh = node_line[i].A + (node_line[i].B - sol.limB) * s;
    double floor = 64.0 * std::numeric_limits<double>::epsilon() * (std::fabs(gt) + std::fabs(sol.limB * s));
    sol.in_stopping_set[i] = gh - gt <= opt.tol_contact * std::fabs(gh) + floor;
  }
  // an isolated contact at a truncation node only reflects how the limit was taken
  if (!g.left_closed() && i1 > i0 && !sol.in_stopping_set[i0 + 1]) sol.in_stopping_set[i0] = false;
  if (!g.right_closed() && i1 > i0 && !sol.in_stopping_set[i1 - 1]) sol.in_stopping_set[i1] = false;
  if (g.left_closed()) sol.in_stopping_set[0] = true;
  if (g.right_closed()) sol.in_stopping_set[n - 1] = true;

  // slopes: f-bar's one-sided slopes across stopping cells, hull lines elsewhere
  auto cell_line = [&](std::size_t i) {  // cell [i, i+1]
    std::size_t a = std::max(i, i0), b = std::min(i + 1, i1);
    double s = 0.5 * (fp.s(a) + fp.s(b));
    return detail::hull_line(h, sol.limB, s);
  };
  auto stopping_cell = [&](std::size_t i) {
    bool ends_interior = i >= i0 && i + 1 <= i1;
    return ends_interior && sol.in_stopping_set[i] && sol.in_stopping_set[i + 1];
  };
  for (std::size_t i = 0; i + 1 < n; ++i) {
    double right_i, left_next;
    if (stopping_cell(i)) {
      right_i = sol.f_bar.right_slope[i];
      left_next = sol.f_bar.left_slope[i + 1];
    } else {
      auto ln = cell_line(i);
      right_i = ln.A * fp.phi.right_slope[i] + ln.B * fp.psi.right_slope[i];
      left_next = ln.A * fp.phi.left_slope[i + 1] + ln.B * fp.psi.left_slope[i + 1];
    }
    sol.v.right_slope[i] = right_i;
    sol.v.left_slope[i + 1] = left_next;
  }
  sol.v.left_slope[0] = sol.v.right_slope[0];
  sol.v.right_slope[n - 1] = sol.v.left_slope[n - 1];

  // waiting runs
  for (std::size_t i = i0; i <= i1;) {
    if (sol.in_stopping_set[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 <= i1 && !sol.in_stopping_set[j + 1]) ++j;
    double c = (i > 0) ? g[i - 1] : g.alpha;
    double d = (j + 1 < n) ? g[j + 1] : g.beta;
    if (i == 0 && i0 == 0) c = g.alpha;
    if (j == n - 1) d = g.beta;
    auto ln = node_line[(i + j) / 2];
    sol.waiting.push_back({c, d, ln.A, ln.B});
    i = j + 1;
  }
  // stopping runs and tau* runs
  for (std::size_t i = 0; i < n;) {
    if (!sol.in_stopping_set[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < n && sol.in_stopping_set[j + 1]) ++j;
    sol.stopping_set.push_back({g[i], g[j]});
    std::size_t a = i, b = j;
    if (a == 0 && g.left_closed()) ++a;
    if (b == n - 1 && g.right_closed() && b > 0) --b;
    if (a <= b && b >= i && a <= j) {
      bool meets_f = false;
      for (std::size_t k = a; k <= b; ++k) {
        double v = sol.v.values[k];
        if (v - sol.f[k] <= opt.tol_contact * (1.0 + std::fabs(v))) meets_f = true;
      }
      if (meets_f) sol.tau_star_intervals.push_back({g[a], g[b]});
    }
    i = j + 1;
  }

  // optimality conditions for tau*
  // zero is judged against the ratios on the matching side of the reference node
  double gscale = 0.0, hscale = 0.0;
  for (std::size_t i = i0; i <= i1; ++i) {
    if (i <= g.ref_index) gscale = std::max(gscale, sol.f_bar.values[i] / fp.phi.values[i]);
    if (i >= g.ref_index) hscale = std::max(hscale, sol.f_bar.values[i] / fp.psi.values[i]);
  }
  auto& fl = sol.flags;
  if (g.left == BoundaryKind::Inaccessible && sol.limA > 1e-9 * gscale) {
    fl.cond121 = false;
    fl.warnings.push_back("lim f/phi at the left end is positive; tau* may not be optimal");
  }
  if (g.right == BoundaryKind::Inaccessible && sol.limB > 1e-9 * hscale) {
    fl.cond121 = false;
    fl.warnings.push_back("lim f/psi at the right end is positive; tau* may not be optimal");
  }
  auto fscale = 1.0 + *std::max_element(sol.f_bar.values.begin(), sol.f_bar.values.end());
  if (g.left_closed()) {
    double inner = sol.f_bar.values[1];
    try {
      if (rew.f) inner = rew.f->eval_dual(g.alpha, +1).v;
    } catch (const ExprError&) {
    }
    if (sol.f[0] < inner - 1e-9 * fscale) {
      fl.cond122 = false;
      fl.warnings.push_back("f(alpha) is below the limsup of f at alpha; tau* may not be optimal");
    }
  }
  if (g.right_closed()) {
    double inner = sol.f_bar.values[n - 2];
    try {
      if (rew.f) inner = rew.f->eval_dual(g.beta, -1).v;
    } catch (const ExprError&) {
    }
    if (sol.f[n - 1] < inner - 1e-9 * fscale) {
      fl.cond122 = false;
      fl.warnings.push_back("f(beta) is below the limsup of f at beta; tau* may not be optimal");
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    if (sol.f_bar.values[i] - sol.f[i] > 1e-12 * fscale) fl.usc = false;
  if (!fl.usc) fl.warnings.push_back("f is not upper semicontinuous; tau* may not be optimal");
  fl.tau_star_optimal = fl.cond121 && fl.cond122 && fl.usc;
  return sol;
}

inline ValueSolution solve(const DiffusionProblem& p, const FundamentalPair& fp, const SolveOptions& opt = {}) {
  return solve(p, fp, Reward::from_problem(p), opt);
}

struct PointValue {
  double v;
  double A;
  double B;
  std::vector<double> contacts;
};

/// Value at an arbitrary point of the span from the active hull edge.
inline PointValue value_at(const ValueSolution& sol, const FundamentalPair& fp, const Reward& rew, double x) {
  const Grid& g = *fp.grid;
  detail::require_span(g, x);
  std::size_t node = g.find(x);
  if (node < g.size() && ((node == 0 && g.left_closed()) || (node + 1 == g.size() && g.right_closed())))
    return {sol.v.values[node], 0.0, 0.0, {x}};
  double ph = fp.phi(x), ps = fp.psi(x);
  double s = ps / ph;
  const auto& h = sol.hull;
  std::size_t k = hull_segment(h, s);
  auto ln = detail::hull_line(h, sol.limB, s);
  PointValue out{ln.A * ph + ln.B * ps, ln.A, ln.B, {}};
  if (node < g.size() && sol.in_stopping_set[node]) {
    out.v = sol.v.values[node];
    out.contacts = {x};
    return out;
  }
  double fb = rew.envelope(x, g);
  if (fb >= out.v) {
    out.v = fb;
    out.contacts = {x};
    return out;
  }
  if (h[k].tag >= 0) out.contacts.push_back(g[static_cast<std::size_t>(h[k].tag)]);
  else if (g.left_closed()) out.contacts.push_back(g.alpha);
  if (k + 1 < h.size() && h[k + 1].tag >= 0) out.contacts.push_back(g[static_cast<std::size_t>(h[k + 1].tag)]);
  return out;
}

inline PointValue value_at(const DiffusionProblem& p, const FundamentalPair& fp, const Reward& rew, double x) {
  return value_at(solve(p, fp, rew), fp, rew, x);
}

struct VerificationReport {
  bool majorant = true;        // w >= f-bar
  double worst_majorant = 0.0;
  bool excessive = true;       // -Lw >= 0 and boundary inequalities
  ExcessivityReport excessivity;
  bool complementarity = true; // Lw does not charge {w > f-bar}
  double worst_complementarity = 0.0;
  bool boundary_left = true;
  bool boundary_right = true;
  double w_limA = 0.0;
  double w_limB = 0.0;
  bool all = true;
};

/// Checks the variational-inequality characterization for a candidate w.
inline VerificationReport verify_solution(const DiffusionProblem& p, const FundamentalPair& fp, const Reward& rew,
                                          const GridFunction& w, std::optional<std::pair<double, double>> limits = {},
                                          double tol = 1e-3) {
  const Grid& g = *fp.grid;
  const std::size_t n = g.size();
  VerificationReport rep;
  GridFunction fbar = usc_envelope(rew, fp.grid);
  double wscale = 0.0;
  for (double v : w.values) wscale = std::max(wscale, std::fabs(v));
  for (std::size_t i = 0; i < n; ++i) {
    double gap = fbar.values[i] - w.values[i];
    double rel = gap / (1e-12 * wscale + std::fabs(w.values[i]));
    if (gap > 0) rep.worst_majorant = std::max(rep.worst_majorant, rel);
  }
  rep.majorant = rep.worst_majorant <= 1e-6;

  EndpointValues ev;
  rep.excessivity = check_excessive(p, fp, w, ev, tol);
  rep.excessive = rep.excessivity.verdict;

  // mass of |Lw| on the open set {w > f-bar}, as a relative potential
  SignedMeasure mu = apply_L(p, fp, w);
  std::vector<bool> open(n, false);
  for (std::size_t i = g.first_interior(); i <= g.last_interior(); ++i)
    open[i] = w.values[i] - fbar.values[i] > 1e-9 * (1.0 + std::fabs(w.values[i]));
  auto q = detail::Quadrature::build(p, fp);
  std::vector<double> rho = detail::sample_measure(mu, q);
  for (std::size_t j = 0; j < rho.size(); ++j) {
    std::size_t c = j / 3;
    rho[j] = (open[c] && open[c + 1]) ? std::fabs(rho[j]) : 0.0;
  }
  if (g.left_closed()) rho[0] = rho[1] = rho[2] = 0.0;
  if (g.right_closed()) rho[rho.size() - 1] = rho[rho.size() - 2] = rho[rho.size() - 3] = 0.0;
  std::vector<double> atoms(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) atoms[i] = open[i] ? std::fabs(mu.atom[i]) : 0.0;
  auto Rc = detail::potential_from_samples(fp, q, rho, atoms);
  rep.worst_complementarity = detail::relative_violation(fp, w, Rc.R.values).magnitude;
  rep.complementarity = rep.worst_complementarity <= tol;

  Finiteness target;
  if (limits) {
    target.limA = limits->first;
    target.limB = limits->second;
  } else {
    target = check_finiteness(p, fp, rew, fbar);
  }
  Finiteness wl = check_finiteness(p, fp, Reward::from_grid(w), w);
  rep.w_limA = wl.limA;
  rep.w_limB = wl.limB;
  std::size_t c = g.ref_index;
  double scaleA = w.values[c] / fp.phi.values[c];
  double scaleB = w.values[c] / fp.psi.values[c];
  if (g.left_closed()) {
    rep.boundary_left = std::fabs(w.values[0] - fbar.values[0]) <= 1e-6 * (1.0 + wscale);
  } else {
    rep.boundary_left = std::fabs(wl.limA - target.limA) <= 1e-4 * scaleA;
  }
  if (g.right_closed()) {
    rep.boundary_right = std::fabs(w.values[n - 1] - fbar.values[n - 1]) <= 1e-6 * (1.0 + wscale);
  } else {
    rep.boundary_right = std::fabs(wl.limB - target.limB) <= 1e-4 * scaleB;
  }
  rep.all = rep.majorant && rep.excessive && rep.complementarity && rep.boundary_left && rep.boundary_right;
  return rep;
}

struct SmoothFitPoint {
  double x;
  double f_plus, v_plus, v_minus, f_minus;
  bool skipped;  // f not continuous at x
  bool ok;
  bool equality;
};

/// f'_+ <= v'_+ <= v'_- <= f'_- at interior region boundaries.
inline std::vector<SmoothFitPoint> smooth_fit_report(const DiffusionProblem& p, const FundamentalPair& fp,
                                                     const Reward& rew, const ValueSolution& sol) {
  (void)p;
  const Grid& g = *fp.grid;
  std::vector<double> pts;
  for (const auto& w : sol.waiting) {
    for (double y : {w.c, w.d}) {
      std::size_t i = g.find(y);
      if (i == g.size() || i == 0 || i + 1 == g.size()) continue;
      if (std::find(pts.begin(), pts.end(), y) == pts.end()) pts.push_back(y);
    }
  }
  std::sort(pts.begin(), pts.end());
  std::vector<SmoothFitPoint> out;
  for (double y : pts) {
    std::size_t i = g.find(y);
    SmoothFitPoint sp{};
    sp.x = y;
    auto lim = rew.limits(y, g);
    double ftol = 1e-9 * (1.0 + std::fabs(lim.value));
    sp.skipped = std::fabs(lim.left - lim.value) > ftol || std::fabs(lim.right - lim.value) > ftol;
    sp.f_plus = rew.derivative(y, +1, g);
    sp.f_minus = rew.derivative(y, -1, g);
    sp.v_plus = sol.v.right_slope[i];
    sp.v_minus = sol.v.left_slope[i];
    if (sp.skipped) {
      sp.ok = true;
      sp.equality = false;
    } else {
      double t = detail::slope_tol(std::max(std::fabs(sp.f_plus), std::fabs(sp.f_minus)),
                                   std::max(std::fabs(sp.v_plus), std::fabs(sp.v_minus)));
      sp.ok = sp.f_plus <= sp.v_plus + t && sp.v_plus <= sp.v_minus + t && sp.v_minus <= sp.f_minus + t;
      sp.equality = std::fabs(sp.f_plus - sp.v_plus) <= t && std::fabs(sp.v_plus - sp.v_minus) <= t &&
                    std::fabs(sp.v_minus - sp.f_minus) <= t;
    }
    out.push_back(sp);
  }
  return out;
}

struct RunningRewardSolution {
  GridFunction v_total;
  Potential R;
  ValueSolution sol;
};

/// sup E[int_0^tau e^-Lambda h dt + e^-Lambda_tau f] = R + value of (f - R)^+.
inline RunningRewardSolution solve_with_running_reward(const DiffusionProblem& p, const FundamentalPair& fp,
                                                       const expr::Expr& h, const Reward& rew,
                                                       const SolveOptions& opt = {}) {
  RunningRewardSolution out;
  out.R = potential_tilde(p, fp, h);
  GridFunction fbar = usc_envelope(rew, fp.grid);
  GridFunction aux(fp.grid);
  for (std::size_t i = 0; i < aux.size(); ++i) {
    double d = fbar.values[i] - out.R.R.values[i];
    if (d > 0) {
      aux.values[i] = d;
      aux.left_slope[i] = fbar.left_slope[i] - out.R.R.left_slope[i];
      aux.right_slope[i] = fbar.right_slope[i] - out.R.R.right_slope[i];
    }
  }
  out.sol = solve(p, fp, Reward::from_grid(aux), opt);
  out.v_total = out.R.R.combine(1.0, out.sol.v, 1.0);
  return out;
}

}  // namespace odstop
