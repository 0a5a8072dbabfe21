#pragma once

// Working grid, scale function, speed density, fundamental solutions phi/psi
// and hitting-time Laplace transforms.

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <ostream>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"
#include "model.hpp"

namespace odstop {

enum class Spacing { Uniform, Log };

struct TruncPolicy {
  std::optional<std::pair<double, double>> bounds;  // explicit truncation
  double tail_tol = 1e-8;
  Spacing spacing = Spacing::Uniform;
  std::optional<double> ref_point;
  int max_extensions = 60;
};

struct FundamentalPair {
  GridPtr grid;
  GridFunction p;
  GridFunction m_density;
  GridFunction phi;
  GridFunction psi;
  double C = 0.0;
  double ref_point = 0.0;

  /// s = psi/phi at node i.
  double s(std::size_t i) const { return psi.values[i] / phi.values[i]; }
  double pprime(std::size_t i) const { return p.left_slope[i]; }
};

namespace detail {

inline std::vector<double> base_nodes(double lo, double hi, std::size_t n, Spacing sp) {
  std::vector<double> x(n);
  if (sp == Spacing::Log) {
    if (!(lo > 0.0)) throw Error("log spacing requires a positive left truncation");
    double a = std::log(lo), b = std::log(hi);
    for (std::size_t i = 0; i < n; ++i) x[i] = std::exp(a + (b - a) * static_cast<double>(i) / (n - 1));
  } else {
    for (std::size_t i = 0; i < n; ++i) x[i] = lo + (hi - lo) * static_cast<double>(i) / (n - 1);
  }
  x.front() = lo;
  x.back() = hi;
  return x;
}

/// Snaps each forced point to a node within a quarter cell, else inserts it.
inline void force_points(std::vector<double>& x, const std::vector<double>& forced) {
  for (double y : forced) {
    if (!(y > x.front() && y < x.back())) continue;
    auto it = std::lower_bound(x.begin(), x.end(), y);
    std::size_t j = static_cast<std::size_t>(it - x.begin());
    if (x[j] == y) continue;
    double left_gap = y - x[j - 1];
    double right_gap = x[j] - y;
    double cell = x[j] - x[j - 1];
    if (left_gap <= 0.25 * cell && j - 1 > 0) {
      x[j - 1] = y;
    } else if (right_gap <= 0.25 * cell && j + 1 < x.size()) {
      x[j] = y;
    } else {
      x.insert(x.begin() + static_cast<std::ptrdiff_t>(j), y);
    }
  }
  // at least 3 nodes strictly between consecutive forced points
  std::vector<double> fs;
  for (double y : forced)
    if (y > x.front() && y < x.back()) fs.push_back(y);
  std::sort(fs.begin(), fs.end());
  fs.erase(std::unique(fs.begin(), fs.end()), fs.end());
  for (std::size_t k = 0; k + 1 < fs.size(); ++k) {
    auto a = std::lower_bound(x.begin(), x.end(), fs[k]);
    auto b = std::lower_bound(x.begin(), x.end(), fs[k + 1]);
    if (b - a - 1 < 3) {
      std::vector<double> extra;
      for (int q = 1; q <= 3; ++q) extra.push_back(fs[k] + (fs[k + 1] - fs[k]) * q / 4.0);
      std::vector<double> merged(x.begin(), a + 1);
      merged.insert(merged.end(), extra.begin(), extra.end());
      merged.insert(merged.end(), b, x.end());
      x = std::move(merged);
    }
  }
}

inline GridPtr make_grid(const DiffusionProblem& p, double lo, double hi, std::size_t n, Spacing sp,
                         std::optional<double> ref) {
  auto g = std::make_shared<Grid>();
  g->alpha = p.alpha;
  g->beta = p.beta;
  g->left = p.left;
  g->right = p.right;
  g->nodes = base_nodes(lo, hi, n, sp);
  std::vector<double> forced = p.breakpoints;
  if (ref) forced.push_back(*ref);
  force_points(g->nodes, forced);
  double c;
  if (ref) {
    c = *ref;
  } else if (sp == Spacing::Log) {
    c = std::sqrt(lo * hi);
  } else {
    c = 0.5 * (lo + hi);
  }
  g->ref_index = g->nearest(std::clamp(c, lo, hi));
  // keep the reference point off an absorbing endpoint node
  if (g->left_closed() && g->ref_index == 0) g->ref_index = 1;
  if (g->right_closed() && g->ref_index == g->size() - 1) g->ref_index = g->size() - 2;
  return g;
}

/// RK4 on the linear system (g, g') of 1/2 s^2 g'' + b g' - r g = 0.
struct LinearOde {
  const DiffusionProblem& p;

  void rhs(double x, double g, double gp, double& dg, double& dgp) const {
    double s2 = p.sigma2(x);
    dg = gp;
    dgp = 2.0 / s2 * (p.rate(x) * g - p.drift(x) * gp);
  }

  double stiffness(double x) const {
    double s2 = p.sigma2(x);
    double b = p.drift(x);
    return (std::fabs(b) + std::sqrt(b * b + 2.0 * p.rate(x) * s2)) / s2;
  }

  void step(double x, double h, double& g, double& gp) const {
    double k1g, k1p, k2g, k2p, k3g, k3p, k4g, k4p;
    rhs(x, g, gp, k1g, k1p);
    rhs(x + 0.5 * h, g + 0.5 * h * k1g, gp + 0.5 * h * k1p, k2g, k2p);
    rhs(x + 0.5 * h, g + 0.5 * h * k2g, gp + 0.5 * h * k2p, k3g, k3p);
    rhs(x + h, g + h * k3g, gp + h * k3p, k4g, k4p);
    g += h / 6.0 * (k1g + 2 * k2g + 2 * k3g + k4g);
    gp += h / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p);
  }

  /// Advances from x to x + h with enough substeps; keeps g normalized and
  /// accumulates the log of the removed scale into ls.
  void advance(double x, double h, double& g, double& gp, double& ls) const {
    double lam = std::max(stiffness(x), stiffness(x + h));
    int m = std::max(1, static_cast<int>(std::ceil(lam * std::fabs(h) / 0.05)));
    double hs = h / m;
    for (int k = 0; k < m; ++k) {
      step(x + k * hs, hs, g, gp);
      double a = std::max(std::fabs(g), std::fabs(gp) * std::fabs(hs));
      if (a > 1e100 || (a < 1e-100 && a > 0.0)) {
        ls += std::log(a);
        g /= a;
        gp /= a;
      }
    }
  }
};

struct SweepResult {
  std::vector<double> g, gp, ls;
};

/// One sweep over the nodes in order `idx` (forward or reverse).
inline SweepResult sweep(const DiffusionProblem& p, const Grid& grid, bool forward) {
  LinearOde ode{p};
  const std::size_t n = grid.size();
  SweepResult out{std::vector<double>(n), std::vector<double>(n), std::vector<double>(n)};
  auto node = [&](std::size_t k) { return forward ? grid[k] : grid[n - 1 - k]; };
  const double dir = forward ? 1.0 : -1.0;
  const bool absorbing_start = forward ? grid.left_closed() : grid.right_closed();
  double g = 1.0, gp = 0.0, ls = 0.0;
  double x0 = node(0);
  if (absorbing_start) {
    g = 0.0;
    gp = dir;  // psi'(alpha) = 1 or phi'(beta) = -1
  } else {
    // burn-in from beyond the truncation, started on the frozen-coefficient
    // decaying mode, so the dominant solution is suppressed
    double end = forward ? grid.alpha : grid.beta;
    double span = grid.right_trunc() - grid.left_trunc();
    std::vector<double> path;
    const int nb = 600;
    // root gap of the frozen characteristic equation; its integral measures
    // how strongly the burn-in suppresses the dominant mode
    auto gap = [&](double y) {
      double s2 = p.sigma2(y), b = p.drift(y);
      return 2.0 * std::sqrt(b * b + 2.0 * p.rate(y) * s2) / s2;
    };
    auto make_path = [&](double D) {
      std::vector<double> pts;
      if (std::isfinite(end)) {
        double d0 = std::fabs(x0 - end);
        for (int k = 0; k <= nb; ++k) pts.push_back(end + dir * d0 * std::pow(D, 1.0 - k / double(nb)));
      } else {
        for (int k = nb; k >= 1; --k) pts.push_back(x0 - dir * D * std::pow(1e-6, 1.0 - k / double(nb)));
        pts.push_back(x0);
      }
      return pts;
    };
    auto mass = [&](const std::vector<double>& pts) {
      double m = 0.0;
      for (std::size_t k = 0; k + 1 < pts.size(); ++k)
        m += 0.5 * std::fabs(pts[k + 1] - pts[k]) * (gap(pts[k]) + gap(pts[k + 1]));
      return m;
    };
    try {
      // finite end: D is the relative distance of the start to the endpoint
      double D = std::isfinite(end) ? 1e-2 : 0.1 * span;
      for (int it = 0; it < 60; ++it) {
        path = make_path(D);
        if (mass(path) >= 40.0) break;
        if (std::isfinite(end)) {
          if (D < 1e-12) break;
          D *= 0.1;
        } else {
          D *= 2.0;
        }
      }
    } catch (const ExprError&) {
      path.clear();
    }
    if (path.empty()) path.push_back(x0);
    path.back() = x0;
    bool ok = true;
    try {
      double xs = path.front();
      double s2 = p.sigma2(xs), b = p.drift(xs), r = p.rate(xs);
      double u = (-b + dir * std::sqrt(b * b + 2.0 * r * s2)) / s2;
      g = 1.0;
      gp = u;
      for (std::size_t k = 0; k + 1 < path.size(); ++k) ode.advance(path[k], path[k + 1] - path[k], g, gp, ls);
      if (!(g > 0.0) || !std::isfinite(g) || !std::isfinite(gp)) ok = false;
    } catch (const ExprError&) {
      ok = false;
    }
    if (!ok) {
      double s2 = p.sigma2(x0), b = p.drift(x0), r = p.rate(x0);
      g = 1.0;
      gp = (-b + dir * std::sqrt(b * b + 2.0 * r * s2)) / s2;
      ls = 0.0;
    }
    // start the log scale at zero at the first node
    double a = std::fabs(g);
    g /= a;
    gp /= a;
    ls = 0.0;
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0) ode.advance(node(k - 1), node(k) - node(k - 1), g, gp, ls);
    std::size_t i = forward ? k : n - 1 - k;
    out.g[i] = g;
    out.gp[i] = gp;
    out.ls[i] = ls;
  }
  return out;
}

inline void finalize(const SweepResult& s, std::size_t c, GridFunction& f, const char* name) {
  const double gc = s.g[c];
  const double lc = s.ls[c];
  for (std::size_t i = 0; i < s.g.size(); ++i) {
    double e = s.ls[i] - lc;
    if (e > 700.0)
      throw NumericalError(NumericalError::Kind::OverflowInExponent,
                           std::string(name) + " overflows on the grid; shrink the truncation");
    double scale = std::exp(e) / gc;
    f.values[i] = s.g[i] * scale;
    f.left_slope[i] = f.right_slope[i] = s.gp[i] * scale;
  }
}

}  // namespace detail

/// Scale function p with p(c) = 0; slopes are p'.
inline GridFunction scale_function(const DiffusionProblem& p, GridPtr g) {
  GridFunction out(g);
  const std::size_t n = g->size();
  const std::size_t c = g->ref_index;
  auto dL = [&](double x) { return -2.0 * p.drift(x) / p.sigma2(x); };
  std::vector<double> L(n, 0.0), P(n, 0.0);
  auto integrate = [&](std::size_t from, std::size_t to) {
    double l = L[from], pp = P[from];
    double x = (*g)[from];
    double h = (*g)[to] - x;
    double mag = std::max(std::fabs(dL(x)), std::fabs(dL(x + h)));
    int m = std::max(1, static_cast<int>(std::ceil(mag * std::fabs(h) / 0.05)));
    double hs = h / m;
    for (int k = 0; k < m; ++k) {
      double xa = x + k * hs;
      double k1 = dL(xa), k2 = dL(xa + 0.5 * hs), k3 = dL(xa + hs);
      double l_mid = l + hs / 24.0 * (5 * k1 + 8 * k2 - k3);
      double l_new = l + hs / 6.0 * (k1 + 4 * k2 + k3);
      pp += hs / 6.0 * (std::exp(l) + 4 * std::exp(l_mid) + std::exp(l_new));
      l = l_new;
      if (std::fabs(l) > 700.0)
        throw NumericalError(NumericalError::Kind::OverflowInExponent,
                             "scale density exp(-2 int b/sigma^2) overflows; shrink the truncation");
    }
    L[to] = l;
    P[to] = pp;
  };
  for (std::size_t i = c; i + 1 < n; ++i) integrate(i, i + 1);
  for (std::size_t i = c; i > 0; --i) integrate(i, i - 1);
  for (std::size_t i = 0; i < n; ++i) {
    out.values[i] = P[i];
    out.left_slope[i] = out.right_slope[i] = std::exp(L[i]);
  }
  return out;
}

/// m(x) = 2 / (sigma^2 p').
inline GridFunction speed_density(const DiffusionProblem& p, const GridFunction& scale) {
  GridFunction out(scale.grid);
  for (std::size_t i = 0; i < out.size(); ++i) {
    double x = (*scale.grid)[i];
    double s2 = p.sigma2(x);
    double pp = scale.left_slope[i];
    double m = 2.0 / (s2 * pp);
    // derivative: m' = -m (s2'/s2 + p''/p'), p''/p' = -2b/s2
    double h = 1e-6 * std::max(1.0, std::fabs(x));
    double ds2 = 0.0;
    try {
      ds2 = (p.sigma2(x + h) - p.sigma2(x - h)) / (2 * h);
    } catch (const ExprError&) {
    }
    double d = -m * (ds2 / s2 - 2.0 * p.drift(x) / s2);
    out.values[i] = m;
    out.left_slope[i] = out.right_slope[i] = d;
  }
  return out;
}

/// phi (decreasing) and psi (increasing), normalized to 1 at the reference node.
inline FundamentalPair fundamental_pair(const DiffusionProblem& p, GridPtr g) {
  FundamentalPair fp;
  fp.grid = g;
  fp.p = scale_function(p, g);
  fp.m_density = speed_density(p, fp.p);
  fp.phi = GridFunction(g);
  fp.psi = GridFunction(g);
  const std::size_t c = g->ref_index;
  auto fwd = detail::sweep(p, *g, true);
  auto bwd = detail::sweep(p, *g, false);
  detail::finalize(fwd, c, fp.psi, "psi");
  detail::finalize(bwd, c, fp.phi, "phi");
  fp.ref_point = (*g)[c];
  fp.C = fp.phi.values[c] * fp.psi.left_slope[c] - fp.phi.left_slope[c] * fp.psi.values[c];
  fp.C /= fp.p.left_slope[c];
  for (std::size_t i = 0; i < g->size(); ++i) {
    bool absorbing_psi = (i == 0 && g->left_closed());
    bool absorbing_phi = (i + 1 == g->size() && g->right_closed());
    if (!(fp.psi.values[i] > 0.0) && !absorbing_psi)
      throw NumericalError(NumericalError::Kind::MonotonicityViolation,
                           "psi lost positivity at x=" + detail::fmt_num((*g)[i]));
    if (!(fp.phi.values[i] > 0.0) && !absorbing_phi)
      throw NumericalError(NumericalError::Kind::MonotonicityViolation,
                           "phi lost positivity at x=" + detail::fmt_num((*g)[i]));
    if (i > 0 && !(fp.psi.values[i] > fp.psi.values[i - 1] && fp.phi.values[i] < fp.phi.values[i - 1]))
      throw NumericalError(NumericalError::Kind::MonotonicityViolation,
                           "phi/psi not strictly monotone near x=" + detail::fmt_num((*g)[i]));
  }
  if (!(fp.C > 0.0) || !std::isfinite(fp.C))
    throw NumericalError(NumericalError::Kind::NonConvergence, "Wronskian constant is not positive");
  return fp;
}

/// Builds the grid, choosing the truncation automatically when no bounds are given.
inline GridPtr build_grid(const DiffusionProblem& p, std::size_t n_nodes, const TruncPolicy& pol) {
  if (n_nodes < 64) throw Error("n_nodes must be at least 64");
  auto check_bounds = [&](double lo, double hi) {
    if (!(lo < hi)) throw Error("truncation requires lo < hi");
    bool lo_ok = p.left == BoundaryKind::Absorbing ? lo >= p.alpha : lo > p.alpha;
    bool hi_ok = p.right == BoundaryKind::Absorbing ? hi <= p.beta : hi < p.beta;
    if (!lo_ok || !hi_ok) throw Error("truncation bounds outside the state interval");
  };
  if (pol.bounds) {
    double lo = pol.bounds->first, hi = pol.bounds->second;
    check_bounds(lo, hi);
    return detail::make_grid(p, lo, hi, n_nodes, pol.spacing, pol.ref_point);
  }

  double anchor;
  if (pol.ref_point) anchor = *pol.ref_point;
  else if (std::isfinite(p.alpha) && std::isfinite(p.beta)) anchor = 0.5 * (p.alpha + p.beta);
  else if (std::isfinite(p.alpha)) anchor = pol.spacing == Spacing::Log ? std::max(1.0, p.alpha + 1.0) : p.alpha + 1.0;
  else if (std::isfinite(p.beta)) anchor = p.beta - 1.0;
  else anchor = p.breakpoints.empty() ? 0.0 : 0.5 * (p.breakpoints.front() + p.breakpoints.back());

  double lo, hi;
  bool lo_fixed = p.left == BoundaryKind::Absorbing;
  bool hi_fixed = p.right == BoundaryKind::Absorbing;
  double bmin = p.breakpoints.empty() ? anchor : std::min(anchor, p.breakpoints.front());
  double bmax = p.breakpoints.empty() ? anchor : std::max(anchor, p.breakpoints.back());
  lo = lo_fixed ? p.alpha : (std::isfinite(p.alpha) ? p.alpha + 0.5 * (bmin - p.alpha) : bmin - 1.0);
  hi = hi_fixed ? p.beta : (std::isfinite(p.beta) ? p.beta - 0.5 * (p.beta - bmax) : bmax + 1.0);

  const std::size_t probe_n = std::min<std::size_t>(n_nodes, 513);
  for (int it = 0; it < pol.max_extensions; ++it) {
    bool lo_good = lo_fixed, hi_good = hi_fixed;
    try {
      auto g = detail::make_grid(p, lo, hi, probe_n, pol.spacing, anchor);
      auto fp = fundamental_pair(p, g);
      std::size_t c = g->ref_index;
      if (!lo_fixed) lo_good = fp.s(0) / fp.s(c) <= pol.tail_tol;
      if (!hi_fixed) {
        std::size_t e = g->size() - 1;
        hi_good = (fp.phi.values[e] / fp.psi.values[e]) / (fp.phi.values[c] / fp.psi.values[c]) <= pol.tail_tol;
      }
    } catch (const NumericalError& e) {
      if (e.kind() != NumericalError::Kind::OverflowInExponent) throw;
      throw NumericalError(NumericalError::Kind::TruncationFailure,
                           "automatic truncation overflowed before reaching the tail tolerance");
    }
    if (lo_good && hi_good) return detail::make_grid(p, lo, hi, n_nodes, pol.spacing, pol.ref_point);
    if (!lo_good) lo = std::isfinite(p.alpha) ? p.alpha + 0.1 * (lo - p.alpha) : anchor - 2.0 * (anchor - lo);
    if (!hi_good) hi = std::isfinite(p.beta) ? p.beta - 0.1 * (p.beta - hi) : anchor + 2.0 * (hi - anchor);
  }
  throw NumericalError(NumericalError::Kind::TruncationFailure, "automatic truncation exceeded its budget");
}

namespace detail {
inline void require_span(const Grid& g, double x) {
  if (!g.in_span(x))
    throw NumericalError(NumericalError::Kind::OutOfSpan, "x=" + fmt_num(x) + " outside the grid span");
}
}  // namespace detail

/// E_x[exp(-Lambda_{T_y})].
inline double hitting_transform(const FundamentalPair& fp, double x, double y) {
  detail::require_span(*fp.grid, x);
  detail::require_span(*fp.grid, y);
  if (x == y) return 1.0;
  if (y < x) return fp.phi(x) / fp.phi(y);
  return fp.psi(x) / fp.psi(y);
}

struct TwoSided {
  double to_lo;
  double to_hi;
};

/// Discounted two-sided exit functionals of ]lo, hi[ started at x.
inline TwoSided laplace_hitting(const FundamentalPair& fp, double x, double lo, double hi) {
  detail::require_span(*fp.grid, lo);
  detail::require_span(*fp.grid, hi);
  if (!(lo <= x && x <= hi && lo < hi)) throw Error("laplace_hitting requires lo <= x <= hi");
  double phx = fp.phi(x), psx = fp.psi(x);
  double phl = fp.phi(lo), psl = fp.psi(lo);
  double phh = fp.phi(hi), psh = fp.psi(hi);
  double s_lo = psl / phl;
  double t_hi = phh / psh;
  double den = 1.0 - t_hi * s_lo;
  if (!(den > 1e-14))
    throw NumericalError(NumericalError::Kind::DegenerateBracket, "bracket denominator underflows");
  double to_lo = (phx - t_hi * psx) / phl / den;
  double to_hi = (psx - s_lo * phx) / psh / den;
  return {to_lo, to_hi};
}

/// max over nodes of |phi psi' - phi' psi - C p'| / (C p').
inline double wronskian_deviation(const FundamentalPair& fp) {
  double worst = 0.0;
  for (std::size_t i = 0; i < fp.grid->size(); ++i) {
    double w = fp.phi.values[i] * fp.psi.left_slope[i] - fp.phi.left_slope[i] * fp.psi.values[i];
    double ref = fp.C * fp.p.left_slope[i];
    worst = std::max(worst, std::fabs(w - ref) / ref);
  }
  return worst;
}

/// Max relative three-point residual of 1/2 s^2 g'' + b g' - r g over interior
/// nodes, for g in {phi, psi}.
inline double ode_residual(const DiffusionProblem& p, const FundamentalPair& fp) {
  const Grid& g = *fp.grid;
  double worst = 0.0;
  for (const GridFunction* f : {&fp.phi, &fp.psi}) {
    for (std::size_t i = 1; i + 1 < g.size(); ++i) {
      double hm = g[i] - g[i - 1], hp = g[i + 1] - g[i];
      double y0 = f->values[i - 1], y1 = f->values[i], y2 = f->values[i + 1];
      double d2 = 2.0 * (hm * y2 - (hm + hp) * y1 + hp * y0) / (hm * hp * (hm + hp));
      double d1 = (hm * hm * y2 + (hp * hp - hm * hm) * y1 - hp * hp * y0) / (hm * hp * (hm + hp));
      double x = g[i];
      double a = 0.5 * p.sigma2(x) * d2, b = p.drift(x) * d1, c = p.rate(x) * y1;
      double scale = std::fabs(a) + std::fabs(b) + std::fabs(c);
      if (scale > 0) worst = std::max(worst, std::fabs(a + b - c) / scale);
    }
  }
  return worst;
}

/// CSV columns: x, p, m_density, phi, psi, dphi, dpsi.
inline void write_fundamental_csv(const FundamentalPair& fp, std::ostream& os) {
  os.precision(17);
  os << "x,p,m_density,phi,psi,dphi,dpsi\n";
  for (std::size_t i = 0; i < fp.grid->size(); ++i) {
    os << (*fp.grid)[i] << ',' << fp.p.values[i] << ',' << fp.m_density.values[i] << ',' << fp.phi.values[i]
       << ',' << fp.psi.values[i] << ',' << fp.phi.left_slope[i] << ',' << fp.psi.left_slope[i] << '\n';
  }
}

}  // namespace odstop
