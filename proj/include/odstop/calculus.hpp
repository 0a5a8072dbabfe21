#pragma once

// The operator L on grid functions, r-potentials of signed measures, the
// Green kernel and the phi/psi representation of differences of convex
// functions.

#include <array>
#include <cmath>
#include <functional>
#include <ostream>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"
#include "model.hpp"
#include "odecore.hpp"

namespace odstop {

/// Radon measure on the span: cellwise linear density plus atoms at nodes.
/// density_right[i] is the density at x_i+ (start of cell i), density_left[i]
/// the density at x_i- (end of cell i-1).
struct SignedMeasure {
  GridPtr grid;
  std::vector<double> density_left;
  std::vector<double> density_right;
  std::vector<double> atom;  // mass at each node

  SignedMeasure() = default;
  explicit SignedMeasure(GridPtr g)
      : grid(std::move(g)), density_left(grid->size(), 0.0), density_right(grid->size(), 0.0),
        atom(grid->size(), 0.0) {}

  /// Density inside cell i at x.
  double density(std::size_t i, double x) const {
    const auto& n = grid->nodes;
    double t = (x - n[i]) / (n[i + 1] - n[i]);
    return (1 - t) * density_right[i] + t * density_left[i + 1];
  }

  std::vector<std::pair<double, double>> atoms() const {
    std::vector<std::pair<double, double>> out;
    for (std::size_t i = 0; i < atom.size(); ++i)
      if (atom[i] != 0.0) out.emplace_back((*grid)[i], atom[i]);
    return out;
  }

  void add_atom(double x, double mass) {
    std::size_t i = grid->find(x);
    if (i == grid->size()) throw Error("atom location is not a grid node");
    atom[i] += mass;
  }

  SignedMeasure scaled(double a) const {
    SignedMeasure m = *this;
    for (auto& v : m.density_left) v *= a;
    for (auto& v : m.density_right) v *= a;
    for (auto& v : m.atom) v *= a;
    return m;
  }

  SignedMeasure plus(const SignedMeasure& o) const {
    SignedMeasure m = *this;
    for (std::size_t i = 0; i < atom.size(); ++i) {
      m.density_left[i] += o.density_left[i];
      m.density_right[i] += o.density_right[i];
      m.atom[i] += o.atom[i];
    }
    return m;
  }

  /// Total variation (atoms plus density, cellwise trapezoid of |rho|).
  double total_variation() const {
    double tv = 0.0;
    for (std::size_t i = 0; i < atom.size(); ++i) tv += std::fabs(atom[i]);
    for (std::size_t i = 0; i + 1 < atom.size(); ++i)
      tv += 0.5 * ((*grid)[i + 1] - (*grid)[i]) * (std::fabs(density_right[i]) + std::fabs(density_left[i + 1]));
    return tv;
  }
};

struct Potential {
  GridFunction R;
  double left_ratio_residual = 0.0;   // |R|/phi at the left truncation, relative to its max
  double right_ratio_residual = 0.0;  // |R|/psi at the right truncation, relative to its max
};

namespace detail {

/// Coefficients at a node; nudged into the cell at an absorbing endpoint where
/// sigma may vanish.
struct Coef {
  double s2, b, r;
};

inline Coef coef_at(const DiffusionProblem& p, const Grid& g, std::size_t i) {
  double x = g[i];
  bool closed = (i == 0 && g.left_closed()) || (i + 1 == g.size() && g.right_closed());
  if (closed) {
    try {
      double s2 = p.sigma2(x);
      if (s2 > 0.0) return {s2, p.drift(x), p.rate(x)};
    } catch (const ExprError&) {
    }
    double h = (i == 0) ? (g[1] - g[0]) : (g[i - 1] - g[i]);
    x += 1e-6 * h;
  }
  return {p.sigma2(x), p.drift(x), p.rate(x)};
}

/// Gauss-Legendre 3-point samples of the Green-kernel weights, per cell.
struct Quadrature {
  static constexpr std::array<double, 3> t = {0.5 - 0.3872983346207417, 0.5, 0.5 + 0.3872983346207417};
  static constexpr std::array<double, 3> w = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};

  std::vector<double> xq, wq, kpsi, kphi;  // 3 per cell
  std::vector<double> npsi, nphi;          // per node: psi/(s2 p'), phi/(s2 p')

  static Quadrature build(const DiffusionProblem& p, const FundamentalPair& fp) {
    const Grid& g = *fp.grid;
    const std::size_t n = g.size();
    Quadrature q;
    q.xq.resize(3 * (n - 1));
    q.wq.resize(3 * (n - 1));
    q.kpsi.resize(3 * (n - 1));
    q.kphi.resize(3 * (n - 1));
    q.npsi.assign(n, 0.0);
    q.nphi.assign(n, 0.0);
    std::vector<double> L(n), dL(n);
    for (std::size_t i = 0; i < n; ++i) {
      Coef c = coef_at(p, g, i);
      L[i] = std::log(fp.p.left_slope[i]);
      dL[i] = -2.0 * c.b / c.s2;
      double den = c.s2 * fp.p.left_slope[i];
      q.npsi[i] = fp.psi.values[i] / den;
      q.nphi[i] = fp.phi.values[i] / den;
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
      double h = g[i + 1] - g[i];
      for (int k = 0; k < 3; ++k) {
        double x = g[i] + t[k] * h;
        double l, dl, ph, dph, ps, dps;
        hermite(g[i], g[i + 1], L[i], L[i + 1], dL[i], dL[i + 1], x, l, dl);
        hermite(g[i], g[i + 1], fp.phi.values[i], fp.phi.values[i + 1], fp.phi.right_slope[i],
                fp.phi.left_slope[i + 1], x, ph, dph);
        hermite(g[i], g[i + 1], fp.psi.values[i], fp.psi.values[i + 1], fp.psi.right_slope[i],
                fp.psi.left_slope[i + 1], x, ps, dps);
        double den = p.sigma2(x) * std::exp(l);
        q.xq[3 * i + k] = x;
        q.wq[3 * i + k] = w[k] * h;
        q.kpsi[3 * i + k] = ps / den;
        q.kphi[3 * i + k] = ph / den;
      }
    }
    return q;
  }
};

/// Potential of the measure with density samples rho_q at the quadrature
/// points and atoms per node.
inline Potential potential_from_samples(const FundamentalPair& fp, const Quadrature& q,
                                        const std::vector<double>& rho_q, const std::vector<double>& atom) {
  const Grid& g = *fp.grid;
  const std::size_t n = g.size();
  std::vector<double> Psi(n, 0.0), Phi(n, 0.0);
  // Psi_i: mass strictly left of x_i; Phi_i: mass on [x_i, right end]
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    Psi[i] = acc;
    acc += atom[i] * q.npsi[i];
    if (i + 1 < n)
      for (int k = 0; k < 3; ++k) acc += q.wq[3 * i + k] * rho_q[3 * i + k] * q.kpsi[3 * i + k];
  }
  acc = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    if (i + 1 < n)
      for (int k = 0; k < 3; ++k) acc += q.wq[3 * i + k] * rho_q[3 * i + k] * q.kphi[3 * i + k];
    acc += atom[i] * q.nphi[i];
    Phi[i] = acc;
  }
  const double k2 = 2.0 / fp.C;
  Potential out;
  out.R = GridFunction(fp.grid);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(Psi[i]) || !std::isfinite(Phi[i]))
      throw NumericalError(NumericalError::Kind::IntegrabilityFailure,
                           "potential integrals diverge near x=" + fmt_num(g[i]));
    double ph = fp.phi.values[i], ps = fp.psi.values[i];
    double dph = fp.phi.left_slope[i], dps = fp.psi.left_slope[i];
    out.R.values[i] = k2 * (ph * Psi[i] + ps * Phi[i]);
    out.R.left_slope[i] = k2 * (dph * Psi[i] + dps * Phi[i]);
    double psi_r = Psi[i] + atom[i] * q.npsi[i];
    double phi_r = Phi[i] - atom[i] * q.nphi[i];
    out.R.right_slope[i] = k2 * (dph * psi_r + dps * phi_r);
  }
  double max_l = 0.0, max_r = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (fp.phi.values[i] > 0) max_l = std::max(max_l, std::fabs(out.R.values[i]) / fp.phi.values[i]);
    if (fp.psi.values[i] > 0) max_r = std::max(max_r, std::fabs(out.R.values[i]) / fp.psi.values[i]);
  }
  std::size_t i0 = g.first_interior(), i1 = g.last_interior();
  out.left_ratio_residual = max_l > 0 ? std::fabs(out.R.values[i0]) / fp.phi.values[i0] / max_l : 0.0;
  out.right_ratio_residual = max_r > 0 ? std::fabs(out.R.values[i1]) / fp.psi.values[i1] / max_r : 0.0;
  return out;
}

inline std::vector<double> sample_measure(const SignedMeasure& mu, const Quadrature& q) {
  std::vector<double> rho(q.xq.size());
  for (std::size_t j = 0; j < rho.size(); ++j) rho[j] = mu.density(j / 3, q.xq[j]);
  return rho;
}

}  // namespace detail

/// The measure LF = 1/2 s^2 F'' + b F' - r F, with atoms 1/2 s^2 (F'_+ - F'_-)
/// at interior nodes.
inline SignedMeasure apply_L(const DiffusionProblem& p, const FundamentalPair& fp, const GridFunction& F) {
  const Grid& g = *fp.grid;
  const std::size_t n = g.size();
  SignedMeasure mu(fp.grid);
  std::vector<detail::Coef> c(n);
  for (std::size_t i = 0; i < n; ++i) c[i] = detail::coef_at(p, g, i);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    double h = g[i + 1] - g[i];
    double y0 = F.values[i], y1 = F.values[i + 1];
    double s0 = F.right_slope[i], s1 = F.left_slope[i + 1];
    double d = (y1 - y0) / h;
    double f2_0 = (6.0 * d - 4.0 * s0 - 2.0 * s1) / h;
    double f2_1 = (-6.0 * d + 2.0 * s0 + 4.0 * s1) / h;
    mu.density_right[i] = 0.5 * c[i].s2 * f2_0 + c[i].b * s0 - c[i].r * y0;
    mu.density_left[i + 1] = 0.5 * c[i + 1].s2 * f2_1 + c[i + 1].b * s1 - c[i + 1].r * y1;
  }
  for (std::size_t i = 1; i + 1 < n; ++i) {
    double jump = F.right_slope[i] - F.left_slope[i];
    if (jump != 0.0) mu.atom[i] = 0.5 * c[i].s2 * jump;
  }
  return mu;
}

/// R_mu(x) = (2/C) phi(x) int_(a,x) psi/(s2 p') dmu + (2/C) psi(x) int_[x,b) phi/(s2 p') dmu.
inline Potential potential(const DiffusionProblem& p, const FundamentalPair& fp, const SignedMeasure& mu) {
  auto q = detail::Quadrature::build(p, fp);
  return detail::potential_from_samples(fp, q, detail::sample_measure(mu, q), mu.atom);
}

/// Potential of the absolutely continuous measure h(x) dx.
inline Potential potential_ac(const DiffusionProblem& p, const FundamentalPair& fp,
                              const std::function<double(double)>& h) {
  auto q = detail::Quadrature::build(p, fp);
  std::vector<double> rho(q.xq.size());
  for (std::size_t j = 0; j < rho.size(); ++j) rho[j] = h(q.xq[j]);
  return detail::potential_from_samples(fp, q, rho, std::vector<double>(fp.grid->size(), 0.0));
}

inline Potential potential_ac(const DiffusionProblem& p, const FundamentalPair& fp, const expr::Expr& h) {
  expr::Compiled ch(h);
  return potential_ac(p, fp, [&](double x) { return ch(x); });
}

/// R plus the contributions of h continuing at an absorbed state.
inline Potential potential_tilde(const DiffusionProblem& p, const FundamentalPair& fp, const expr::Expr& h) {
  Potential out = potential_ac(p, fp, h);
  const Grid& g = *fp.grid;
  auto endpoint_value = [&](double x) {
    try {
      return h(x) / p.rate(x);
    } catch (const ExprError& e) {
      throw NumericalError(NumericalError::Kind::AbsorbingValueMissing,
                           std::string("h undefined at absorbing endpoint: ") + e.what());
    }
  };
  if (g.left_closed()) {
    double k = endpoint_value(g.alpha) / fp.phi.values.front();
    out.R = out.R.combine(1.0, fp.phi, k);
  }
  if (g.right_closed()) {
    double k = endpoint_value(g.beta) / fp.psi.values.back();
    out.R = out.R.combine(1.0, fp.psi, k);
  }
  return out;
}

/// u(x, s) = 2 phi(max) psi(min) / (C s2(s) p'(s)).
inline double greens_kernel(const DiffusionProblem& p, const FundamentalPair& fp, double x, double s) {
  detail::require_span(*fp.grid, x);
  detail::require_span(*fp.grid, s);
  double hi = std::max(x, s), lo = std::min(x, s);
  // p'(s) from log p' Hermite interpolation
  const Grid& g = *fp.grid;
  std::size_t i = g.cell(s);
  auto dl = [&](std::size_t k) {
    auto c = detail::coef_at(p, g, k);
    return -2.0 * c.b / c.s2;
  };
  double l, dlv;
  detail::hermite(g[i], g[i + 1], std::log(fp.p.left_slope[i]), std::log(fp.p.left_slope[i + 1]), dl(i),
                  dl(i + 1), s, l, dlv);
  return 2.0 * fp.phi(hi) * fp.psi(lo) / (fp.C * p.sigma2(s) * std::exp(l));
}

struct Representation {
  double A = 0.0;
  double B = 0.0;
  Potential R;
  double residual = 0.0;
};

/// F = A phi + R_{-LF} + B psi on the span.
inline Representation represent(const DiffusionProblem& p, const FundamentalPair& fp, const GridFunction& F) {
  const Grid& g = *fp.grid;
  Representation out;
  out.R = potential(p, fp, apply_L(p, fp, F).scaled(-1.0));
  std::size_t i0 = g.first_interior(), i1 = g.last_interior();
  double a = (F.values[i0] - out.R.R.values[i0]) / fp.phi.values[i0];
  double b = (F.values[i1] - out.R.R.values[i1]) / fp.psi.values[i1];
  double s0 = fp.s(i0);
  double t1 = fp.phi.values[i1] / fp.psi.values[i1];
  double den = 1.0 - s0 * t1;
  out.A = (a - s0 * b) / den;
  out.B = (b - t1 * a) / den;
  if (!std::isfinite(out.A) || !std::isfinite(out.B))
    throw NumericalError(NumericalError::Kind::UnboundedRatio, "F/phi or F/psi unbounded at the truncation");
  for (std::size_t i = i0; i <= i1; ++i) {
    double rec = out.A * fp.phi.values[i] + out.R.R.values[i] + out.B * fp.psi.values[i];
    out.residual = std::max(out.residual, std::fabs(F.values[i] - rec));
  }
  return out;
}

/// CSV columns: x, R.
inline void write_potential_csv(const Potential& pot, std::ostream& os) {
  os.precision(17);
  os << "x,R\n";
  for (std::size_t i = 0; i < pot.R.size(); ++i) os << (*pot.R.grid)[i] << ',' << pot.R.values[i] << '\n';
}

/// CSV columns: x, s, u.
inline void write_kernel_csv(const DiffusionProblem& p, const FundamentalPair& fp, const std::vector<double>& xs,
                             const std::vector<double>& ss, std::ostream& os) {
  os.precision(17);
  os << "x,s,u\n";
  for (double x : xs)
    for (double s : ss) os << x << ',' << s << ',' << greens_kernel(p, fp, x, s) << '\n';
}

}  // namespace odstop
