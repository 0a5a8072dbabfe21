#pragma once

// r-excessivity of a candidate grid function by the measure test and by the
// concavity of F/phi in s = psi/phi.
//
// Both tests measure a violation the same way: the potential of the positive
// part of LF, relative to F, maximized over the nodes. That number does not
// depend on how phi and psi are normalized.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "calculus.hpp"

namespace odstop {

struct Violation {
  double x = 0.0;
  double magnitude = 0.0;
};

struct ExcessivityReport {
  bool dc_ok = true;
  bool measure_ok = true;
  Violation worst_violation;
  bool boundary_ok = true;
  bool concave_test_ok = true;
  Violation concave_violation;
  bool verdict = true;
  /// Span of the positive part of LF when the measure test fails.
  std::optional<std::pair<double, double>> violation_support;
  /// Non-empty when the two tests disagree.
  std::string diagnostic;
};

struct EndpointValues {
  std::optional<double> alpha;
  std::optional<double> beta;
};

struct ConcavityResult {
  bool increasing_ok = true;
  double worst_drop = 0.0;
  double x = 0.0;
};

namespace detail {

inline double f_scale(const GridFunction& F) {
  double m = 0.0;
  for (double v : F.values) m = std::max(m, std::fabs(v));
  return m;
}

inline Violation relative_violation(const FundamentalPair& fp, const GridFunction& F, const std::vector<double>& R) {
  const Grid& g = *fp.grid;
  double floor = 1e-12 * f_scale(F);
  Violation v;
  for (std::size_t i = g.first_interior(); i <= g.last_interior(); ++i) {
    double m = R[i] / std::max(F.values[i], floor > 0 ? floor : 1e-300);
    if (m > v.magnitude) v = {g[i], m};
  }
  return v;
}

}  // namespace detail

/// Discrete concavity of F/phi against s = psi/phi.
inline ConcavityResult transformed_concavity_check(const FundamentalPair& fp, const GridFunction& F,
                                                   double tol = 1e-3) {
  const Grid& g = *fp.grid;
  std::size_t i0 = g.first_interior(), i1 = g.last_interior();
  const std::size_t n = g.size();
  std::vector<double> P(n, 0.0);
  std::vector<double> D;
  for (std::size_t j = i0; j < i1; ++j) {
    double G0 = F.values[j] / fp.phi.values[j], G1 = F.values[j + 1] / fp.phi.values[j + 1];
    D.push_back((G1 - G0) / (fp.s(j + 1) - fp.s(j)));
  }
  for (std::size_t i = i0 + 1; i < i1; ++i) P[i] = std::max(0.0, D[i - i0] - D[i - i0 - 1]);
  // V_k = phi_k sum_{i<=k} P_i s_i + psi_k sum_{i>k} P_i
  std::vector<double> left(n, 0.0), right(n, 0.0), V(n, 0.0);
  double acc = 0.0;
  for (std::size_t k = i0; k <= i1; ++k) {
    acc += P[k] * fp.s(k);
    left[k] = acc;
  }
  acc = 0.0;
  for (std::size_t k = i1 + 1; k-- > i0;) {
    right[k] = acc;
    acc += P[k];
  }
  for (std::size_t k = i0; k <= i1; ++k) V[k] = fp.phi.values[k] * left[k] + fp.psi.values[k] * right[k];
  Violation v = detail::relative_violation(fp, F, V);
  return {v.magnitude <= tol, v.magnitude, v.x};
}

inline ExcessivityReport check_excessive(const DiffusionProblem& p, const FundamentalPair& fp, const GridFunction& F,
                                         const EndpointValues& at_absorbing = {}, double tol = 1e-3) {
  const Grid& g = *fp.grid;
  const std::size_t n = g.size();
  const double scale = detail::f_scale(F);
  for (std::size_t i = 0; i < n; ++i)
    if (F.values[i] < -1e-12 * std::max(1.0, scale))
      throw NumericalError(NumericalError::Kind::NegativeCandidate,
                           "candidate is negative at x=" + detail::fmt_num(g[i]));

  ExcessivityReport rep;
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(F.values[i]) || !std::isfinite(F.left_slope[i]) || !std::isfinite(F.right_slope[i]))
      rep.dc_ok = false;

  // interior limits at closed endpoints (quadratic extrapolation)
  std::optional<double> lim_a, lim_b;
  if (g.left_closed() && n > 3) {
    double x0 = g[0], x1 = g[1], x2 = g[2], x3 = g[3];
    double y1 = F.values[1], y2 = F.values[2], y3 = F.values[3];
    lim_a = y1 * (x0 - x2) * (x0 - x3) / ((x1 - x2) * (x1 - x3)) + y2 * (x0 - x1) * (x0 - x3) / ((x2 - x1) * (x2 - x3)) +
            y3 * (x0 - x1) * (x0 - x2) / ((x3 - x1) * (x3 - x2));
  }
  if (g.right_closed() && n > 3) {
    std::size_t e = n - 1;
    double x0 = g[e], x1 = g[e - 1], x2 = g[e - 2], x3 = g[e - 3];
    double y1 = F.values[e - 1], y2 = F.values[e - 2], y3 = F.values[e - 3];
    lim_b = y1 * (x0 - x2) * (x0 - x3) / ((x1 - x2) * (x1 - x3)) + y2 * (x0 - x1) * (x0 - x3) / ((x2 - x1) * (x2 - x3)) +
            y3 * (x0 - x1) * (x0 - x2) / ((x3 - x1) * (x3 - x2));
  }

  if (rep.dc_ok) {
    SignedMeasure mu = apply_L(p, fp, F);
    // cells touching a closed endpoint carry the endpoint jump, not LF
    if (g.left_closed()) mu.density_right[0] = mu.density_left[1] = 0.0;
    if (g.right_closed()) mu.density_right[n - 2] = mu.density_left[n - 1] = 0.0;
    auto q = detail::Quadrature::build(p, fp);
    std::vector<double> rho = detail::sample_measure(mu, q);
    double max_rho = 0.0, max_atom = 0.0;
    for (auto& r : rho) {
      r = std::max(r, 0.0);
      max_rho = std::max(max_rho, r);
    }
    std::vector<double> atoms(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      atoms[i] = std::max(mu.atom[i], 0.0);
      max_atom = std::max(max_atom, atoms[i]);
    }
    Potential Rp = detail::potential_from_samples(fp, q, rho, atoms);
    rep.worst_violation = detail::relative_violation(fp, F, Rp.R.values);
    rep.measure_ok = rep.worst_violation.magnitude <= tol;
    if (!rep.measure_ok) {
      double lo = kInf, hi = -kInf;
      for (std::size_t j = 0; j < rho.size(); ++j)
        if (rho[j] > 1e-3 * max_rho) {
          lo = std::min(lo, g[j / 3]);
          hi = std::max(hi, g[j / 3 + 1]);
        }
      for (std::size_t i = 0; i < n; ++i)
        if (atoms[i] > 1e-3 * max_atom && max_atom > 0) {
          lo = std::min(lo, g[i]);
          hi = std::max(hi, g[i]);
        }
      if (lo <= hi) rep.violation_support = std::make_pair(lo, hi);
    }
  } else {
    rep.measure_ok = false;
  }

  double btol = tol * std::max(scale, 1e-300);
  if (g.left_closed()) {
    double fa = at_absorbing.alpha ? *at_absorbing.alpha : F.values[0];
    if (lim_a && fa > *lim_a + btol) rep.boundary_ok = false;
  }
  if (g.right_closed()) {
    double fb = at_absorbing.beta ? *at_absorbing.beta : F.values[n - 1];
    if (lim_b && fb > *lim_b + btol) rep.boundary_ok = false;
  }

  auto cc = transformed_concavity_check(fp, F, tol);
  rep.concave_test_ok = cc.increasing_ok;
  rep.concave_violation = {cc.x, cc.worst_drop};
  rep.verdict = rep.dc_ok && rep.measure_ok && rep.boundary_ok;
  if (rep.concave_test_ok != rep.measure_ok) {
    rep.diagnostic = "measure test and concavity test disagree (measure violation " +
                     detail::fmt_num(rep.worst_violation.magnitude) + ", concavity violation " +
                     detail::fmt_num(cc.worst_drop) + ")";
  }
  return rep;
}

}  // namespace odstop
