#pragma once

// Shared helpers: the example problems are read from the fixture configs.

#include <cmath>
#include <random>
#include <string>

#include <odstop/cli.hpp>

namespace odstop::test {

inline std::string fixture_path(const std::string& name) { return std::string(ODSTOP_FIXTURES) + "/" + name + ".cfg"; }

inline RunConfig fixture(const std::string& name) { return load_config(fixture_path(name)); }

inline cli::SolveArtifacts solve_fixture(const std::string& name) { return cli::run_solve(fixture(name)); }

/// Problem and fundamental pair on an explicit grid.
struct Setup {
  DiffusionProblem p;
  FundamentalPair fp;
};

inline Setup setup(const ProblemSpec& s, std::size_t n, double lo, double hi, Spacing sp = Spacing::Uniform,
                   std::optional<double> ref = {}) {
  Setup out;
  out.p = build_problem(s);
  TruncPolicy pol;
  pol.bounds = std::make_pair(lo, hi);
  pol.spacing = sp;
  pol.ref_point = ref;
  out.fp = fundamental_pair(out.p, build_grid(out.p, n, pol));
  return out;
}

/// Brownian motion with constant rate r on the line.
inline ProblemSpec bm(double r, const std::string& f = "0") {
  ProblemSpec s;
  s.r = expr::detail::format_double(r);
  s.f = f;
  return s;
}

inline double rel(double a, double b) { return std::fabs(a - b) / std::max(std::fabs(b), 1e-300); }

// ex5 closed form
inline const double kAl = 1 + std::sqrt(2.0) + 2 * std::log(std::sqrt(2.0) - 1);
inline const double kAr = 1 + std::sqrt(2.0);

inline double ex3_value(double x) {
  const double e = std::exp(1.0);
  if (x <= 0) return std::exp(x);
  if (x <= 1) return (e - 2) / (e - 1 / e) * std::exp(-x) + (2 - 1 / e) / (e - 1 / e) * std::exp(x);
  return 2.0;
}

inline double ex5_value(double x) {
  if (x < 0) return std::exp(x);
  if (x <= kAl) return 1.0;
  if (x < kAr) return 0.5 * std::exp(kAl - x) + 0.5 * std::exp(x - kAl);
  return 1 + (x - 1) * (x - 1);
}

/// At most 5 atoms at nodes inside [lo, hi] plus a density made of 1-3 Gaussian bumps.
inline SignedMeasure random_measure(GridPtr g, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<> U(-1, 1), C(lo, hi), W(0.3, 1.0);
  SignedMeasure m(g);
  int bumps = std::uniform_int_distribution<int>(1, 3)(rng);
  for (int k = 0; k < bumps; ++k) {
    double a = U(rng), c = C(rng), w = W(rng);
    for (std::size_t i = 0; i < g->size(); ++i) {
      double x = (*g)[i];
      double d = a * std::exp(-(x - c) * (x - c) / (2 * w * w));
      m.density_left[i] += d;
      m.density_right[i] += d;
    }
  }
  int atoms = std::uniform_int_distribution<int>(0, 5)(rng);
  for (int k = 0; k < atoms; ++k) {
    double mass = U(rng);
    if (std::fabs(mass) < 0.1) mass = std::copysign(0.1, mass);
    m.add_atom((*g)[g->nearest(C(rng))], mass);
  }
  return m;
}

struct RoundTripError {
  double atom = 0.0;     // worst relative atom error
  double spurious = 0.0; // largest recovered atom where none was placed, relative to the largest atom
  double density = 0.0;  // L1 density error relative to the L1 norm of the density
};

/// Compares apply_L(potential(mu)) with -mu.
inline RoundTripError round_trip(const DiffusionProblem& p, const FundamentalPair& fp, const SignedMeasure& mu) {
  const Grid& g = *fp.grid;
  auto back = apply_L(p, fp, potential(p, fp, mu).R);
  RoundTripError e;
  double amax = 0.0;
  for (double a : mu.atom) amax = std::max(amax, std::fabs(a));
  for (std::size_t i = 1; i + 1 < g.size(); ++i) {
    if (mu.atom[i] != 0.0) e.atom = std::max(e.atom, std::fabs(back.atom[i] + mu.atom[i]) / std::fabs(mu.atom[i]));
    else if (amax > 0) e.spurious = std::max(e.spurious, std::fabs(back.atom[i]) / amax);
  }
  double err = 0.0, norm = 0.0;
  for (std::size_t i = 0; i + 1 < g.size(); ++i) {
    double h = g[i + 1] - g[i];
    err += 0.5 * h * (std::fabs(back.density_right[i] + mu.density_right[i]) +
                      std::fabs(back.density_left[i + 1] + mu.density_left[i + 1]));
    norm += 0.5 * h * (std::fabs(mu.density_right[i]) + std::fabs(mu.density_left[i + 1]));
  }
  e.density = norm > 0 ? err / norm : err;
  return e;
}

/// Candidate A phi + B psi + R_mu (mu >= 0); odd k also subtract R_nu for a Gaussian bump nu and
/// add enough phi + psi to stay nonnegative. `truth` is max R_{(nu - mu)^+} / F, computed from
/// the known measures.
struct Candidate {
  GridFunction F;
  double truth = 0.0;
};

inline Candidate excessivity_candidate(const DiffusionProblem& p, const FundamentalPair& fp, std::mt19937_64& rng,
                                       int k) {
  std::uniform_real_distribution<> U(0, 1);
  auto mu = random_measure(fp.grid, rng, -3, 3);
  for (auto& v : mu.density_left) v = std::fabs(v);
  for (auto& v : mu.density_right) v = std::fabs(v);
  for (auto& v : mu.atom) v = std::fabs(v);
  Candidate c;
  c.F = fp.phi.scaled(U(rng)).combine(1, fp.psi, U(rng)).combine(1, potential(p, fp, mu).R, 1);
  if (k % 2 == 0) return c;
  const Grid& g = *fp.grid;
  SignedMeasure nu(fp.grid), neg(fp.grid);
  double x0 = -3 + 6 * U(rng), w = 0.2 + 0.3 * U(rng), amp = 0.5 + 1.5 * U(rng);
  for (std::size_t i = 0; i < g.size(); ++i) {
    double d = amp * std::exp(-(g[i] - x0) * (g[i] - x0) / (2 * w * w));
    nu.density_left[i] = nu.density_right[i] = d;
    neg.density_left[i] = std::max(0.0, d - mu.density_left[i]);
    neg.density_right[i] = std::max(0.0, d - mu.density_right[i]);
  }
  c.F = c.F.combine(1, potential(p, fp, nu).R, -1);
  double lift = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) lift = std::max(lift, -c.F.values[i] / (fp.phi.values[i] + fp.psi.values[i]));
  if (lift > 0) c.F = c.F.combine(1, fp.phi.combine(1, fp.psi, 1), 1.05 * lift + 1e-3);
  auto Rn = potential(p, fp, neg).R;
  for (std::size_t i = g.first_interior(); i <= g.last_interior(); ++i)
    c.truth = std::max(c.truth, Rn.values[i] / c.F.values[i]);
  return c;
}

}  // namespace odstop::test
