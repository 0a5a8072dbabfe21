#include <gtest/gtest.h>

#include "common.hpp"

using namespace odstop;

namespace {

GridFunction from_expr(GridPtr g, const expr::Expr& e) {
  GridFunction F(g);
  for (std::size_t i = 0; i < g->size(); ++i) {
    double x = (*g)[i];
    F.values[i] = e(x);
    F.left_slope[i] = e.derivative(x, -1);
    F.right_slope[i] = e.derivative(x, +1);
  }
  return F;
}

double density_sup(const SignedMeasure& m) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.atom.size(); ++i)
    s = std::max({s, std::fabs(m.density_left[i]), std::fabs(m.density_right[i])});
  return s;
}

}  // namespace

TEST(ApplyL, PhiIsHarmonic) {
  auto t = test::setup(test::bm(0.5), 1601, -8, 8, Spacing::Uniform, 0.0);
  auto m = apply_L(t.p, t.fp, t.fp.phi);
  // Hermite second derivative at a cell end is off by h^2/12 f'''' and phi'''' = phi
  const double h = 0.01;
  for (std::size_t i = 0; i + 1 < m.atom.size(); ++i)
    ASSERT_LE(std::fabs(m.density_right[i]), 1.2 * 0.5 * h * h / 12 * t.fp.phi.values[i]) << (*t.fp.grid)[i];
  for (std::size_t i = 1; i + 1 < m.atom.size(); ++i) EXPECT_EQ(m.atom[i], 0.0);
}

TEST(ApplyL, Ex5Candidate) {
  auto t = test::setup(test::bm(0.5), 3201, -8, 8, Spacing::Uniform, 0.0);
  auto u = from_expr(t.fp.grid, expr::parse("if(x<0, exp(x), if(x<=1, 1, 1+(x-1)^2))"));
  auto m = apply_L(t.p, t.fp, u);
  const Grid& g = *t.fp.grid;
  auto atoms = m.atoms();
  ASSERT_EQ(atoms.size(), 1u);
  EXPECT_EQ(atoms[0].first, 0.0);
  EXPECT_NEAR(atoms[0].second, -0.5, 1e-12);  // 1/2 * (0 - 1)
  for (std::size_t i = 0; i + 1 < g.size(); ++i) {
    double x = g[i];
    double want = x < 0 ? 0.0 : x < 1 ? -0.5 : -0.5 * x * (x - 2);
    double h = g[i + 1] - x;
    double tol = 1.2 * 0.5 * h * h / 12 * (x < 0 ? std::exp(std::min(x + h, 0.0)) : 0.0) + 1e-8;
    EXPECT_NEAR(m.density_right[i], want, tol) << x;
  }
}

TEST(ApplyL, AbsoluteValue) {
  auto t = test::setup(test::bm(0.5), 801, -4, 4, Spacing::Uniform, 0.0);
  auto m = apply_L(t.p, t.fp, from_expr(t.fp.grid, expr::parse("abs(x)")));
  EXPECT_NEAR(m.atom[t.fp.grid->find(0.0)], 1.0, 1e-12);
  for (std::size_t i = 0; i + 1 < m.atom.size(); ++i)
    EXPECT_NEAR(m.density_right[i], -0.5 * std::fabs((*t.fp.grid)[i]), 1e-10);
}

TEST(Potential, DeltaIsBrownianKernel) {
  auto t = test::setup(test::bm(0.5), 3201, -8, 8, Spacing::Uniform, 0.0);
  SignedMeasure mu(t.fp.grid);
  mu.add_atom(0.0, 1.0);
  auto R = potential(t.p, t.fp, mu);
  EXPECT_NEAR(R.R(1.0), 0.367879, 1e-6);
  for (std::size_t i = 0; i < t.fp.grid->size(); ++i) {
    double x = (*t.fp.grid)[i];
    if (std::fabs(x) < 5) EXPECT_LT(test::rel(R.R.values[i], std::exp(-std::fabs(x))), 1e-6);
  }
  EXPECT_LE(R.left_ratio_residual, 1e-6);
  EXPECT_LE(R.right_ratio_residual, 1e-6);
}

TEST(Potential, ZeroAndLinearity) {
  auto t = test::setup(test::bm(0.5), 1601, -8, 8);
  SignedMeasure zero(t.fp.grid);
  for (double v : potential(t.p, t.fp, zero).R.values) EXPECT_EQ(v, 0.0);

  std::mt19937_64 rng(4);
  auto m1 = test::random_measure(t.fp.grid, rng, -3, 3), m2 = test::random_measure(t.fp.grid, rng, -3, 3);
  double a = 0.7, b = -1.9;
  auto R1 = potential(t.p, t.fp, m1).R, R2 = potential(t.p, t.fp, m2).R;
  auto R = potential(t.p, t.fp, m1.scaled(a).plus(m2.scaled(b))).R;
  double scale = 0.0;
  for (std::size_t i = 0; i < R.size(); ++i) scale = std::max(scale, std::fabs(R.values[i]));
  for (std::size_t i = 0; i < R.size(); ++i)
    EXPECT_NEAR(R.values[i], a * R1.values[i] + b * R2.values[i], 1e-10 * (1 + scale));
}

TEST(Potential, PositiveMeasurePositivePotential) {
  auto t = test::setup(test::bm(0.5), 1601, -8, 8);
  std::mt19937_64 rng(8);
  for (int k = 0; k < 20; ++k) {
    auto m = test::random_measure(t.fp.grid, rng, -3, 3);
    for (auto& v : m.density_left) v = std::fabs(v);
    for (auto& v : m.density_right) v = std::fabs(v);
    for (auto& v : m.atom) v = std::fabs(v);
    auto R = potential(t.p, t.fp, m);
    for (double v : R.R.values) ASSERT_GE(v, 0.0);
    // outside the support R/phi and R/psi scale like e^{2x} and e^{-2x}
    EXPECT_LE(R.left_ratio_residual, std::exp(-10.0));
    EXPECT_LE(R.right_ratio_residual, std::exp(-10.0));
  }
}

TEST(Potential, RoundTripRandomMeasures) {
  auto t = test::setup(test::bm(0.5), 3201, -8, 8);
  std::mt19937_64 rng(12);
  for (int k = 0; k < 10; ++k) {
    auto e = test::round_trip(t.p, t.fp, test::random_measure(t.fp.grid, rng, -3, 3));
    EXPECT_LE(e.atom, 1e-4);
    EXPECT_LE(e.spurious, 1e-4);
    EXPECT_LE(e.density, 1e-4);
  }
}

TEST(Potential, RoundTripVariableCoefficients) {
  auto s = test::bm(0.5);
  s.b = "0.3 - 0.1*x/(1 + x^2)";
  s.sigma = "1 + 0.2*exp(-x^2)";
  s.r = "0.5 + 0.25*x^2/(1 + x^2)";
  auto t = test::setup(s, 3201, -10, 10);
  std::mt19937_64 rng(13);
  for (int k = 0; k < 5; ++k) {
    auto e = test::round_trip(t.p, t.fp, test::random_measure(t.fp.grid, rng, -3, 3));
    EXPECT_LE(e.atom, 1e-3);
    EXPECT_LE(e.density, 1e-3);
  }
}

TEST(PotentialAc, ConstantRate) {
  auto t = test::setup(test::bm(0.5), 4001, -20, 20, Spacing::Uniform, 0.0);
  auto R = potential_ac(t.p, t.fp, expr::parse("1"));
  for (std::size_t i = 0; i < t.fp.grid->size(); ++i)
    if (std::fabs((*t.fp.grid)[i]) <= 5) EXPECT_NEAR(R.R.values[i], 2.0, 1e-6);
}

TEST(PotentialAc, RateTimesPhi) {
  // h = r phi on the truncated span [L, U]; phi = e^{-x}
  auto t = test::setup(test::bm(0.5), 3201, -8, 8, Spacing::Uniform, 0.0);
  auto R = potential_ac(t.p, t.fp, [&](double x) { return 0.5 * t.fp.phi(x); });
  const double L = -8, U = 8;
  for (std::size_t i = 0; i < t.fp.grid->size(); ++i) {
    double x = (*t.fp.grid)[i];
    double want = 0.5 * (x - L) * std::exp(-x) + 0.25 * std::exp(-x) - 0.25 * std::exp(x - 2 * U);
    EXPECT_LT(test::rel(R.R.values[i], want), 1e-6) << x;
  }
}

TEST(PotentialAc, GaussianBumpMatchesKernelQuadrature) {
  auto t = test::setup(test::bm(0.5), 3201, -8, 8, Spacing::Uniform, 0.0);
  auto R = potential_ac(t.p, t.fp, expr::parse("exp(-x^2)"));
  for (std::size_t i = 0; i < t.fp.grid->size(); ++i) {
    double x = (*t.fp.grid)[i];
    if (std::fabs(x) > 4) continue;
    // int e^{-|x-s|} e^{-s^2} ds in closed form
    double want = std::sqrt(M_PI) / 2 * std::exp(0.25) *
                  (std::exp(-x) * std::erfc(0.5 - x) + std::exp(x) * std::erfc(0.5 + x));
    EXPECT_LT(test::rel(R.R.values[i], want), 1e-6) << x;
  }
}

TEST(PotentialAc, AgreesWithKernelOnNodes) {
  auto s = test::bm(0.5);
  s.b = "-0.5*x";
  s.r = "0.4 + 0.1*x^2/(1 + x^2)";
  auto t = test::setup(s, 801, -6, 6, Spacing::Uniform, 0.0);
  auto h = [](double x) { return std::exp(-x * x) * (1 + 0.5 * x); };
  auto R = potential_ac(t.p, t.fp, h);
  const Grid& g = *t.fp.grid;
  for (double x : {-2.0, -0.5, 0.0, 1.0, 2.5}) {
    // Simpson over a fine partition, split at x where the kernel has a kink
    auto simpson = [&](double a, double b) {
      const int n = 4000;
      double hh = (b - a) / n, acc = 0.0;
      for (int k = 0; k <= n; ++k) {
        double sx = a + k * hh;
        double w = (k == 0 || k == n) ? 1 : (k % 2 ? 4 : 2);
        acc += w * greens_kernel(t.p, t.fp, x, sx) * h(sx);
      }
      return acc * hh / 3;
    };
    double want = simpson(g.left_trunc(), x) + simpson(x, g.right_trunc());
    EXPECT_LT(test::rel(R.R(x), want), 1e-6) << x;
  }
}

TEST(PotentialTilde, InaccessibleEndsUnchanged) {
  auto t = test::setup(test::bm(0.5), 801, -8, 8);
  auto h = expr::parse("exp(-x^2)");
  auto a = potential_ac(t.p, t.fp, h), b = potential_tilde(t.p, t.fp, h);
  for (std::size_t i = 0; i < a.R.size(); ++i) EXPECT_EQ(a.R.values[i], b.R.values[i]);
}

TEST(PotentialTilde, AbsorbedConstantRunningReward) {
  ProblemSpec s = test::bm(0.5, "1");
  s.alpha = 0;
  s.left = BoundaryKind::Absorbing;
  auto t = test::setup(s, 2501, 0, 25, Spacing::Uniform, 1.0);
  auto R = potential_ac(t.p, t.fp, expr::parse("1"));
  auto Rt = potential_tilde(t.p, t.fp, expr::parse("1"));
  double phi0 = t.fp.phi.values[0];
  for (std::size_t i = 0; i < t.fp.grid->size(); ++i) {
    double x = (*t.fp.grid)[i];
    if (x > 10) continue;
    EXPECT_NEAR(Rt.R.values[i], 2.0, 1e-6) << x;
    EXPECT_NEAR(Rt.R.values[i], R.R.values[i] + 2.0 * t.fp.phi.values[i] / phi0, 1e-12);
  }
  EXPECT_EQ(R.R.values[0], 0.0);

  auto zero_at_end = potential_tilde(t.p, t.fp, expr::parse("x*exp(-x)"));
  auto plain = potential_ac(t.p, t.fp, expr::parse("x*exp(-x)"));
  for (std::size_t i = 0; i < plain.R.size(); ++i) EXPECT_EQ(zero_at_end.R.values[i], plain.R.values[i]);

  try {
    potential_tilde(t.p, t.fp, expr::parse("ln(x)"));
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_EQ(e.kind(), NumericalError::Kind::AbsorbingValueMissing);
  }
}

TEST(GreensKernel, BrownianClosedForm) {
  for (double r : {0.25, 0.5, 1.0}) {
    auto t = test::setup(test::bm(r), 1601, -8, 8, Spacing::Uniform, 0.0);
    double k = std::sqrt(2 * r);
    EXPECT_LT(test::rel(greens_kernel(t.p, t.fp, 0, 0), 1 / k), 1e-6);
    for (double x : {-1.3, 0.2, 2.0})
      for (double s : {-0.4, 0.9})
        EXPECT_LT(test::rel(greens_kernel(t.p, t.fp, x, s), std::exp(-k * std::fabs(x - s)) / k), 1e-6);
  }
}

TEST(GreensKernel, SpeedSymmetryAndDelta) {
  auto s = test::bm(0.5);
  s.b = "-0.5*x";
  s.sigma = "1 + 0.3*exp(-x^2)";
  auto t = test::setup(s, 1201, -6, 6, Spacing::Uniform, 0.0);
  const Grid& g = *t.fp.grid;
  for (std::size_t a : {200u, 450u, 600u, 777u})
    for (std::size_t b : {300u, 600u, 901u}) {
      double x = g[a], y = g[b];
      double uxy = greens_kernel(t.p, t.fp, x, y) * t.p.sigma2(y) * t.fp.pprime(b);
      double uyx = greens_kernel(t.p, t.fp, y, x) * t.p.sigma2(x) * t.fp.pprime(a);
      EXPECT_LT(test::rel(uxy, uyx), 1e-10);
    }
  SignedMeasure mu(t.fp.grid);
  mu.add_atom(g[450], 1.0);
  auto R = potential(t.p, t.fp, mu);
  for (std::size_t i = 0; i < g.size(); i += 37) EXPECT_LT(test::rel(R.R.values[i], greens_kernel(t.p, t.fp, g[i], g[450])), 1e-10);
}

TEST(Represent, HarmonicCombination) {
  // the numerical L of a harmonic function is O(h^2), so A and B carry an O(h^2) error
  double errA[2], errB[2];
  std::size_t n[2] = {1601, 3201};
  for (int k = 0; k < 2; ++k) {
    auto t = test::setup(test::bm(0.5), n[k], -8, 8, Spacing::Uniform, 0.0);
    const double h = 16.0 / (n[k] - 1);
    auto F = t.fp.phi.scaled(3).combine(1, t.fp.psi, 5);
    auto rep = represent(t.p, t.fp, F);
    double scale = 0.0;
    for (double v : F.values) scale = std::max(scale, v);
    errA[k] = test::rel(rep.A, 3.0);
    errB[k] = test::rel(rep.B, 5.0);
    EXPECT_LE(errA[k], h * h / 12);
    EXPECT_LE(errB[k], h * h / 12);
    EXPECT_LE(rep.residual, h * h / 12 * scale);
  }
  EXPECT_GE(std::log2(errA[0] / errA[1]), 1.9);
  EXPECT_GE(std::log2(errB[0] / errB[1]), 1.9);
}

TEST(Represent, PotentialHasNoHarmonicPart) {
  auto t = test::setup(test::bm(0.5), 3201, -8, 8, Spacing::Uniform, 0.0);
  auto R = potential_ac(t.p, t.fp, expr::parse("exp(-x^2)")).R;
  auto rep = represent(t.p, t.fp, R);
  EXPECT_NEAR(rep.A, 0.0, 1e-6);
  EXPECT_NEAR(rep.B, 0.0, 1e-6);
  EXPECT_LE(rep.residual, 1e-6);
}

TEST(Represent, Ex3ValueFunction) {
  auto a = test::solve_fixture("ex3");
  auto rep = represent(a.problem, a.fp, a.sol.v);
  EXPECT_NEAR(rep.A, 0.0, 1e-6);
  const double h = 16.0 / (a.fp.grid->size() - 1);
  EXPECT_LE(rep.residual, h * h / 12 * 2.0);
}
