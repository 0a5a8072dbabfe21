#pragma once

// Euler-Maruyama simulation of the diffusion with discounting, stopping
// strategies (including localized and pasted ones) and Monte Carlo checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <boost/random/normal_distribution.hpp>

#include "calculus.hpp"
#include "solver.hpp"

namespace odstop::mc {

struct SimConfig {
  double dt = 1e-3;
  std::size_t n_paths = 10000;
  std::uint64_t seed = 1;
  double max_time = 100.0;
  bool bridge_correction = true;
  bool antithetic = false;
  unsigned threads = 0;  // 0: hardware concurrency
};

struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n_effective = 0;
  std::size_t n_paths = 0;
  double dt = 0.0;
  std::uint64_t seed = 0;
  /// Bound on the contribution lost to the max_time cut.
  double truncation_bound = 0.0;
  std::vector<std::string> warnings;
};

struct Interval {
  double lo;
  double hi;
};

struct StopAtSet {
  std::vector<Interval> intervals;  // closed, sorted, disjoint
};
struct HitLevel {
  double y;
};
struct TwoSided {
  double lo;
  double hi;
};
struct Never {};
struct Immediate {};
struct Pasted;

using Strategy = std::variant<StopAtSet, HitLevel, TwoSided, Never, Immediate, std::shared_ptr<const Pasted>>;

struct Pasted {
  Strategy base;
  std::map<double, Strategy> table;
};

namespace detail {

/// The strategy's stopping set as sorted disjoint closed intervals.
inline std::vector<Interval> stop_set(const Strategy& s) {
  struct V {
    std::vector<Interval> operator()(const StopAtSet& a) const { return a.intervals; }
    std::vector<Interval> operator()(const HitLevel& h) const { return {{h.y, h.y}}; }
    std::vector<Interval> operator()(const TwoSided& t) const { return {{-kInf, t.lo}, {t.hi, kInf}}; }
    std::vector<Interval> operator()(const Never&) const { return {}; }
    std::vector<Interval> operator()(const Immediate&) const { return {{-kInf, kInf}}; }
    std::vector<Interval> operator()(const std::shared_ptr<const Pasted>& p) const { return stop_set(p->base); }
  };
  return std::visit(V{}, s);
}

inline void normalize(std::vector<Interval>& iv) {
  std::sort(iv.begin(), iv.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  std::vector<Interval> out;
  for (const auto& i : iv) {
    if (!out.empty() && i.lo <= out.back().hi) out.back().hi = std::max(out.back().hi, i.hi);
    else out.push_back(i);
  }
  iv = std::move(out);
}

/// Open gap (L, U) of the complement containing x; nullopt when x is in the set.
inline std::optional<Interval> gap(const std::vector<Interval>& set, double x) {
  double L = -kInf, U = kInf;
  for (const auto& i : set) {
    if (x >= i.lo && x <= i.hi) return std::nullopt;
    if (i.hi < x) L = std::max(L, i.hi);
    if (i.lo > x) U = std::min(U, i.lo);
  }
  return Interval{L, U};
}

}  // namespace detail

/// Per-path result of running a strategy.
struct PathOutcome {
  double discount = 0.0;  // e^{-Lambda_tau}; 0 when never stopped
  double x = 0.0;         // state at tau (or at the cut)
  double integral = 0.0;  // int_0^{tau} e^{-Lambda} h dt when requested
  double cut_discount = 0.0;  // e^{-Lambda} at the cut when not stopped
  bool stopped = false;
  bool absorbed = false;
  double x_min = 0.0, x_max = 0.0;
  double r_max = 0.0;
};

/// Lazily simulated batch: strategies are evaluated on the same random streams.
struct PathBatch {
  DiffusionProblem prob;
  double x0 = 0.0;
  SimConfig cfg;
};

inline PathBatch simulate_paths(const DiffusionProblem& prob, double x0, const SimConfig& cfg) {
  if (!(cfg.dt > 0.0) || cfg.n_paths == 0 || !(cfg.max_time > 0.0))
    throw ValidationError(ValidationError::Kind::InvalidConfig, cfg.dt, cfg.dt,
                          "simulation needs dt > 0, n_paths > 0 and max_time > 0");
  if (!(x0 > prob.alpha && x0 < prob.beta))
    throw ValidationError(ValidationError::Kind::InvalidInterval, x0, x0, "x0 must be interior");
  return {prob, x0, cfg};
}

namespace detail {

constexpr double kDiscountCut = 27.631021115928547;  // -ln 1e-12

struct Coeffs {
  const DiffusionProblem& p;
  bool cb, cs, cr;
  double b0, s0, r0;
  explicit Coeffs(const DiffusionProblem& q)
      : p(q), cb(q.cb.is_constant()), cs(q.csigma.is_constant()), cr(q.cr.is_constant()),
        b0(cb ? q.cb(0.0) : 0.0), s0(cs ? q.csigma(0.0) : 0.0), r0(cr ? q.cr(0.0) : 0.0) {}
  double b(double x) const { return cb ? b0 : p.cb(x); }
  double s(double x) const { return cs ? s0 : p.csigma(x); }
  double r(double x) const { return cr ? r0 : p.cr(x); }
};

struct Stream {
  std::mt19937_64 eng;
  boost::random::normal_distribution<double> normal;  // ziggurat
  std::uniform_real_distribution<double> unif;
  double sign;
  Stream(std::uint64_t seed, std::uint64_t index, double sgn)
      : eng(make(seed, index)), normal(0.0, 1.0), unif(0.0, 1.0), sign(sgn) {}
  static std::mt19937_64 make(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq sq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                     static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x6f64u};
    return std::mt19937_64(sq);
  }
  double z() { return sign * normal(eng); }
  double u() {
    double v = unif(eng);
    return sign > 0 ? v : 1.0 - v;
  }
};

struct State {
  double x, lam, t;
};

enum class PhaseEnd { Stopped, Absorbed, Cut };

/// Runs until the path leaves (L, U), is absorbed, or is cut.
template <class H>
PhaseEnd run_phase(const Coeffs& c, const SimConfig& cfg, Stream& rng, State& st, double L, double U,
                   PathOutcome& out, const H* h) {
  const DiffusionProblem& p = c.p;
  const double dt = cfg.dt, sdt = std::sqrt(dt);
  const bool absA = p.left == BoundaryKind::Absorbing, absB = p.right == BoundaryKind::Absorbing;
  // an absorbing endpoint acts as an extra exit level
  double Le = L, Ue = U;
  if (absA) Le = std::max(Le, p.alpha);
  if (absB) Ue = std::min(Ue, p.beta);
  double x = st.x, lam = st.lam, t = st.t;
  double rx = c.r(x);
  double hx = h ? (*h)(x) : 0.0;
  const bool finL = std::isfinite(Le), finU = std::isfinite(Ue);
  auto finish = [&](double level, double lam_at, double frac, double r_end, double h_end) {
    if (h) {
      double dl = lam_at - lam;
      double hb = 0.5 * (hx + h_end);
      out.integral += std::exp(-lam) * hb * (dl > 1e-12 ? -std::expm1(-dl) / dl : 1.0 - 0.5 * dl) * frac * dt;
    }
    (void)r_end;
    st = {level, lam_at, t + frac * dt};
  };
  for (;;) {
    if (t >= cfg.max_time || lam > kDiscountCut) {
      st = {x, lam, t};
      return PhaseEnd::Cut;
    }
    double sx = c.s(x);
    double xn = x + c.b(x) * dt + sx * sdt * rng.z();
    if (!std::isfinite(xn) || (!absA && xn <= p.alpha) || (!absB && xn >= p.beta))
      throw NumericalError(NumericalError::Kind::StepSizeUnstable,
                           "Euler step left the state interval from x=" + odstop::detail::fmt_num(x));
    out.x_min = std::min(out.x_min, xn);
    out.x_max = std::max(out.x_max, xn);
    if (finL && xn <= Le) {
      double frac = (x - Le) / (x - xn);
      double rl = c.r(Le);
      double lam_at = lam + 0.5 * (rx + rl) * frac * dt;
      finish(Le, lam_at, frac, rl, h ? (*h)(Le) : 0.0);
      return (absA && Le == p.alpha) ? PhaseEnd::Absorbed : PhaseEnd::Stopped;
    }
    if (finU && xn >= Ue) {
      double frac = (Ue - x) / (xn - x);
      double ru = c.r(Ue);
      double lam_at = lam + 0.5 * (rx + ru) * frac * dt;
      finish(Ue, lam_at, frac, ru, h ? (*h)(Ue) : 0.0);
      return (absB && Ue == p.beta) ? PhaseEnd::Absorbed : PhaseEnd::Stopped;
    }
    double rn = c.r(xn);
    out.r_max = std::max(out.r_max, rn);
    double dl = 0.5 * (rx + rn) * dt;
    if (cfg.bridge_correction && (finL || finU)) {
      // crossing probability exp(-2 d1 d2 / (s^2 dt)), skipped when below e^-40
      double s2dt = sx * sx * dt;
      double pl = 0.0, pu = 0.0;
      if (finL) {
        double q = (x - Le) * (xn - Le);
        if (q < 20.0 * s2dt) pl = std::exp(-2.0 * q / s2dt);
      }
      if (finU) {
        double q = (Ue - x) * (Ue - xn);
        if (q < 20.0 * s2dt) pu = std::exp(-2.0 * q / s2dt);
      }
      if (pl > 0.0 || pu > 0.0) {
        double u = rng.u();
        if (u < pl + pu) {
          bool low = u < pl;
          double lv = low ? Le : Ue;
          double lam_at = lam + 0.5 * dl;
          finish(lv, lam_at, 0.5, c.r(lv), h ? (*h)(lv) : 0.0);
          bool abs = low ? (absA && Le == p.alpha) : (absB && Ue == p.beta);
          return abs ? PhaseEnd::Absorbed : PhaseEnd::Stopped;
        }
      }
    }
    double hn = h ? (*h)(xn) : 0.0;
    if (h) {
      double hb = 0.5 * (hx + hn);
      out.integral += std::exp(-lam) * hb * (dl > 1e-12 ? -std::expm1(-dl) / dl : 1.0 - 0.5 * dl) * dt;
    }
    x = xn;
    lam += dl;
    t += dt;
    rx = rn;
    hx = hn;
  }
}

/// Runs a (possibly pasted) strategy on one path.
template <class H>
void run_strategy(const Coeffs& c, const SimConfig& cfg, Stream& rng, State& st, const Strategy& s,
                  PathOutcome& out, const H* h) {
  auto set = stop_set(s);
  normalize(set);
  auto g = gap(set, st.x);
  PhaseEnd end = PhaseEnd::Stopped;
  if (g) end = run_phase(c, cfg, rng, st, g->lo, g->hi, out, h);
  if (end == PhaseEnd::Cut) {
    out.stopped = false;
    out.x = st.x;
    out.cut_discount = std::exp(-st.lam);
    return;
  }
  if (end == PhaseEnd::Absorbed) {
    out.stopped = true;
    out.absorbed = true;
    out.x = st.x;
    out.discount = std::exp(-st.lam);
    return;
  }
  if (auto pp = std::get_if<std::shared_ptr<const Pasted>>(&s)) {
    auto it = (*pp)->table.find(st.x);
    if (it != (*pp)->table.end()) {
      run_strategy(c, cfg, rng, st, it->second, out, h);
      return;
    }
  }
  out.stopped = true;
  out.x = st.x;
  out.discount = std::exp(-st.lam);
}

template <class H>
std::vector<PathOutcome> run_all(const PathBatch& batch, const Strategy& s, const H* h) {
  const SimConfig& cfg = batch.cfg;
  std::vector<PathOutcome> out(cfg.n_paths);
  unsigned nt = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  nt = static_cast<unsigned>(std::min<std::size_t>(nt, cfg.n_paths));
  std::vector<std::exception_ptr> errs(nt);
  auto work = [&](unsigned w) {
    try {
      Coeffs c(batch.prob);
      std::size_t lo = cfg.n_paths * w / nt, hi = cfg.n_paths * (w + 1) / nt;
      for (std::size_t i = lo; i < hi; ++i) {
        std::uint64_t stream = cfg.antithetic ? i / 2 : i;
        double sgn = (cfg.antithetic && (i & 1)) ? -1.0 : 1.0;
        Stream rng(cfg.seed, stream, sgn);
        State st{batch.x0, 0.0, 0.0};
        PathOutcome& o = out[i];
        o.x_min = o.x_max = batch.x0;
        o.r_max = c.r(batch.x0);
        run_strategy(c, cfg, rng, st, s, o, h);
      }
    } catch (...) {
      errs[w] = std::current_exception();
    }
  };
  if (nt == 1) {
    work(0);
  } else {
    std::vector<std::thread> ts;
    for (unsigned w = 0; w < nt; ++w) ts.emplace_back(work, w);
    for (auto& t : ts) t.join();
  }
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
  return out;
}

/// Mean and standard error in path order; antithetic pairs are averaged first.
inline void reduce(const std::vector<double>& y, bool antithetic, Estimate& e) {
  std::vector<double> z;
  if (antithetic) {
    for (std::size_t i = 0; i + 1 < y.size(); i += 2) z.push_back(0.5 * (y[i] + y[i + 1]));
    if (y.size() % 2) z.push_back(y.back());
  } else {
    z = y;
  }
  // shifted by the first sample so that a constant sample reduces exactly
  const double y0 = z.empty() ? 0.0 : z.front();
  double dm = 0.0;
  for (double v : z) dm += v - y0;
  dm /= static_cast<double>(z.size());
  const double m = y0 + dm;
  double ss = 0.0;
  for (double v : z) ss += (v - y0 - dm) * (v - y0 - dm);
  double var = z.size() > 1 ? ss / static_cast<double>(z.size() - 1) : 0.0;
  e.mean = m;
  e.std_error = std::sqrt(var / static_cast<double>(z.size()));
  e.n_effective = z.size();
}

struct NoH {
  double operator()(double) const { return 0.0; }
};

}  // namespace detail

/// Reward paid at a stopping point; absorbing endpoints use the declared value.
inline double payoff_at(const DiffusionProblem& p, const Reward& rew, double x) {
  if (p.left == BoundaryKind::Absorbing && x == p.alpha)
    return rew.f_alpha ? *rew.f_alpha : (p.f_alpha ? *p.f_alpha : (rew.f ? (*rew.f)(x) : (*rew.grid_values)(x)));
  if (p.right == BoundaryKind::Absorbing && x == p.beta)
    return rew.f_beta ? *rew.f_beta : (p.f_beta ? *p.f_beta : (rew.f ? (*rew.f)(x) : (*rew.grid_values)(x)));
  return rew.f ? (*rew.f)(x) : (*rew.grid_values)(x);
}

/// Per-path outcomes, for decompositions beyond the mean payoff.
inline std::vector<PathOutcome> run_paths(const PathBatch& batch, const Strategy& s) {
  return detail::run_all<detail::NoH>(batch, s, nullptr);
}

inline Estimate evaluate_strategy(const DiffusionProblem& p, const PathBatch& batch, const Strategy& s,
                                  const Reward& payoff) {
  auto outs = run_paths(batch, s);
  std::vector<double> y(outs.size());
  double lo = batch.x0, hi = batch.x0, rmax = 0.0;
  for (std::size_t i = 0; i < outs.size(); ++i) {
    const auto& o = outs[i];
    y[i] = o.stopped ? o.discount * payoff_at(p, payoff, o.x) : 0.0;
    lo = std::min(lo, o.x_min);
    hi = std::max(hi, o.x_max);
    rmax = std::max(rmax, o.r_max);
  }
  Estimate e;
  detail::reduce(y, batch.cfg.antithetic, e);
  e.n_paths = batch.cfg.n_paths;
  e.dt = batch.cfg.dt;
  e.seed = batch.cfg.seed;
  double fsup = 0.0;
  for (int k = 0; k <= 1000; ++k) {
    double x = lo + (hi - lo) * k / 1000.0;
    try {
      fsup = std::max(fsup, payoff_at(p, payoff, x));
    } catch (const ExprError&) {
    }
  }
  e.truncation_bound = std::exp(-p.r_floor * batch.cfg.max_time) * fsup;
  if (batch.cfg.dt * rmax > 0.1) e.warnings.push_back("dt * max r exceeds 0.1");
  return e;
}

/// Stopping set of tau* = first entry into {v = f}; with `localize`, also
/// stops on leaving ]lo, hi[.
inline Strategy tau_star_strategy(const ValueSolution& sol, std::optional<std::pair<double, double>> localize = {}) {
  const Grid& g = *sol.grid;
  std::vector<Interval> iv;
  for (const auto& c : sol.tau_star_intervals) {
    Interval i{c.lo, c.hi};
    // runs reaching an inaccessible truncation continue to the endpoint
    if (!g.left_closed() && c.lo <= g[g.first_interior()]) i.lo = -kInf;
    if (!g.right_closed() && c.hi >= g[g.last_interior()]) i.hi = kInf;
    iv.push_back(i);
  }
  if (localize) {
    iv.push_back({-kInf, localize->first});
    iv.push_back({localize->second, kInf});
  }
  if (iv.empty()) return Never{};
  detail::normalize(iv);
  return StopAtSet{iv};
}

/// Composite strategy: run base; on stopping at a target level continue with
/// that level's strategy.
inline Strategy paste_strategies(const Strategy& base, const std::map<double, Strategy>& targets,
                                 std::vector<std::string>* warnings = nullptr) {
  if (std::holds_alternative<Never>(base)) return Never{};
  auto set = detail::stop_set(base);
  detail::normalize(set);
  for (const auto& [a, s] : targets) {
    (void)s;
    if (!std::isfinite(a))
      throw ValidationError(ValidationError::Kind::InvalidConfig, a, a, "paste target must be a finite level");
    bool in = false;
    for (const auto& i : set)
      if (a >= i.lo && a <= i.hi) in = true;
    // the base can only stop at a target that lies on the boundary of its set
    bool boundary = false;
    for (const auto& i : set)
      if (a == i.lo || a == i.hi) boundary = true;
    if ((!in || !boundary) && warnings)
      warnings->push_back("TargetNotReachable: level " + odstop::detail::fmt_num(a) +
                          " is not a boundary point of the base stopping set");
  }
  auto p = std::make_shared<Pasted>();
  p->base = base;
  p->table = targets;
  return p;
}

struct DynkinResult {
  Estimate lhs;
  double rhs = 0.0;
  double z_score = 0.0;
};

/// MC of int_0^{tau} e^{-Lambda} h 1_span dt + e^{-Lambda_tau} R(X_tau) against R(x0).
inline DynkinResult verify_dynkin(const DiffusionProblem& p, const FundamentalPair& fp, const expr::Expr& h,
                                  double x0, const Strategy& s, const SimConfig& cfg) {
  bool absorbing = p.left == BoundaryKind::Absorbing || p.right == BoundaryKind::Absorbing;
  Potential pot = absorbing ? potential_tilde(p, fp, h) : potential_ac(p, fp, h);
  const GridFunction& R = pot.R;
  const Grid& g = *fp.grid;
  double lo = g.left_trunc(), hi = g.right_trunc();
  expr::Compiled hc(h);
  auto hfun = [&](double x) { return (x >= lo && x <= hi) ? hc(x) : 0.0; };
  auto batch = simulate_paths(p, x0, cfg);
  auto outs = detail::run_all(batch, s, &hfun);
  std::vector<double> y(outs.size());
  for (std::size_t i = 0; i < outs.size(); ++i) {
    const auto& o = outs[i];
    double tail = o.stopped ? o.discount * R(o.x) : o.cut_discount * R(o.x);
    y[i] = o.integral + tail;
  }
  DynkinResult out;
  detail::reduce(y, cfg.antithetic, out.lhs);
  out.lhs.n_paths = cfg.n_paths;
  out.lhs.dt = cfg.dt;
  out.lhs.seed = cfg.seed;
  out.rhs = R(x0);
  double se = std::max(out.lhs.std_error, 1e-12 * (1.0 + std::fabs(out.rhs)));
  out.z_score = (out.lhs.mean - out.rhs) / se;
  return out;
}

/// X at time t on every path, no stopping (absorbed paths stay put).
inline std::vector<double> sample_at(const PathBatch& batch, double t) {
  SimConfig cfg = batch.cfg;
  cfg.max_time = t;
  cfg.bridge_correction = false;
  PathBatch b{batch.prob, batch.x0, cfg};
  // the discount cut must not end paths early here
  DiffusionProblem q = batch.prob;
  q.r = expr::Expr::constant(0.0);
  q.cr = expr::Compiled(q.r);
  b.prob = q;
  auto outs = run_paths(b, Never{});
  std::vector<double> x(outs.size());
  for (std::size_t i = 0; i < outs.size(); ++i) x[i] = outs[i].x;
  return x;
}

/// The first `n` paths of the batch as (path, t, x) rows, every `stride` steps.
inline void write_paths_csv(const PathBatch& batch, std::size_t n, std::size_t stride, std::ostream& os) {
  os << "path,t,x\n";
  detail::Coeffs c(batch.prob);
  const double dt = batch.cfg.dt, sdt = std::sqrt(dt);
  for (std::size_t i = 0; i < std::min(n, batch.cfg.n_paths); ++i) {
    detail::Stream rng(batch.cfg.seed, batch.cfg.antithetic ? i / 2 : i,
                       (batch.cfg.antithetic && (i & 1)) ? -1.0 : 1.0);
    double x = batch.x0, lam = 0.0;
    for (std::size_t k = 0;; ++k) {
      double t = static_cast<double>(k) * dt;
      if (k % stride == 0) os << i << ',' << odstop::detail::fmt_num(t) << ',' << odstop::detail::fmt_num(x) << '\n';
      if (t >= batch.cfg.max_time || lam > detail::kDiscountCut) break;
      double xn = x + c.b(x) * dt + c.s(x) * sdt * rng.z();
      if (batch.prob.left == BoundaryKind::Absorbing && xn <= batch.prob.alpha) xn = batch.prob.alpha;
      if (batch.prob.right == BoundaryKind::Absorbing && xn >= batch.prob.beta) xn = batch.prob.beta;
      lam += 0.5 * (c.r(x) + c.r(xn)) * dt;
      x = xn;
      if (x == batch.prob.alpha || x == batch.prob.beta) break;
    }
  }
}

}  // namespace odstop::mc
