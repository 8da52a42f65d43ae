#include "poolgt/cost.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "poolgt/errors.hpp"
#include "poolgt/kernels.hpp"
#include "poolgt/risk.hpp"

namespace poolgt {

double entropy(double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("entropy needs a probability, got " + std::to_string(x));
  if (x == 0.0 || x == 1.0) return 0.0;
  return -x * std::log2(x) - (1.0 - x) * std::log2(1.0 - x);
}

// ---------------------------------------------------------------------------
// Closed forms

const RationalFn& basic_cost_fn(int n) {
  static const RationalFn fns[] = {
      RationalFn::constant(1),
      explicit_f2(),
      RationalFn(Polynomial{1, 6, 2, -6, 2}, Polynomial{3, 1, -3, 1}),
      explicit_f4(),
      RationalFn(Polynomial{1, 13, -8, -24, 36, -18, 3}, Polynomial{-1, -1, 1} * Polynomial{-5, 8, -5, 1}),
  };
  if (n < 1 || n > 5) throw InvalidStrategy("no basic cost function for size " + std::to_string(n));
  return fns[n - 1];
}

const RationalFn& explicit_f2() {
  static const RationalFn f(Polynomial{-1, -2, 1}, Polynomial{-2, 1});
  return f;
}

const RationalFn& explicit_f4() {
  static const RationalFn f(Polynomial{-1, -8, 12, -8, 2}, Polynomial{-2, 1} * Polynomial{2, -2, 1});
  return f;
}

namespace {

// Splits an A-family size into (base size, pair doublings).
std::pair<int, int> base_of(int size) {
  int d = 0;
  while (size > 5 && size % 2 == 0 && size != 15) {
    size /= 2;
    ++d;
  }
  return {size, d};
}

void check_rate(double x, int size) {
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("risk must lie in [0, 1], got " + std::to_string(x));
  if (x == 1.0 && size > 1) throw DomainError("cost is undefined at x = 1 for pooled strategies");
}

double analyzed_cost(const StrategyId& id, double x) {
  return analyze_tree(*make_strategy(id), RiskModel::homogeneous(x)).tests_per_person;
}

}  // namespace

bool has_closed_form(const StrategyId& id) {
  if (id.family != Family::Basic && id.family != Family::Compound) return false;
  return base_of(id.size).first <= 5;
}

double closed_form_cost(const StrategyId& id, double x) {
  if (!id.is_homogeneous()) throw InvalidStrategy(id.str() + " is not a homogeneous strategy");
  check_rate(x, id.size);
  if (id.family == Family::Alternative && id.alt != AltKind::A15) {
    const int base = id.alt == AltKind::Rec5 ? 5 : 9;
    if (id.size == base) return analyzed_cost(id, x);
    StrategyId half = id;
    half.size /= 2;
    const double x2 = kernels::pair_risk(x);
    return (x2 + closed_form_cost(half, x2)) / (2.0 - x);
  }
  auto [base, doublings] = base_of(id.size);
  std::vector<double> chain{x};
  for (int i = 0; i < doublings; ++i) chain.push_back(kernels::pair_risk(chain.back()));
  double f = base == 15 ? analyzed_cost(StrategyId::homogeneous(15), chain.back())
                        : basic_cost_fn(base).eval(chain.back());
  for (int i = doublings; i-- > 0;) f = (chain[i + 1] + f) / (2.0 - chain[i]);
  return f;
}

Rational closed_form_cost_exact(const StrategyId& id, const Rational& x) {
  if (!has_closed_form(id)) throw InvalidStrategy(id.str() + " has no closed-form cost");
  if (x < 0 || x > 1) throw DomainError("risk must lie in [0, 1]");
  if (x == 1 && id.size > 1) throw DomainError("cost is undefined at x = 1 for pooled strategies");
  auto [base, doublings] = base_of(id.size);
  std::vector<Rational> chain{x};
  for (int i = 0; i < doublings; ++i) {
    const Rational& c = chain.back();
    chain.push_back(2 * c - c * c);
  }
  Rational f = basic_cost_fn(base).eval(chain.back());
  for (int i = doublings; i-- > 0;) f = (chain[i + 1] + f) / (2 - chain[i]);
  return f;
}

void closed_form_cost(const StrategyId& id, std::span<const double> xs, std::span<double> out) {
  if (out.size() < xs.size()) throw std::invalid_argument("output span too small");
  if (!has_closed_form(id)) {
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = closed_form_cost(id, xs[i]);
    return;
  }
  for (double x : xs) check_rate(x, id.size);
  auto [base, doublings] = base_of(id.size);
  std::vector<std::vector<double>> chain{std::vector<double>(xs.begin(), xs.end())};
  for (int i = 0; i < doublings; ++i) {
    std::vector<double> next(xs.size());
    kernels::pair_risk(chain.back(), next);
    chain.push_back(std::move(next));
  }
  std::vector<double> f(xs.size());
  const RationalFn& fn = basic_cost_fn(base);
  kernels::rational_eval(fn.numerator().coeffs_double(), fn.denominator().coeffs_double(), chain.back(), f);
  for (int i = doublings; i-- > 0;) {
    std::vector<double> up(xs.size());
    kernels::compound_step(chain[i], f, up);
    f = std::move(up);
  }
  std::copy(f.begin(), f.end(), out.begin());
}

double optimality(const StrategyId& id, double x) { return entropy(x) / closed_form_cost(id, x); }

// ---------------------------------------------------------------------------
// Cutoffs

const Polynomial& cutoff_polynomial(int i) {
  static const Polynomial polys[] = {
      Polynomial{1, -3, 1},
      Polynomial{-1, 5, -4, 1},
      Polynomial{-1, 7, -7, 2},
      Polynomial{1, -9, 14, 21, -91, 127, -96, 42, -10, 1},
      Polynomial{1, -8, -16, 98, -178, 179, -112, 44, -10, 1},
  };
  if (i < 1 || i > 5) throw DomainError("cutoff index must be 1..5, got " + std::to_string(i));
  return polys[i - 1];
}

namespace {

constexpr int kBisectionCap = 200;
constexpr double kRootWidth = 1e-16;

int sign(const Rational& q) { return q > 0 ? 1 : q < 0 ? -1 : 0; }
int sign(double v) { return v > 0 ? 1 : v < 0 ? -1 : 0; }

template <class T, class F>
T bisect(T lo, T hi, F&& sgn) {
  int slo = sgn(lo), shi = sgn(hi);
  if (slo == 0) return lo;
  if (shi == 0) return hi;
  if (slo == shi) throw BracketError("no sign change on the bracket");
  for (int it = 0; it < kBisectionCap; ++it) {
    T mid = (lo + hi) / 2;
    int s = sgn(mid);
    if (s == 0) return mid;
    (s == slo ? lo : hi) = mid;
    if (static_cast<double>(hi - lo) <= kRootWidth) break;
  }
  return (lo + hi) / 2;
}

}  // namespace

double cutoff(int i) {
  const Polynomial& p = cutoff_polynomial(i);
  Rational root = bisect(Rational(0), Rational(1, 2), [&](const Rational& x) { return sign(p.eval(x)); });
  return to_double(root);
}

double generic_cutoff(const StrategyId& a, const StrategyId& b, double lo, double hi) {
  if (!(lo < hi)) throw BracketError("bracket must satisfy lo < hi");
  if (has_closed_form(a) && has_closed_form(b)) {
    Rational root = bisect(to_rational(lo), to_rational(hi), [&](const Rational& x) {
      return sign(closed_form_cost_exact(a, x) - closed_form_cost_exact(b, x));
    });
    return to_double(root);
  }
  return bisect(lo, hi, [&](double x) { return sign(closed_form_cost(a, x) - closed_form_cost(b, x)); });
}

// ---------------------------------------------------------------------------
// Selection

std::vector<StrategyId> homogeneous_family(int max_pool_size, bool improved) {
  return enumerate_family(max_pool_size, improved);
}

StrategyId select_best(double x, bool improved, int max_pool_size) {
  if (!(x > 0.0 && x < 1.0)) throw DomainError("select_best needs 0 < x < 1");
  StrategyId best = StrategyId::homogeneous(1);
  double best_cost = 1.0;
  for (const StrategyId& id : enumerate_family(max_pool_size, improved)) {
    const double c = closed_form_cost(id, x);
    if (c < best_cost - 1e-15) {
      best_cost = c;
      best = id;
    }
  }
  return best;
}

std::optional<StrategyId> find_99(double x, int max_pool_size, bool improved) {
  if (!(x > 0.0 && x < 1.0)) throw DomainError("find_99 needs 0 < x < 1");
  std::optional<StrategyId> best;
  double best_ratio = 0.0;
  for (const StrategyId& id : enumerate_family(max_pool_size, improved)) {
    const double r = optimality(id, x);
    if (r > best_ratio) {
      best_ratio = r;
      best = id;
    }
  }
  if (best_ratio >= 0.99) return best;
  return std::nullopt;
}

double best_homogeneous_cost(double z) {
  if (!(z >= 0.0 && z <= 1.0)) throw DomainError("risk must lie in [0, 1]");
  if (z == 1.0) return 1.0;
  static const std::vector<StrategyId> family = enumerate_family(kDefaultFamilyCap, false);
  double best = 1.0;
  for (const StrategyId& id : family) best = std::min(best, closed_form_cost(id, z));
  return best;
}

double solver_cost(const std::string& solver, double z) {
  if (solver == "best") return best_homogeneous_cost(z);
  StrategyId id = StrategyId::parse(solver);
  if (!id.is_homogeneous()) throw AnalysisError("helper " + solver + " is not homogeneous");
  if (z == 1.0) {
    if (id.size == 1) return 1.0;
    throw AnalysisError("helper " + solver + " has no cost at risk 1");
  }
  return closed_form_cost(id, z);
}

// ---------------------------------------------------------------------------
// Dorfman baseline

double dorfman_cost(int n, double p, long long population) {
  if (n < 1) throw DomainError("pool size must be at least 1");
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("p must lie in [0, 1]");
  if (population < 0 || population % n != 0) throw DomainError("population must be a multiple of the pool size");
  const double pools = static_cast<double>(population / n);
  return pools * (1.0 + n * (1.0 - std::pow(1.0 - p, n)));
}

double lambert_w(double z) {
  constexpr double kBranch = -0.36787944117144233;  // -1/e
  if (!(z >= kBranch - 1e-17)) throw DomainError("lambert_w is real only for z >= -1/e");
  if (z <= kBranch) return -1.0;
  if (z == 0.0) return 0.0;
  double lo = -1.0;
  double hi = z <= std::exp(1.0) ? 1.0 : std::log(z);
  double w = z < 1.0 ? std::log1p(z) : std::log(z) - std::log(std::log(z) + 1.0) * 0.5;
  if (!(w > lo && w < hi)) w = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double ew = std::exp(w);
    const double f = w * ew - z;
    if (f == 0.0) return w;
    (f < 0.0 ? lo : hi) = w;
    const double df = ew * (w + 1.0);
    double next = df > 0.0 ? w - f / df : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - w) <= 1e-17 * std::max(1.0, std::abs(w))) return next;
    w = next;
  }
  return w;
}

double dorfman_opt(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("dorfman_opt needs 0 < p < 1");
  const double l = std::log1p(-p);
  const double z = -0.5 * std::sqrt(-l);
  if (z < -0.36787944117144233) throw DomainError("no interior optimum: pooling never beats individual tests here");
  return 2.0 / l * lambert_w(z);
}

int dorfman_opt_integer(double p) {
  const double n = dorfman_opt(p);
  auto per_person = [&](int k) { return dorfman_cost(k, p, k) / k; };
  const int a = std::max(1, static_cast<int>(std::floor(n)));
  const int b = std::max(1, static_cast<int>(std::ceil(n)));
  return per_person(b) < per_person(a) ? b : a;
}

// ---------------------------------------------------------------------------
// Mixed populations

double mixed_performance(const StrategyId& id, double x, double y, const CostFn& phi_in) {
  if (id.family != Family::Mixed) throw InvalidStrategy(id.str() + " is not a mixed strategy");
  if (!(x > 0.0 && x < 1.0 && y > 0.0 && y < 1.0)) throw DomainError("mixed performance needs 0 < x, y < 1");
  const CostFn phi = phi_in ? phi_in : CostFn(best_homogeneous_cost);
  const double hx = entropy(x), hy = entropy(y);
  switch (id.mixed) {
    case MixedKind::M1: {
      const double d = x + y - x * y;
      const double c = phi(y / d);
      if (!std::isfinite(c)) throw AnalysisError("sub-solver cost undefined at the posterior risk");
      return ((1.0 - y) * hx + hy) / (1.0 + d * c);
    }
    case MixedKind::M3:
      return ((1.0 - y) * (1.0 - y) * hx + (1.0 + x - x * y) * hy) / ((1.0 + y) * (1.0 + x - x * y));
    default: {
      SolverCost sc;
      if (phi_in) sc = [&](const std::string&, double z) { return phi(z); };
      TreeAnalysis a = analyze_tree(*make_strategy(id), RiskModel::two_group(x, y), sc);
      return a.information_per_test;
    }
  }
}

std::vector<StrategyId> mixed_candidates() {
  std::vector<StrategyId> out{StrategyId::of_mixed(MixedKind::M1), StrategyId::of_mixed(MixedKind::M2),
                              StrategyId::of_mixed(MixedKind::M3)};
  for (int n = 1; n <= 6; ++n) out.push_back(StrategyId::of_mixed(MixedKind::M1Pairs, n));
  for (int n = 2; n <= 5; ++n) out.push_back(StrategyId::of_mixed(MixedKind::M4, n));
  return out;
}

MixedChoice mixed_select(double x, double y) {
  MixedChoice out;
  if (y > x) {
    std::swap(x, y);
    out.swapped = true;
  }
  out.ratio = -1.0;
  for (const StrategyId& id : mixed_candidates()) {
    double r;
    try {
      r = mixed_performance(id, x, y);
    } catch (const AnalysisError&) {
      continue;
    }
    if (r > out.ratio) {
      out.ratio = r;
      out.id = id;
    }
  }
  return out;
}

void write_cost_csv(std::ostream& os, const std::vector<StrategyId>& ids, std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  os << "strategy_id,x,cost_per_person,entropy,optimality\n";
  std::vector<double> costs(xs.size());
  char buf[160];
  for (const StrategyId& id : ids) {
    closed_form_cost(id, xs, costs);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double h = entropy(xs[i]);
      std::snprintf(buf, sizeof buf, "%s,%.12g,%.15g,%.15g,%.15g\n", id.str().c_str(), xs[i], costs[i], h,
                    h / costs[i]);
      os << buf;
    }
  }
}

}  // namespace poolgt
