#include "poolgt/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <thread>

#include "poolgt/analyzer.hpp"
#include "poolgt/cost.hpp"
#include "poolgt/errors.hpp"
#include "poolgt/rng.hpp"

namespace poolgt {

std::size_t Population::positives() const {
  return static_cast<std::size_t>(std::count(positive.begin(), positive.end(), std::uint8_t{1}));
}

Population gen_population(const RiskModel& risk, std::size_t size, std::uint64_t seed) {
  if (risk.kind != RiskModel::Kind::Homogeneous)
    throw DomainError("gen_population takes a homogeneous model; use gen_stratified");
  risk.check();
  return gen_stratified({{Stratum::Default, risk.x, size}}, seed);
}

Population gen_stratified(const std::vector<StratumSpec>& specs, std::uint64_t seed) {
  std::size_t total = 0;
  for (const StratumSpec& s : specs) {
    if (!(s.rate >= 0.0 && s.rate <= 1.0)) throw DomainError("stratum rate outside [0, 1]");
    total += s.size;
  }
  if (total == 0) throw DomainError("population size must be at least 1");
  Population pop;
  pop.positive.resize(total);
  pop.stratum.resize(total);
  Rng rng(seed);
  std::size_t off = 0;
  for (const StratumSpec& s : specs) {
    rng.bernoulli(s.rate, std::span(pop.positive).subspan(off, s.size));
    std::fill_n(pop.stratum.begin() + static_cast<std::ptrdiff_t>(off), s.size, s.stratum);
    off += s.size;
  }
  return pop;
}

namespace {

RiskModel infer_risk(const Population& pop) {
  double n[3] = {0, 0, 0}, k[3] = {0, 0, 0};
  for (std::size_t i = 0; i < pop.size(); ++i) {
    const int s = static_cast<int>(pop.stratum[i]);
    n[s] += 1;
    k[s] += pop.positive[i];
  }
  const double up = (n[0] + n[1]) > 0 ? (k[0] + k[1]) / (n[0] + n[1]) : 0.0;
  if (n[2] == 0) return RiskModel::homogeneous(up);
  return RiskModel::two_group(up, k[2] / n[2]);
}

}  // namespace

SimReport run_strategy(const StrategyPtr& strategy, const Population& population, const RunOptions& options) {
  return run_strategy(strategy, population, infer_risk(population), options);
}

SimReport run_strategy(const StrategyPtr& strategy, const Population& pop, const RiskModel& risk,
                       const RunOptions& options) {
  require_valid(*strategy);
  EngineConfig cfg;
  cfg.risk = risk;
  cfg.follow_up = options.follow_up;
  cfg.loop_cap = options.loop_cap;
  cfg.record_events = options.transcript;
  Executor ex(strategy, cfg);
  for (std::size_t i = 0; i < pop.size(); ++i)
    ex.add_individual(pop.stratum[i], !options.urgent.empty() && options.urgent[i]);

  while (auto t = ex.next()) {
    bool pos = false;
    for (int m : t->members) pos |= pop.positive[static_cast<std::size_t>(m)] != 0;
    ex.submit(pos);
  }

  SimReport r;
  const EngineCounters& c = ex.counters();
  r.total_tests = c.tests;
  r.repool_events = c.repool_events;
  r.loop_abort_events = c.loop_aborts;
  r.loop_taken = c.loop_taken;
  r.introduction_failures = c.introduction_failures;
  r.skipped_tests = c.skipped_tests;
  r.runs = c.runs;
  const double hx = entropy(risk.rate(Stratum::Upper));
  const double hy = entropy(risk.rate(Stratum::Lower));
  double info = 0.0;
  for (std::size_t i = 0; i < pop.size(); ++i) {
    const int id = static_cast<int>(i);
    const Status s = ex.status(id);
    r.max_times_tested = std::max<std::uint64_t>(r.max_times_tested, static_cast<std::uint64_t>(ex.times_tested(id)));
    if (s == Status::Pending) {
      (pop.stratum[i] == Stratum::Lower ? r.leftover_lower : r.leftover_upper) += 1;
      continue;
    }
    ++r.resolved;
    info += pop.stratum[i] == Stratum::Lower ? hy : hx;
    if ((s == Status::Pos) != (pop.positive[i] != 0)) ++r.misclassifications;
  }
  r.tests_per_person = r.resolved ? static_cast<double>(r.total_tests) / static_cast<double>(r.resolved) : 0.0;
  r.tests_per_run = r.runs ? static_cast<double>(r.total_tests) / static_cast<double>(r.runs) : 0.0;
  r.info_per_test = r.total_tests ? info / static_cast<double>(r.total_tests) : 0.0;
  if (options.transcript) r.transcript = ex.take_events();
  return r;
}

std::vector<StratumSpec> stratified_layout(const Strategy& strategy, const RiskModel& risk, std::size_t persons) {
  auto [tree, depth] = strategy.core();
  if (!tree->mixed) return {{Stratum::Default, risk.x, persons}};
  const TreeAnalysis a = analyze_tree(strategy, risk);
  const double up = a.resolved_upper / (a.resolved_upper + a.resolved_lower);
  const auto nu = static_cast<std::size_t>(std::llround(up * static_cast<double>(persons)));
  return {{Stratum::Upper, risk.x, nu}, {Stratum::Lower, risk.y, persons - nu}};
}

double expected_cost(const Strategy& strategy, const RiskModel& risk) {
  if (risk.kind == RiskModel::Kind::Homogeneous && has_closed_form(strategy.id))
    return closed_form_cost(strategy.id, risk.x);
  return analyze_tree(strategy, risk).tests_per_person;
}

namespace {

struct Moments {
  double sum = 0.0, sq = 0.0;
  void add(double v) {
    sum += v;
    sq += v * v;
  }
  double mean(int n) const { return sum / n; }
  double se(int n) const {
    if (n < 2) return 0.0;
    const double m = sum / n;
    const double var = std::max(0.0, (sq - n * m * m) / (n - 1));
    return std::sqrt(var / n);
  }
};

}  // namespace

SimReport simulate(const SimSpec& spec) {
  if (spec.replications < 1) throw DomainError("replications must be at least 1");
  if (spec.persons < 1) throw DomainError("persons must be at least 1");
  spec.risk.check();
  StrategyPtr strategy = make_strategy(spec.strategy);
  require_valid(*strategy);
  const std::vector<StratumSpec> layout = stratified_layout(*strategy, spec.risk, spec.persons);

  std::vector<SimReport> reps(static_cast<std::size_t>(spec.replications));
  std::atomic<int> next{0};
  auto work = [&] {
    for (int r; (r = next.fetch_add(1)) < spec.replications;) {
      const Population pop = gen_stratified(layout, substream_seed(spec.seed, spec.grid_index, static_cast<std::uint64_t>(r)));
      RunOptions opt;
      opt.loop_cap = spec.loop_cap;
      opt.follow_up = spec.follow_up;
      reps[static_cast<std::size_t>(r)] = run_strategy(strategy, pop, spec.risk, opt);
    }
  };
  int threads = spec.threads > 0 ? spec.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, spec.replications);
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  SimReport out;
  Moments tpp, tpr, ipt;
  for (const SimReport& r : reps) {
    out.total_tests += r.total_tests;
    out.resolved += r.resolved;
    out.misclassifications += r.misclassifications;
    out.repool_events += r.repool_events;
    out.max_times_tested = std::max(out.max_times_tested, r.max_times_tested);
    out.loop_abort_events += r.loop_abort_events;
    out.loop_taken += r.loop_taken;
    out.introduction_failures += r.introduction_failures;
    out.skipped_tests += r.skipped_tests;
    out.runs += r.runs;
    out.leftover_upper += r.leftover_upper;
    out.leftover_lower += r.leftover_lower;
    tpp.add(r.tests_per_person);
    tpr.add(r.tests_per_run);
    ipt.add(r.info_per_test);
  }
  const int n = spec.replications;
  out.tests_per_person = tpp.mean(n);
  out.std_error = tpp.se(n);
  out.tests_per_run = tpr.mean(n);
  out.tests_per_run_se = tpr.se(n);
  out.info_per_test = ipt.mean(n);
  out.info_per_test_se = ipt.se(n);
  return out;
}

std::vector<SweepRow> sweep(const std::vector<std::string>& strategies, const std::vector<double>& xs,
                            int replications, std::size_t persons, std::uint64_t seed, int threads,
                            std::optional<double> y) {
  std::vector<SweepRow> rows;
  std::uint64_t g = 0;
  for (const std::string& name : strategies) {
    StrategyPtr s = make_strategy(name);
    for (double x : xs) {
      SimSpec spec;
      spec.strategy = name;
      spec.risk = y ? RiskModel::two_group(x, *y) : RiskModel::homogeneous(x);
      spec.persons = persons;
      spec.replications = replications;
      spec.seed = seed;
      spec.grid_index = g++;
      spec.threads = threads;
      SweepRow row;
      row.strategy = s->id.str();
      row.risk = spec.risk;
      row.replications = replications;
      row.persons = persons;
      row.report = simulate(spec);
      row.expected = expected_cost(*s, spec.risk);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

void write_sim_csv_header(std::ostream& os, std::uint64_t seed, bool two_group, bool deviation) {
  os << "# seed=" << seed << '\n';
  os << "strategy_id," << (two_group ? "x,y" : "x")
     << ",replications,persons,tests_per_person,std_error,closed_form,";
  if (deviation) os << "abs_deviation,";
  os << "misclassifications,repool_events,loop_aborts,introduction_failures\n";
}

void write_sim_csv_row(std::ostream& os, const SweepRow& row, bool two_group, bool deviation) {
  char buf[256];
  const SimReport& r = row.report;
  os << row.strategy << ',';
  if (two_group) std::snprintf(buf, sizeof buf, "%.12g,%.12g", row.risk.x, row.risk.y);
  else std::snprintf(buf, sizeof buf, "%.12g", row.risk.x);
  os << buf;
  std::snprintf(buf, sizeof buf, ",%d,%zu,%.12g,%.6g,%.12g", row.replications, row.persons, r.tests_per_person,
                r.std_error, row.expected);
  os << buf;
  if (deviation) {
    std::snprintf(buf, sizeof buf, ",%.6g", std::fabs(r.tests_per_person - row.expected));
    os << buf;
  }
  os << ',' << r.misclassifications << ',' << r.repool_events << ',' << r.loop_abort_events << ','
     << r.introduction_failures << '\n';
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows, std::uint64_t seed) {
  const bool two = !rows.empty() && rows.front().risk.kind == RiskModel::Kind::TwoGroup;
  write_sim_csv_header(os, seed, two, true);
  for (const SweepRow& row : rows) write_sim_csv_row(os, row, two, true);
}

}  // namespace poolgt
