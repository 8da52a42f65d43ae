// poolgt: analysis, simulation, serving and strategy export.

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <pthread.h>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "poolgt/analyzer.hpp"
#include "poolgt/cost.hpp"
#include "poolgt/dsl.hpp"
#include "poolgt/errors.hpp"
#include "poolgt/kernels.hpp"
#include "poolgt/server.hpp"
#include "poolgt/sim.hpp"

using namespace poolgt;

namespace {

// "start:stop:count", inclusive at both ends.
std::vector<double> parse_grid(const std::string& s) {
  std::vector<double> out;
  double a, b;
  int n;
  char c1, c2;
  std::istringstream is(s);
  if (!(is >> a >> c1 >> b >> c2 >> n) || c1 != ':' || c2 != ':' || n < 1 || !is.eof())
    throw CLI::ValidationError("grid", "expected start:stop:count, got '" + s + "'");
  for (int i = 0; i < n; ++i) out.push_back(n == 1 ? a : a + (b - a) * i / (n - 1));
  return out;
}

std::string fmt(double v, const char* f = "%.15g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct AnalyzeOpts {
  std::string strategy;
  bool best = false;
  bool improved = false;
  std::optional<double> x;
  std::string grid;
  std::optional<double> y;
  std::string format = "text";
};

int run_analyze(const AnalyzeOpts& o) {
  if (o.strategy.empty() == !o.best) throw CLI::ValidationError("analyze", "give exactly one of --strategy, --best");
  if (o.x.has_value() == !o.grid.empty()) throw CLI::ValidationError("analyze", "give exactly one of --x, --x-grid");
  std::vector<double> xs = o.x ? std::vector<double>{*o.x} : parse_grid(o.grid);
  for (double x : xs)
    if (!(x >= 0.0 && x <= 1.0)) throw DomainError("x must lie in [0, 1]");

  if (o.y) {
    if (!(*o.y > 0.0 && *o.y < 1.0)) throw DomainError("y must lie in (0, 1)");
    if (o.format == "csv") std::cout << "strategy_id,x,y,cost_per_person,entropy,optimality\n";
    for (double x : xs) {
      StrategyId id = o.best ? mixed_select(x, *o.y).id : StrategyId::parse(o.strategy);
      if (id.family != Family::Mixed) throw InvalidStrategy("--risk-y needs a mixed strategy, got " + id.str());
      const bool swap = o.best && *o.y > x;
      const RiskModel risk = swap ? RiskModel::two_group(*o.y, x) : RiskModel::two_group(x, *o.y);
      const TreeAnalysis a = analyze_tree(*make_strategy(id), risk);
      const double perf = mixed_performance(id, risk.x, risk.y);
      const double info = a.information_per_run / a.resolved_per_run;
      const MixedChoice best = mixed_select(x, *o.y);
      if (o.format == "csv") {
        std::cout << id.str() << ',' << fmt(x, "%.12g") << ',' << fmt(*o.y, "%.12g") << ',' << fmt(a.tests_per_person)
                  << ',' << fmt(info) << ',' << fmt(perf) << '\n';
      } else {
        std::cout << "strategy    " << id.str() << (swap ? " (roles of x and y exchanged)" : "") << '\n'
                  << "x           " << fmt(x, "%.12g") << '\n'
                  << "y           " << fmt(*o.y, "%.12g") << '\n'
                  << "cost        " << fmt(a.tests_per_person) << '\n'
                  << "entropy     " << fmt(info) << '\n'
                  << "optimality  " << fmt(perf, "%.6f") << '\n'
                  << "best        " << best.id.str() << " (" << fmt(best.ratio, "%.6f") << ")\n";
      }
    }
    return 0;
  }

  if (o.format == "csv") {
    if (o.best) {
      std::sort(xs.begin(), xs.end());
      std::cout << "strategy_id,x,cost_per_person,entropy,optimality\n";
      for (double x : xs) {
        std::ostringstream row;
        write_cost_csv(row, {select_best(x, o.improved)}, {x});
        std::string s = row.str();
        std::cout << s.substr(s.find('\n') + 1);
      }
    } else {
      write_cost_csv(std::cout, {StrategyId::parse(o.strategy)}, xs);
    }
    return 0;
  }
  bool first = true;
  for (double x : xs) {
    const StrategyId id = o.best ? select_best(x, o.improved) : StrategyId::parse(o.strategy);
    const double c = closed_form_cost(id, x);
    const double h = entropy(x);
    if (!first) std::cout << '\n';
    first = false;
    std::cout << "strategy    " << id.str() << '\n'
              << "x           " << fmt(x, "%.12g") << '\n'
              << "cost        " << fmt(c) << '\n'
              << "entropy     " << fmt(h) << '\n'
              << "optimality  " << fmt(h / c, "%.6f") << '\n'
              << "best        " << select_best(x, o.improved).str() << '\n';
  }
  return 0;
}

int run_cutoffs(const std::string& format) {
  if (format == "csv") std::cout << "index,gamma,lower,upper\n";
  else std::cout << "cutoff  value              between\n";
  for (int i = 1; i <= 5; ++i) {
    const double g = cutoff(i);
    if (format == "csv")
      std::cout << i << ',' << fmt(g, "%.15f") << ",A" << i + 1 << ",A" << i << '\n';
    else
      std::cout << "gamma" << i << "  " << fmt(g, "%.15f") << "  A" << i + 1 << " | A" << i << '\n';
  }
  return 0;
}

struct SimOpts {
  std::string strategy;
  double x = 0.0;
  std::optional<double> y;
  std::size_t persons = 100000;
  int reps = 10;
  std::uint64_t seed = 1;
  int threads = 0;
  int loop_cap = -1;
  bool follow_up = false;
  std::string format = "text";
};

int run_simulate(const SimOpts& o) {
  SimSpec spec;
  spec.strategy = o.strategy;
  spec.risk = o.y ? RiskModel::two_group(o.x, *o.y) : RiskModel::homogeneous(o.x);
  spec.persons = o.persons;
  spec.replications = o.reps;
  spec.seed = o.seed;
  spec.threads = o.threads;
  spec.loop_cap = o.loop_cap;
  spec.follow_up = o.follow_up;
  StrategyPtr s = make_strategy(o.strategy);
  SweepRow row;
  row.strategy = s->id.str();
  row.risk = spec.risk;
  row.replications = o.reps;
  row.persons = o.persons;
  row.report = simulate(spec);
  row.expected = expected_cost(*s, spec.risk);
  if (o.format == "csv") {
    write_sim_csv_header(std::cout, o.seed, o.y.has_value(), false);
    write_sim_csv_row(std::cout, row, o.y.has_value(), false);
    return 0;
  }
  const SimReport& r = row.report;
  std::ostringstream os;
  os << "strategy              " << row.strategy << '\n'
     << "risk                  " << spec.risk.str() << '\n'
     << "seed                  " << o.seed << '\n'
     << "replications          " << o.reps << " x " << o.persons << " persons\n"
     << "total_tests           " << r.total_tests << '\n'
     << "resolved              " << r.resolved << '\n'
     << "tests_per_person      " << fmt(r.tests_per_person, "%.9f") << '\n'
     << "std_error             " << fmt(r.std_error, "%.3g") << '\n'
     << "expected              " << fmt(row.expected, "%.9f") << '\n'
     << "tests_per_run         " << fmt(r.tests_per_run, "%.9f") << " (se " << fmt(r.tests_per_run_se, "%.3g") << ")\n"
     << "info_per_test         " << fmt(r.info_per_test, "%.9f") << " (se " << fmt(r.info_per_test_se, "%.3g") << ")\n"
     << "misclassifications    " << r.misclassifications << '\n'
     << "repool_events         " << r.repool_events << '\n'
     << "max_times_tested      " << r.max_times_tested << '\n'
     << "loop_taken            " << r.loop_taken << '\n'
     << "loop_abort_events     " << r.loop_abort_events << '\n'
     << "introduction_failures " << r.introduction_failures << '\n';
  if (o.y) os << "leftover              " << r.leftover_upper << " upper, " << r.leftover_lower << " lower\n";
  std::cout << os.str();
  return 0;
}

struct SweepOpts {
  std::vector<std::string> strategies;
  std::string grid;
  std::optional<double> y;
  std::size_t persons = 100000;
  int reps = 10;
  std::uint64_t seed = 1;
  int threads = 0;
  std::string out;
};

int run_sweep(const SweepOpts& o) {
  const std::vector<double> xs = parse_grid(o.grid);
  for (const std::string& s : o.strategies) (void)StrategyId::parse(s);
  const std::vector<SweepRow> rows = sweep(o.strategies, xs, o.reps, o.persons, o.seed, o.threads, o.y);
  std::ostringstream os;
  write_sweep_csv(os, rows, o.seed);
  if (o.out.empty()) {
    std::cout << os.str();
  } else {
    std::ofstream f(o.out, std::ios::binary);
    if (!(f << os.str())) throw std::runtime_error("cannot write " + o.out);
  }
  return 0;
}

int run_dorfman(double p, std::string format) {
  const double n = dorfman_opt(p);
  const int k = dorfman_opt_integer(p);
  const double c = dorfman_cost(k, p, k) / k;
  if (format == "csv") {
    std::cout << "p,n_opt,n_integer,cost_per_person\n"
              << fmt(p, "%.12g") << ',' << fmt(n) << ',' << k << ',' << fmt(c) << '\n';
  } else {
    std::cout << "p                " << fmt(p, "%.12g") << '\n'
              << "n_opt            " << fmt(n, "%.9f") << '\n'
              << "n_integer        " << k << '\n'
              << "cost_per_person  " << fmt(c, "%.9f") << '\n';
  }
  return 0;
}

int run_serve(std::optional<int> port_flag, const std::string& host, const std::string& data_dir) {
  int port = 8080;
  if (port_flag) {
    port = *port_flag;
  } else if (const char* env = std::getenv("POOLGT_PORT")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (!*env || *end || v < 0 || v > 65535) {
      std::cerr << "poolgt: POOLGT_PORT must be a port number, got '" << env << "'\n";
      return 2;
    }
    port = static_cast<int>(v);
  }

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  auto store = std::make_shared<SessionStore>(std::filesystem::path(data_dir));
  Server server(store);
  if (!server.bind(host, port)) {
    std::cerr << "poolgt: cannot listen on " << host << ':' << port << '\n';
    return 1;
  }
  std::cerr << "poolgt: serving " << store->ids().size() << " session(s) from " << data_dir << " on " << host << ':'
            << server.port() << '\n';
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  server.listen();
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return 0;
}

int run_export(const std::string& strategy, const std::string& out, int indent) {
  StrategyPtr s = make_strategy(strategy);
  require_valid(*s);
  const std::string text = serialize(*s, indent) + "\n";
  if (out.empty()) {
    std::cout << text;
  } else {
    std::ofstream f(out, std::ios::binary);
    if (!(f << text)) throw std::runtime_error("cannot write " + out);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive pooled testing: cost analysis, simulation and live sessions"};
  app.require_subcommand(1);
  std::string isa = "auto";
  app.add_option("--isa", isa, "Kernel instruction set")->check(CLI::IsMember({"auto", "scalar", "avx2"}));

  AnalyzeOpts ao;
  auto* analyze = app.add_subcommand("analyze", "Expected cost, entropy and optimality");
  analyze->add_option("--strategy", ao.strategy, "Strategy id (A3, A12, M1, M4:3, ...)");
  analyze->add_flag("--best", ao.best, "Use the cheapest strategy at each x");
  analyze->add_flag("--improved", ao.improved, "Include the 15-based pool sizes in --best");
  analyze->add_option("--x", ao.x, "Risk level");
  analyze->add_option("--x-grid", ao.grid, "Grid start:stop:count");
  analyze->add_option("--risk-y", ao.y, "Low-risk rate for mixed strategies");
  analyze->add_option("--format", ao.format)->check(CLI::IsMember({"text", "csv"}));

  std::string cut_format = "text";
  auto* cutoffs = app.add_subcommand("cutoffs", "Risk levels where neighbouring strategies tie");
  cutoffs->add_option("--format", cut_format)->check(CLI::IsMember({"text", "csv"}));

  SimOpts so;
  auto* simulate_cmd = app.add_subcommand("simulate", "Monte Carlo run of one strategy");
  simulate_cmd->add_option("--strategy", so.strategy)->required();
  simulate_cmd->add_option("--x", so.x)->required()->check(CLI::Range(0.0, 1.0));
  simulate_cmd->add_option("--y", so.y)->check(CLI::Range(0.0, 1.0));
  simulate_cmd->add_option("--persons", so.persons, "Persons per replication")->check(CLI::PositiveNumber);
  simulate_cmd->add_option("--reps", so.reps)->check(CLI::PositiveNumber);
  simulate_cmd->add_option("--seed", so.seed);
  simulate_cmd->add_option("--threads", so.threads)->check(CLI::NonNegativeNumber);
  simulate_cmd->add_option("--loop-cap", so.loop_cap, "Override loop iteration cap");
  simulate_cmd->add_flag("--follow-up", so.follow_up, "Settle leftover low-risk individuals");
  simulate_cmd->add_option("--format", so.format)->check(CLI::IsMember({"text", "csv"}));

  SweepOpts wo;
  auto* sweep_cmd = app.add_subcommand("sweep", "Simulate strategies over an x grid (CSV)");
  sweep_cmd->add_option("--strategies", wo.strategies)->required()->delimiter(',');
  sweep_cmd->add_option("--x-grid", wo.grid)->required();
  sweep_cmd->add_option("--y", wo.y)->check(CLI::Range(0.0, 1.0));
  sweep_cmd->add_option("--persons", wo.persons)->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--reps", wo.reps)->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--seed", wo.seed);
  sweep_cmd->add_option("--threads", wo.threads)->check(CLI::NonNegativeNumber);
  sweep_cmd->add_option("--out", wo.out, "Write CSV here instead of stdout");

  double dp = 0.0;
  std::string dformat = "text";
  auto* dorfman = app.add_subcommand("dorfman", "Optimal two-stage pool size");
  dorfman->add_option("--p", dp)->required();
  dorfman->add_option("--format", dformat)->check(CLI::IsMember({"text", "csv"}));

  std::optional<int> port;
  std::string host = "127.0.0.1", data_dir = "poolgt-data";
  auto* serve = app.add_subcommand("serve", "Run the session HTTP service");
  serve->add_option("--port", port, "Listen port (default $POOLGT_PORT or 8080)")->check(CLI::Range(0, 65535));
  serve->add_option("--host", host);
  serve->add_option("--data-dir", data_dir, "Session log directory");

  std::string ex_strategy, ex_out;
  int ex_indent = 2;
  auto* exp = app.add_subcommand("export-strategy", "Write a strategy tree as JSON");
  exp->add_option("--strategy", ex_strategy)->required();
  exp->add_option("--out", ex_out);
  exp->add_option("--indent", ex_indent)->check(CLI::Range(-1, 8));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (isa == "scalar") kernels::force_isa(kernels::Isa::Scalar);
    else if (isa == "avx2") kernels::force_isa(kernels::Isa::Avx2);
    if (*analyze) return run_analyze(ao);
    if (*cutoffs) return run_cutoffs(cut_format);
    if (*simulate_cmd) return run_simulate(so);
    if (*sweep_cmd) return run_sweep(wo);
    if (*dorfman) return run_dorfman(dp, dformat);
    if (*serve) return run_serve(port, host, data_dir);
    if (*exp) return run_export(ex_strategy, ex_out, ex_indent);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const Error& e) {
    std::cerr << "poolgt: " << e.code() << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "poolgt: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
