#pragma once

// Monte Carlo driver around the executor: ground-truth populations, single
// runs with optional transcripts, replicated simulations and grid sweeps.
//
// Replication r of grid point g draws its population from the substream
// substream_seed(seed, g, r), so any subset of replications can be rerun in
// isolation and results do not depend on thread count.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "poolgt/engine.hpp"
#include "poolgt/risk.hpp"
#include "poolgt/strategy.hpp"

namespace poolgt {

struct Population {
  std::vector<std::uint8_t> positive;  // ground truth, 1 = POS
  std::vector<Stratum> stratum;
  std::size_t size() const { return positive.size(); }
  std::size_t positives() const;
};

struct StratumSpec {
  Stratum stratum = Stratum::Default;
  double rate = 0.0;
  std::size_t size = 0;
};

// Homogeneous models only; use gen_stratified for the others.
Population gen_population(const RiskModel& risk, std::size_t size, std::uint64_t seed);
// Strata are laid out one after another in the order given.
Population gen_stratified(const std::vector<StratumSpec>& specs, std::uint64_t seed);

struct RunOptions {
  int loop_cap = -1;
  bool follow_up = false;
  bool transcript = false;
  std::vector<std::uint8_t> urgent;  // optional per-individual flags
};

struct SimReport {
  std::uint64_t total_tests = 0;
  std::uint64_t resolved = 0;
  double tests_per_person = 0.0;
  double std_error = 0.0;  // across replications; 0 for a single run
  std::uint64_t misclassifications = 0;
  std::uint64_t repool_events = 0;
  std::uint64_t max_times_tested = 0;
  std::uint64_t loop_abort_events = 0;
  std::uint64_t loop_taken = 0;
  std::uint64_t introduction_failures = 0;
  std::uint64_t skipped_tests = 0;
  std::uint64_t runs = 0;
  double tests_per_run = 0.0;
  double tests_per_run_se = 0.0;
  double info_per_test = 0.0;  // bits of prior entropy resolved per test
  double info_per_test_se = 0.0;
  // Individuals never drawn, by stratum (upper counts Default).
  std::uint64_t leftover_upper = 0;
  std::uint64_t leftover_lower = 0;
  std::vector<Event> transcript;
};

SimReport run_strategy(const StrategyPtr& strategy, const Population& population, const RiskModel& risk,
                       const RunOptions& options = {});
SimReport run_strategy(const StrategyPtr& strategy, const Population& population, const RunOptions& options = {});

struct SimSpec {
  std::string strategy;
  RiskModel risk;
  std::size_t persons = 100000;  // per replication
  int replications = 10;
  std::uint64_t seed = 1;
  std::uint64_t grid_index = 0;
  int threads = 0;  // 0: hardware concurrency
  int loop_cap = -1;
  bool follow_up = false;
};

// Per-stratum population sizes for a mixed strategy, in the proportion the
// strategy consumes them.
std::vector<StratumSpec> stratified_layout(const Strategy& strategy, const RiskModel& risk, std::size_t persons);

SimReport simulate(const SimSpec& spec);

// Expected tests per person: closed form where one exists, else the analyzer.
double expected_cost(const Strategy& strategy, const RiskModel& risk);

struct SweepRow {
  std::string strategy;
  RiskModel risk;
  int replications = 0;
  std::size_t persons = 0;
  SimReport report;
  double expected = 0.0;
};

std::vector<SweepRow> sweep(const std::vector<std::string>& strategies, const std::vector<double>& xs,
                            int replications, std::size_t persons, std::uint64_t seed, int threads = 0,
                            std::optional<double> y = std::nullopt);

void write_sim_csv_header(std::ostream& os, std::uint64_t seed, bool two_group, bool deviation);
void write_sim_csv_row(std::ostream& os, const SweepRow& row, bool two_group, bool deviation);
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows, std::uint64_t seed);

}  // namespace poolgt
