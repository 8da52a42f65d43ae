#pragma once

// Streaming executor shared by the simulator and live sessions.
//
// Individuals enter per-stratum queues. The main lane runs the strategy tree
// repeatedly, drawing fresh individuals at introductions (fresh pending
// first, then the re-pool FIFO). Each defer node owns a helper lane whose
// items are the deferred units; helper runs resolve those units and wake the
// parked parent run. When supply runs out mid-run the executor binds a
// virtual known-negative member, which never appears in a pool.
//
// The executor is pull-based: next() advances until a real pool test is
// needed and returns it; submit() feeds the outcome back. It is fully
// deterministic, so a recorded outcome sequence replays to the same state.

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "poolgt/risk.hpp"
#include "poolgt/strategy.hpp"

namespace poolgt {

enum class Status : std::uint8_t { Pending, Pos, Neg };
std::string_view status_name(Status s);

struct EngineConfig {
  RiskModel risk;
  // After the main lane stops, settle leftover lower-stratum individuals with
  // the best homogeneous strategy at y.
  bool follow_up = false;
  int loop_cap = -1;  // overrides the cap stored in loop nodes when >= 0
  bool record_events = true;
};

struct PendingTest {
  std::uint64_t seq = 0;
  std::vector<int> members;  // real individuals only
  int lane = 0;
  NodeId node = kNoNode;     // kNoNode for halving steps
  std::string note;
};

enum class EventKind : std::uint8_t { Test, Resolved, Repooled, Introduced, LoopTaken, LoopAbort, IntroFailure };

struct Event {
  EventKind kind;
  int individual = -1;
  Status status = Status::Pending;
  int lane = 0;
  std::string label;
  bool guaranteed = false;
  std::vector<int> members;  // Test events
  bool positive = false;     // Test events
};

struct EngineCounters {
  std::uint64_t tests = 0;
  std::uint64_t skipped_tests = 0;  // pools made only of virtual members
  std::uint64_t introduction_failures = 0;
  std::uint64_t repool_events = 0;
  std::uint64_t loop_taken = 0;
  std::uint64_t loop_aborts = 0;
  std::uint64_t runs = 0;           // main-lane runs started
};

class Executor {
 public:
  Executor(StrategyPtr strategy, EngineConfig config);
  ~Executor();
  Executor(Executor&&) noexcept;
  Executor& operator=(Executor&&) noexcept;

  // Individuals are numbered from 0 in insertion order.
  int add_individual(Stratum stratum = Stratum::Default, bool urgent = false);
  int population() const;

  // Outstanding test, advancing the schedule if none is outstanding yet.
  // Empty once nothing more can be tested.
  std::optional<PendingTest> next();
  void submit(bool positive);
  bool has_outstanding() const;

  Status status(int individual) const;
  int times_tested(int individual) const;
  Stratum stratum(int individual) const;
  bool urgent(int individual) const;
  std::size_t unresolved() const;
  // Individuals waiting in population queues (not bound in any run).
  std::size_t queued(Stratum s) const;

  const EngineCounters& counters() const;
  // Events since the last call.
  std::vector<Event> take_events();
  // Compact description of the whole state, equal for equal histories.
  std::string fingerprint() const;
  const Strategy& strategy() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace poolgt
