#pragma once

// Live testing sessions over the shared executor.
//
// A session's durable state is its record log: one JSON object per line,
// each carrying the SHA-256 of the previous record and of itself.
//
//   {"seq":0,"type":"create","params":{...},"prev":"","hash":"..."}
//   {"seq":1,"type":"issue","instruction_id":1,"pool":["S3","S7"],...}
//   {"seq":2,"type":"outcome","instruction_id":1,"outcome":"+","time":"..."}
//   {"seq":k,"type":"snapshot","outcomes":25,"fingerprint":"..."}
//
// The hash of a record is computed over its compact dump without the "hash"
// member, prefixed by the previous hash. Loading replays issue and outcome
// records through a fresh executor; the pools must match and snapshots must
// reproduce their fingerprints.

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "json.hpp"
#include "poolgt/engine.hpp"
#include "poolgt/risk.hpp"

namespace poolgt {

using Json = nlohmann::ordered_json;

struct RosterEntry {
  std::string id;
  bool urgent = false;
  bool low_risk = false;  // two-group sessions: member of the y group
};

struct SessionParams {
  RiskModel risk;
  std::vector<RosterEntry> roster;
  std::optional<std::string> strategy;  // pinned id
  int snapshot_every = 25;
};

SessionParams params_from_json(const Json& j);
Json params_to_json(const SessionParams& p);

struct Instruction {
  std::uint64_t instruction_id = 0;
  std::vector<std::string> pool;
  std::string step_note;
  std::vector<std::string> guaranteed;  // pool members bound to guaranteed slots this run
};

struct StateDelta {
  std::uint64_t instruction_id = 0;
  bool positive = false;
  std::vector<std::pair<std::string, Status>> resolved;
  std::vector<std::string> repooled;
  bool complete = false;
};

struct HistoryEntry {
  Instruction instruction;
  bool positive = false;
  std::string time;
  StateDelta delta;
};

Json to_json(const Instruction& i);
Json to_json(const StateDelta& d);

class Session {
 public:
  // Builds a fresh session and its create record.
  static std::unique_ptr<Session> create(std::string id, SessionParams params);
  // Rebuilds a session from its record log. Throws PersistError.
  static std::unique_ptr<Session> replay(const std::vector<std::string>& lines);

  const std::string& id() const { return id_; }
  const SessionParams& params() const { return params_; }
  const std::string& strategy_id() const { return strategy_id_; }
  bool strategy_pinned() const { return params_.strategy.has_value(); }

  // SequencingError when an instruction is outstanding; nullopt once complete.
  std::optional<Instruction> next_instruction();
  StateDelta submit_outcome(std::uint64_t instruction_id, bool positive);

  const std::optional<Instruction>& outstanding() const { return outstanding_; }
  bool complete() const;
  std::map<std::string, Status> statuses() const;
  Json status_json() const;
  const std::vector<HistoryEntry>& history() const { return history_; }
  std::uint64_t tests() const { return executor_->counters().tests; }
  const EngineCounters& counters() const { return executor_->counters(); }
  std::string fingerprint() const;

  const std::vector<std::string>& log() const { return log_; }
  // Newly appended records since the last call (for the persistence layer).
  std::vector<std::string> take_unflushed();

  // Individuals bound to guaranteed slots at the time, per external id.
  bool ever_guaranteed(const std::string& id) const;
  bool ever_repooled(const std::string& id) const;

  std::mutex& mutex() { return mu_; }

 private:
  Session() = default;
  void init();
  void append(Json record);
  void absorb_events(StateDelta* delta);
  std::optional<Instruction> issue(const std::string& time_hint);
  StateDelta apply(std::uint64_t instruction_id, bool positive, const std::string& time);

  std::string id_;
  SessionParams params_;
  std::string strategy_id_;
  std::unique_ptr<Executor> executor_;
  std::optional<Instruction> outstanding_;
  std::vector<HistoryEntry> history_;
  std::vector<std::string> log_;
  std::size_t flushed_ = 0;
  std::string last_hash_;
  std::uint64_t next_instruction_ = 1;
  std::vector<bool> guaranteed_now_, ever_guaranteed_, repooled_now_, ever_repooled_;
  bool replaying_ = false;
  std::mutex mu_;
};

std::string sha256_hex(const std::string& data);

// Thread-safe registry; persists each session under data_dir/<id>.jsonl.
class SessionStore {
 public:
  explicit SessionStore(std::optional<std::filesystem::path> data_dir = std::nullopt);

  std::shared_ptr<Session> create(SessionParams params);
  std::shared_ptr<Session> get(const std::string& id) const;  // NotFound
  std::vector<std::string> ids() const;

  // Operations below lock the session and persist before returning.
  Json create_json(const Json& body);
  Json next_json(const std::string& id);
  Json outcome_json(const std::string& id, const Json& body);
  Json statuses_json(const std::string& id);
  Json history_json(const std::string& id);

  void persist(Session& s);

 private:
  std::optional<std::filesystem::path> dir_;
  mutable std::shared_mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

}  // namespace poolgt
