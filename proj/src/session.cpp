#include "poolgt/session.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include <unistd.h>

#include "poolgt/cost.hpp"
#include "poolgt/errors.hpp"

namespace poolgt {

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

namespace {

std::string now_utc() {
  using namespace std::chrono;
  const auto t = system_clock::now();
  const std::time_t s = system_clock::to_time_t(t);
  const auto ms = duration_cast<milliseconds>(t.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&s, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

std::string random_token() {
  std::random_device rd;
  const std::uint64_t a = (std::uint64_t{rd()} << 32) ^ rd();
  const std::uint64_t b = (std::uint64_t{rd()} << 32) ^ rd();
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(a),
                static_cast<unsigned long long>(b));
  return buf;
}

double rate_field(const Json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number()) throw ValidationError(std::string("risk.") + key + " must be a number");
  const double v = j[key].get<double>();
  if (!(v > 0.0 && v < 1.0)) throw ValidationError(std::string("risk.") + key + " must lie in (0, 1)");
  return v;
}

}  // namespace

SessionParams params_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("body must be an object");
  SessionParams p;
  if (!j.contains("risk")) throw ValidationError("risk is required");
  const Json& r = j["risk"];
  if (r.is_number()) {
    p.risk = RiskModel::homogeneous(rate_field(Json::object({{"x", r}}), "x"));
  } else if (r.is_object()) {
    const std::string kind = r.value("kind", r.contains("y") ? "two_group" : "homogeneous");
    if (kind == "homogeneous") p.risk = RiskModel::homogeneous(rate_field(r, "x"));
    else if (kind == "two_group") p.risk = RiskModel::two_group(rate_field(r, "x"), rate_field(r, "y"));
    else throw ValidationError("risk.kind must be homogeneous or two_group");
  } else {
    throw ValidationError("risk must be a number or an object");
  }

  std::set<std::string> urgent;
  if (j.contains("urgent")) {
    if (!j["urgent"].is_array()) throw ValidationError("urgent must be a list of ids");
    for (const Json& u : j["urgent"]) {
      if (!u.is_string()) throw ValidationError("urgent must be a list of ids");
      urgent.insert(u.get<std::string>());
    }
  }
  if (!j.contains("roster") || !j["roster"].is_array()) throw ValidationError("roster must be a list");
  std::set<std::string> seen;
  for (const Json& e : j["roster"]) {
    RosterEntry r;
    if (e.is_string()) {
      r.id = e.get<std::string>();
    } else if (e.is_object() && e.contains("id") && e["id"].is_string()) {
      r.id = e["id"].get<std::string>();
      r.urgent = e.value("urgent", false);
      const std::string g = e.value("group", "x");
      if (g != "x" && g != "y") throw ValidationError("roster group must be x or y");
      r.low_risk = g == "y";
    } else {
      throw ValidationError("roster entries must be ids or {id, urgent, group} objects");
    }
    if (r.id.empty()) throw ValidationError("roster ids must be nonempty");
    if (!seen.insert(r.id).second) throw ValidationError("duplicate roster id " + r.id);
    if (urgent.count(r.id)) r.urgent = true;
    p.roster.push_back(std::move(r));
  }
  if (p.roster.empty()) throw ValidationError("roster is empty");
  for (const std::string& u : urgent)
    if (!seen.count(u)) throw ValidationError("urgent id " + u + " is not on the roster");
  if (j.contains("strategy") && !j["strategy"].is_null()) {
    if (!j["strategy"].is_string()) throw ValidationError("strategy must be a string id");
    p.strategy = j["strategy"].get<std::string>();
  }
  if (j.contains("snapshot_every")) {
    p.snapshot_every = j["snapshot_every"].get<int>();
    if (p.snapshot_every < 1) throw ValidationError("snapshot_every must be positive");
  }
  return p;
}

Json params_to_json(const SessionParams& p) {
  Json j;
  if (p.risk.kind == RiskModel::Kind::TwoGroup)
    j["risk"] = Json{{"kind", "two_group"}, {"x", p.risk.x}, {"y", p.risk.y}};
  else
    j["risk"] = Json{{"kind", "homogeneous"}, {"x", p.risk.x}};
  Json roster = Json::array();
  for (const RosterEntry& r : p.roster)
    roster.push_back(Json{{"id", r.id}, {"urgent", r.urgent}, {"group", r.low_risk ? "y" : "x"}});
  j["roster"] = std::move(roster);
  j["strategy"] = p.strategy ? Json(*p.strategy) : Json(nullptr);
  j["snapshot_every"] = p.snapshot_every;
  return j;
}

Json to_json(const Instruction& i) {
  return Json{{"instruction_id", i.instruction_id},
              {"pool", i.pool},
              {"step_note", i.step_note},
              {"guaranteed", i.guaranteed}};
}

Json to_json(const StateDelta& d) {
  Json res = Json::array();
  for (const auto& [id, st] : d.resolved) res.push_back(Json{{"id", id}, {"status", status_name(st)}});
  return Json{{"instruction_id", d.instruction_id},
              {"outcome", d.positive ? "+" : "-"},
              {"resolved", std::move(res)},
              {"repooled", d.repooled},
              {"complete", d.complete}};
}

// --- Session ----------------------------------------------------------------------

std::unique_ptr<Session> Session::create(std::string id, SessionParams params) {
  std::unique_ptr<Session> s(new Session());
  s->id_ = std::move(id);
  s->params_ = std::move(params);
  s->init();
  s->append(Json{{"type", "create"}, {"session_id", s->id_}, {"time", now_utc()}, {"params", params_to_json(s->params_)}});
  return s;
}

void Session::init() {
  if (params_.roster.empty()) throw ValidationError("roster is empty");
  const RiskModel& risk = params_.risk;
  const bool two = risk.kind == RiskModel::Kind::TwoGroup;
  if (!(risk.x > 0.0 && risk.x < 1.0) || (two && !(risk.y > 0.0 && risk.y < 1.0)))
    throw ValidationError("risk rates must lie in (0, 1)");

  bool swapped = false;
  if (params_.strategy) {
    strategy_id_ = StrategyId::parse(*params_.strategy).str();
  } else if (two) {
    const MixedChoice c = mixed_select(risk.x, risk.y);
    strategy_id_ = c.id.str();
    swapped = c.swapped;
  } else {
    strategy_id_ = select_best(risk.x).str();
  }
  StrategyPtr strategy = make_strategy(strategy_id_);
  require_valid(*strategy);
  const bool mixed = strategy->core().first->mixed;
  if (mixed && !two) throw ValidationError("mixed strategy " + strategy_id_ + " needs a two-group risk model");
  if (two && params_.strategy) swapped = risk.y > risk.x;

  EngineConfig cfg;
  cfg.record_events = true;
  if (mixed) {
    cfg.risk = RiskModel::two_group(std::max(risk.x, risk.y), std::min(risk.x, risk.y));
    cfg.follow_up = true;
  } else if (two) {
    double sum = 0.0;
    for (const RosterEntry& r : params_.roster) sum += r.low_risk ? risk.y : risk.x;
    cfg.risk = RiskModel::homogeneous(sum / static_cast<double>(params_.roster.size()));
  } else {
    cfg.risk = risk;
  }
  executor_ = std::make_unique<Executor>(strategy, cfg);
  for (const RosterEntry& r : params_.roster) {
    Stratum st = Stratum::Default;
    if (mixed) st = (r.low_risk != swapped) ? Stratum::Lower : Stratum::Upper;
    executor_->add_individual(st, r.urgent);
  }
  const std::size_t n = params_.roster.size();
  guaranteed_now_.assign(n, false);
  ever_guaranteed_.assign(n, false);
  repooled_now_.assign(n, false);
  ever_repooled_.assign(n, false);
  executor_->next();
  absorb_events(nullptr);
}

void Session::append(Json record) {
  Json r;
  r["seq"] = log_.size();
  for (auto& [k, v] : record.items()) r[k] = v;
  r["prev"] = last_hash_;
  const std::string hash = sha256_hex(last_hash_ + r.dump());
  r["hash"] = hash;
  last_hash_ = hash;
  log_.push_back(r.dump());
}

std::vector<std::string> Session::take_unflushed() {
  std::vector<std::string> out(log_.begin() + static_cast<std::ptrdiff_t>(flushed_), log_.end());
  flushed_ = log_.size();
  return out;
}

void Session::absorb_events(StateDelta* delta) {
  for (const Event& e : executor_->take_events()) {
    if (e.individual < 0) continue;
    const auto i = static_cast<std::size_t>(e.individual);
    switch (e.kind) {
      case EventKind::Introduced:
        if (e.guaranteed) guaranteed_now_[i] = ever_guaranteed_[i] = true;
        break;
      case EventKind::Resolved:
        guaranteed_now_[i] = repooled_now_[i] = false;
        if (delta) delta->resolved.emplace_back(params_.roster[i].id, e.status);
        break;
      case EventKind::Repooled:
        repooled_now_[i] = ever_repooled_[i] = true;
        guaranteed_now_[i] = false;
        if (delta) delta->repooled.push_back(params_.roster[i].id);
        break;
      default:
        break;
    }
  }
}

bool Session::complete() const { return !executor_->has_outstanding() && executor_->unresolved() == 0; }

std::optional<Instruction> Session::next_instruction() { return issue({}); }

std::optional<Instruction> Session::issue(const std::string&) {
  if (outstanding_) throw SequencingError("instruction " + std::to_string(outstanding_->instruction_id) + " is outstanding");
  std::optional<PendingTest> t = executor_->next();
  absorb_events(nullptr);
  if (!t) {
    if (executor_->unresolved() != 0) throw std::logic_error("executor stopped with unresolved individuals");
    return std::nullopt;
  }
  Instruction ins;
  ins.instruction_id = next_instruction_++;
  ins.step_note = t->note;
  for (int m : t->members) {
    ins.pool.push_back(params_.roster[static_cast<std::size_t>(m)].id);
    if (guaranteed_now_[static_cast<std::size_t>(m)]) ins.guaranteed.push_back(ins.pool.back());
  }
  outstanding_ = ins;
  append(Json{{"type", "issue"}, {"instruction_id", ins.instruction_id}, {"pool", ins.pool}});
  return ins;
}

StateDelta Session::submit_outcome(std::uint64_t instruction_id, bool positive) {
  return apply(instruction_id, positive, now_utc());
}

StateDelta Session::apply(std::uint64_t instruction_id, bool positive, const std::string& time) {
  if (complete()) throw SessionCompleteError("session " + id_ + " is complete");
  if (!outstanding_) throw SequencingError("no instruction is outstanding");
  if (outstanding_->instruction_id != instruction_id)
    throw SequencingError("instruction " + std::to_string(instruction_id) + " is not the outstanding instruction " +
                          std::to_string(outstanding_->instruction_id));
  StateDelta d;
  d.instruction_id = instruction_id;
  d.positive = positive;
  executor_->submit(positive);
  executor_->next();
  absorb_events(&d);
  d.complete = complete();
  history_.push_back({*outstanding_, positive, time, d});
  outstanding_.reset();
  append(Json{{"type", "outcome"}, {"instruction_id", instruction_id}, {"outcome", positive ? "+" : "-"}, {"time", time}});
  if (history_.size() % static_cast<std::size_t>(params_.snapshot_every) == 0)
    append(Json{{"type", "snapshot"}, {"outcomes", history_.size()}, {"fingerprint", fingerprint()}});
  return d;
}

std::map<std::string, Status> Session::statuses() const {
  std::map<std::string, Status> out;
  for (std::size_t i = 0; i < params_.roster.size(); ++i) out[params_.roster[i].id] = executor_->status(static_cast<int>(i));
  return out;
}

bool Session::ever_guaranteed(const std::string& id) const {
  for (std::size_t i = 0; i < params_.roster.size(); ++i)
    if (params_.roster[i].id == id) return ever_guaranteed_[i];
  throw NotFound("unknown individual " + id);
}

bool Session::ever_repooled(const std::string& id) const {
  for (std::size_t i = 0; i < params_.roster.size(); ++i)
    if (params_.roster[i].id == id) return ever_repooled_[i];
  throw NotFound("unknown individual " + id);
}

Json Session::status_json() const {
  Json roster = Json::array();
  std::size_t resolved = 0;
  for (std::size_t i = 0; i < params_.roster.size(); ++i) {
    const Status st = executor_->status(static_cast<int>(i));
    if (st != Status::Pending) ++resolved;
    roster.push_back(Json{{"id", params_.roster[i].id},
                          {"status", status_name(st)},
                          {"urgent", params_.roster[i].urgent},
                          {"group", params_.roster[i].low_risk ? "y" : "x"},
                          {"guaranteed", guaranteed_now_[i]},
                          {"repooled", repooled_now_[i]}});
  }
  Json j;
  j["session_id"] = id_;
  j["strategy"] = strategy_id_;
  j["strategy_source"] = strategy_pinned() ? "pinned" : "auto";
  j["risk"] = params_to_json(params_)["risk"];
  j["roster"] = std::move(roster);
  j["resolved"] = resolved;
  j["total"] = params_.roster.size();
  j["tests"] = tests();
  j["complete"] = complete();
  j["outstanding"] = outstanding_ ? to_json(*outstanding_) : Json(nullptr);
  return j;
}

std::string Session::fingerprint() const {
  std::string s = executor_->fingerprint();
  for (std::size_t i = 0; i < guaranteed_now_.size(); ++i)
    s += static_cast<char>('0' + guaranteed_now_[i] + 2 * repooled_now_[i]);
  s += '|' + std::to_string(next_instruction_) + (outstanding_ ? "o" : "-");
  return sha256_hex(s);
}

std::unique_ptr<Session> Session::replay(const std::vector<std::string>& lines) {
  if (lines.empty()) throw PersistError(0, "empty log");
  std::vector<Json> recs;
  std::string prev;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    Json r;
    try {
      r = Json::parse(lines[i]);
    } catch (const std::exception& e) {
      throw PersistError(i, std::string("malformed record: ") + e.what());
    }
    if (!r.is_object() || !r.contains("hash") || !r["hash"].is_string())
      throw PersistError(i, "record has no hash");
    const std::string hash = r["hash"].get<std::string>();
    r.erase("hash");
    if (r.value("prev", std::string("?")) != prev) throw PersistError(i, "hash chain broken");
    if (sha256_hex(prev + r.dump()) != hash) throw PersistError(i, "hash mismatch");
    if (r.value("seq", std::size_t(-1)) != i) throw PersistError(i, "sequence number out of order");
    prev = hash;
    recs.push_back(std::move(r));
  }

  std::unique_ptr<Session> s(new Session());
  const Json& c = recs[0];
  if (c.value("type", "") != "create") throw PersistError(0, "first record is not a create record");
  try {
    s->id_ = c.at("session_id").get<std::string>();
    s->params_ = params_from_json(c.at("params"));
    s->init();
  } catch (const PersistError&) {
    throw;
  } catch (const std::exception& e) {
    throw PersistError(0, std::string("bad create record: ") + e.what());
  }
  s->append(Json{{"type", "create"}, {"session_id", s->id_}, {"time", c.at("time")}, {"params", params_to_json(s->params_)}});

  for (std::size_t i = 1; i < recs.size(); ++i) {
    const Json& r = recs[i];
    const std::string type = r.value("type", "");
    try {
      if (type == "issue") {
        std::optional<Instruction> ins = s->issue({});
        if (!ins || ins->instruction_id != r.at("instruction_id").get<std::uint64_t>() ||
            Json(ins->pool) != r.at("pool"))
          throw PersistError(i, "recorded instruction does not match the replayed schedule");
      } else if (type == "outcome") {
        const std::string o = r.at("outcome").get<std::string>();
        if (o != "+" && o != "-") throw PersistError(i, "outcome must be + or -");
        s->apply(r.at("instruction_id").get<std::uint64_t>(), o == "+", r.at("time").get<std::string>());
      } else if (type != "snapshot") {
        throw PersistError(i, "unknown record type '" + type + "'");
      }
    } catch (const PersistError&) {
      throw;
    } catch (const std::exception& e) {
      throw PersistError(i, std::string("replay failed: ") + e.what());
    }
    if (s->log_.size() <= i || s->log_[i] != lines[i])
      throw PersistError(i, "record differs from the replayed state");
  }
  // A snapshot lost together with a torn tail is regenerated and written again.
  if (s->log_.size() > lines.size() + 1 ||
      (s->log_.size() == lines.size() + 1 && s->log_.back().find("\"type\":\"snapshot\"") == std::string::npos))
    throw PersistError(lines.size(), "log ends early");
  s->flushed_ = lines.size();
  return s;
}

// --- SessionStore ------------------------------------------------------------------

namespace {

std::vector<std::string> read_log(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    const std::size_t nl = text.find('\n', start);
    if (nl == std::string::npos) {
      // A torn final write is dropped; it was never acknowledged.
      if (Json::accept(text.substr(start))) lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

}  // namespace

SessionStore::SessionStore(std::optional<std::filesystem::path> data_dir) : dir_(std::move(data_dir)) {
  if (!dir_) return;
  std::filesystem::create_directories(*dir_);
  for (const auto& entry : std::filesystem::directory_iterator(*dir_)) {
    if (entry.path().extension() != ".jsonl") continue;
    try {
      std::shared_ptr<Session> s = Session::replay(read_log(entry.path()));
      sessions_[s->id()] = std::move(s);
    } catch (const Error& e) {
      std::cerr << "poolgt: skipping " << entry.path().string() << ": " << e.what() << '\n';
    }
  }
}

void SessionStore::persist(Session& s) {
  std::vector<std::string> lines = s.take_unflushed();
  if (!dir_ || lines.empty()) return;
  const std::filesystem::path file = *dir_ / (s.id() + ".jsonl");
  FILE* f = std::fopen(file.c_str(), "ab");
  if (!f) throw PersistError(s.log().size(), "cannot open " + file.string());
  std::string blob;
  for (const std::string& l : lines) blob += l + '\n';
  const bool ok = std::fwrite(blob.data(), 1, blob.size(), f) == blob.size() && std::fflush(f) == 0 &&
                  ::fsync(fileno(f)) == 0;
  std::fclose(f);
  if (!ok) throw PersistError(s.log().size(), "write to " + file.string() + " failed");
}

std::shared_ptr<Session> SessionStore::create(SessionParams params) {
  std::shared_ptr<Session> s = Session::create(random_token(), std::move(params));
  {
    std::lock_guard lock(s->mutex());
    persist(*s);
  }
  std::unique_lock lock(mu_);
  sessions_[s->id()] = s;
  return s;
}

std::shared_ptr<Session> SessionStore::get(const std::string& id) const {
  std::shared_lock lock(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFound("unknown session " + id);
  return it->second;
}

std::vector<std::string> SessionStore::ids() const {
  std::shared_lock lock(mu_);
  std::vector<std::string> out;
  for (const auto& [id, s] : sessions_) out.push_back(id);
  return out;
}

Json SessionStore::create_json(const Json& body) {
  std::shared_ptr<Session> s = create(params_from_json(body));
  std::lock_guard lock(s->mutex());
  return Json{{"session_id", s->id()},
              {"strategy", s->strategy_id()},
              {"strategy_source", s->strategy_pinned() ? "pinned" : "auto"},
              {"total", s->params().roster.size()}};
}

Json SessionStore::next_json(const std::string& id) {
  std::shared_ptr<Session> s = get(id);
  std::lock_guard lock(s->mutex());
  std::optional<Instruction> ins = s->next_instruction();
  persist(*s);
  if (!ins) return Json{{"complete", true}};
  return Json{{"complete", false}, {"instruction", to_json(*ins)}};
}

Json SessionStore::outcome_json(const std::string& id, const Json& body) {
  std::shared_ptr<Session> s = get(id);
  if (!body.is_object() || !body.contains("instruction_id") || !body["instruction_id"].is_number_unsigned())
    throw ValidationError("instruction_id must be a positive integer");
  if (!body.contains("outcome") || !body["outcome"].is_string())
    throw ValidationError("outcome must be \"+\" or \"-\"");
  const std::string o = body["outcome"].get<std::string>();
  if (o != "+" && o != "-") throw ValidationError("outcome must be \"+\" or \"-\"");
  std::lock_guard lock(s->mutex());
  StateDelta d = s->submit_outcome(body["instruction_id"].get<std::uint64_t>(), o == "+");
  persist(*s);
  return to_json(d);
}

Json SessionStore::statuses_json(const std::string& id) {
  std::shared_ptr<Session> s = get(id);
  std::lock_guard lock(s->mutex());
  return s->status_json();
}

Json SessionStore::history_json(const std::string& id) {
  std::shared_ptr<Session> s = get(id);
  std::lock_guard lock(s->mutex());
  Json entries = Json::array();
  for (const HistoryEntry& h : s->history()) {
    Json e = to_json(h.delta);
    e["pool"] = h.instruction.pool;
    e["step_note"] = h.instruction.step_note;
    e["guaranteed"] = h.instruction.guaranteed;
    e["time"] = h.time;
    entries.push_back(std::move(e));
  }
  return Json{{"session_id", s->id()}, {"strategy", s->strategy_id()}, {"entries", std::move(entries)}};
}

}  // namespace poolgt
