#include "smnist/session.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <map>
#include <numbers>
#include <sstream>

namespace smnist::session {

using nlohmann::json;

std::string_view to_string(Status s) {
  switch (s) {
    case Status::kActive: return "active";
    case Status::kCompleted: return "completed";
    case Status::kEnded: return "ended";
  }
  return "?";
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::kCorrect: return "correct";
    case Verdict::kWrong: return "wrong";
    case Verdict::kLate: return "late";
  }
  return "?";
}

Status parse_status(std::string_view s) {
  if (s == "active") return Status::kActive;
  if (s == "completed") return Status::kCompleted;
  if (s == "ended") return Status::kEnded;
  throw SessionError(ErrorKind::kBadLog, "session: unknown status '" + std::string(s) + "'");
}

Verdict parse_verdict(std::string_view s) {
  if (s == "correct") return Verdict::kCorrect;
  if (s == "wrong") return Verdict::kWrong;
  if (s == "late") return Verdict::kLate;
  throw SessionError(ErrorKind::kBadLog, "session: unknown verdict '" + std::string(s) + "'");
}

Trial draw_trial(int level, const Geometry& g, std::int64_t deadline_ms, Rng& rng) {
  if (level < 1 || level > kFinalLevel) {
    throw std::invalid_argument("session: level " + std::to_string(level) + " out of range");
  }
  Trial t;
  t.numerosity = static_cast<int>(rng.below(static_cast<std::uint64_t>(level)));
  t.deadline_ms = deadline_ms;
  const double sep2 = g.min_separation * g.min_separation;
  // Nine dots take a small fraction of the disc, so restarts are rare.
  for (int attempt = 0; attempt < 1000; ++attempt) {
    t.positions.clear();
    int misses = 0;
    while (static_cast<int>(t.positions.size()) < t.numerosity && misses < 1000) {
      const double r = g.placement_radius * std::sqrt(rng.uniform01());
      const double a = 2.0 * std::numbers::pi * rng.uniform01();
      const Dot d{r * std::cos(a), r * std::sin(a)};
      const bool clear = std::all_of(t.positions.begin(), t.positions.end(), [&](const Dot& o) {
        return (o.x - d.x) * (o.x - d.x) + (o.y - d.y) * (o.y - d.y) >= sep2;
      });
      if (clear) {
        t.positions.push_back(d);
      } else {
        ++misses;
      }
    }
    if (static_cast<int>(t.positions.size()) == t.numerosity) return t;
  }
  throw std::runtime_error("session: cannot place " + std::to_string(t.numerosity) +
                           " separated dots");
}

void present(SessionState& state, Trial trial) {
  if (state.status != Status::kActive) {
    throw SessionError(ErrorKind::kNotActive, "session: not active");
  }
  if (state.outstanding) {
    throw SessionError(ErrorKind::kTrialOutstanding, "session: a trial is already outstanding");
  }
  if (trial.numerosity < 0 || trial.numerosity >= state.level ||
      static_cast<int>(trial.positions.size()) != trial.numerosity) {
    throw SessionError(ErrorKind::kBadLog, "session: trial does not fit level " +
                                               std::to_string(state.level));
  }
  state.outstanding = std::move(trial);
  ++state.trials_issued;
}

const Trial& next_trial(SessionState& state, const Geometry& geometry, std::int64_t deadline_ms,
                        Rng& rng) {
  if (state.status != Status::kActive) {
    throw SessionError(ErrorKind::kNotActive, "session: not active");
  }
  present(state, draw_trial(state.level, geometry, deadline_ms, rng));
  return *state.outstanding;
}

AnswerResult submit_answer(SessionState& state, std::optional<int> digit,
                           std::int64_t elapsed_ms) {
  if (state.status != Status::kActive) {
    throw SessionError(ErrorKind::kNotActive, "session: not active");
  }
  if (!state.outstanding) {
    throw SessionError(ErrorKind::kNoTrial, "session: no outstanding trial");
  }
  if (digit && (*digit < 0 || *digit > 9)) {
    throw SessionError(ErrorKind::kBadDigit,
                       "session: answer must be a digit 0..9, got " + std::to_string(*digit));
  }
  if (elapsed_ms < 0) {
    throw SessionError(ErrorKind::kBadElapsed, "session: negative answer time");
  }
  const Trial trial = std::move(*state.outstanding);
  state.outstanding.reset();
  state.clock_ms += std::max<std::int64_t>(elapsed_ms, 1);

  AnswerResult result;
  result.numerosity = trial.numerosity;
  if (!digit || elapsed_ms > trial.deadline_ms) {
    result.verdict = Verdict::kLate;
  } else if (*digit != trial.numerosity) {
    result.verdict = Verdict::kWrong;
  } else {
    result.verdict = Verdict::kCorrect;
  }
  if (result.verdict != Verdict::kCorrect) {
    state.streak = 0;
    state.draw_log.clear();
    return result;
  }
  ++state.streak;
  state.draw_log.push_back(trial.numerosity);
  if (state.streak < kStreakLength) return result;

  LevelChangeRecord rec;
  rec.i = state.level;
  for (int n : state.draw_log) rec.sum += n;
  rec.s_ms = state.clock_ms;
  state.records.push_back(rec);
  result.record = rec;
  state.streak = 0;
  state.draw_log.clear();
  if (state.level == kFinalLevel) {
    state.status = Status::kCompleted;
  } else {
    ++state.level;
  }
  return result;
}

double heuristic_score(const std::vector<LevelChangeRecord>& records) {
  double score = 0.0;
  for (const auto& r : records) {
    if (r.s_ms <= 0) continue;  // cannot happen for engine-made records
    score += (r.l() + 1.0) * (r.i + 1) / static_cast<double>(r.s_ms);
  }
  return score;
}

double theoretical_mean(int level_label) {
  if (level_label < 4) {
    throw std::domain_error("session: theoretical mean needs a level label of at least 4");
  }
  return (level_label - 2) / 2.0;
}

std::vector<AggregateRow> aggregate(const std::vector<std::vector<LevelChangeRecord>>& sessions) {
  std::map<int, std::pair<long long, std::size_t>> acc;  // label -> (sum of l_int, n)
  for (const auto& recs : sessions) {
    for (const auto& r : recs) {
      auto& [sum, n] = acc[r.label()];
      sum += r.l_int();
      ++n;
    }
  }
  std::vector<AggregateRow> rows;
  for (const auto& [label, v] : acc) {
    rows.push_back({label, static_cast<double>(v.first) / static_cast<double>(v.second),
                    theoretical_mean(label), v.second});
  }
  return rows;
}

std::string aggregate_csv(const std::vector<AggregateRow>& rows) {
  std::ostringstream out;
  out << "level_label,measured,theoretical,n\n";
  char buf[96];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%zu\n", r.level_label, r.measured,
                  r.theoretical, r.n);
    out << buf;
  }
  return out.str();
}

std::string render_display(const SessionState& state) {
  std::ostringstream out;
  out << '(' << state.level << ')';
  auto find = [&](int label) -> const LevelChangeRecord* {
    for (const auto& r : state.records) {
      if (r.label() == label) return &r;
    }
    return nullptr;
  };
  for (int label = kStartLevel + 1; label <= kFinalLevel; ++label) {
    if (const auto* r = find(label)) {
      out << ' ' << label << '/' << r->l_int();
    } else {
      out << " 0/0";
    }
  }
  if (const auto* r = find(kFinalLevel + 1)) out << ' ' << kFinalLevel + 1 << '/' << r->l_int();
  char buf[64];
  std::snprintf(buf, sizeof buf, " <%.8f>", heuristic_score(state.records));
  out << buf;
  return out.str();
}

std::string render_ms_row(const SessionState& state) {
  std::string out;
  for (const auto& r : state.records) {
    if (!out.empty()) out.push_back(' ');
    out += std::to_string(r.s_ms);
  }
  return out;
}

namespace {

constexpr std::uint64_t kTrialStream = 0x7219;
constexpr std::uint64_t kAgentStream = 0xa6e7;

json trial_json(const Trial& t, std::uint64_t index, std::int64_t issued_ms) {
  json pos = json::array();
  for (const auto& d : t.positions) pos.push_back({d.x, d.y});
  return {{"event", "trial"},       {"index", index},
          {"issued_ms", issued_ms}, {"numerosity", t.numerosity},
          {"positions", pos},       {"deadline_ms", t.deadline_ms}};
}

json record_json(const LevelChangeRecord& r) {
  return {{"event", "level_change"}, {"i", r.i},         {"sum", r.sum},
          {"l", r.l()},              {"l_int", r.l_int()}, {"s_ms", r.s_ms}};
}

LevelChangeRecord record_from(const json& j) {
  LevelChangeRecord r;
  r.i = j.at("i").get<int>();
  r.sum = j.at("sum").get<int>();
  r.s_ms = j.at("s_ms").get<std::int64_t>();
  return r;
}

std::vector<json> parse_lines(const std::vector<std::string>& lines) {
  std::vector<json> out;
  for (std::size_t k = 0; k < lines.size(); ++k) {
    if (lines[k].empty()) continue;
    try {
      out.push_back(json::parse(lines[k]));
    } catch (const json::parse_error&) {
      bool last = true;
      for (std::size_t j = k + 1; j < lines.size(); ++j) last = last && lines[j].empty();
      if (last) break;
      throw SessionError(ErrorKind::kBadLog,
                         "session: unreadable log line " + std::to_string(k + 1));
    }
  }
  return out;
}

std::vector<std::string> read_lines(std::istream& in) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

void expect(bool ok, const std::string& what) {
  if (!ok) throw SessionError(ErrorKind::kBadLog, "session: log mismatch: " + what);
}

}  // namespace

Session::Session(std::string id, std::int64_t created_ms, SessionConfig config, Sink sink)
    : id_(std::move(id)),
      created_ms_(created_ms),
      config_(config),
      rng_(config.seed, kTrialStream),
      sink_(std::move(sink)) {
  emit(json{{"event", "created"},
            {"id", id_},
            {"created_ms", created_ms_},
            {"config",
             {{"answer_window_ms", config_.answer_window_ms},
              {"seed", config_.seed},
              {"dot_radius", config_.geometry.dot_radius},
              {"min_separation", config_.geometry.min_separation},
              {"placement_radius", config_.geometry.placement_radius}}}}
           .dump());
}

void Session::emit(const std::string& line) {
  if (sink_) sink_(line);
}

const Trial& Session::trial(std::int64_t now_ms) {
  if (state_.outstanding) return *state_.outstanding;
  Rng r = rng_.split(state_.trials_issued);
  const std::uint64_t index = state_.trials_issued;
  next_trial(state_, config_.geometry, config_.answer_window_ms, r);
  issued_ms_ = now_ms;
  emit(trial_json(*state_.outstanding, index, now_ms).dump());
  return *state_.outstanding;
}

AnswerResult Session::answer(std::optional<int> digit, std::int64_t now_ms) {
  const std::int64_t elapsed = std::max<std::int64_t>(now_ms - issued_ms_, 0);
  auto result = submit_answer(state_, digit, elapsed);
  emit(json{{"event", "answer"},
            {"digit", digit ? json(*digit) : json(nullptr)},
            {"elapsed_ms", elapsed},
            {"verdict", to_string(result.verdict)},
            {"level", state_.level},
            {"streak", state_.streak},
            {"status", to_string(state_.status)}}
           .dump());
  if (result.record) emit(record_json(*result.record).dump());
  return result;
}

void Session::end() {
  if (state_.status != Status::kActive) return;
  state_.status = Status::kEnded;
  state_.outstanding.reset();
  emit(json{{"event", "end"}}.dump());
}

Session Session::replay(std::istream& log) { return replay(read_lines(log)); }

Session Session::replay(const std::vector<std::string>& lines) {
  const auto events = parse_lines(lines);
  if (events.empty() || events.front().value("event", "") != "created") {
    throw SessionError(ErrorKind::kBadLog, "session: log does not start with a created event");
  }
  try {
    const json& head = events.front();
    SessionConfig cfg;
    const json& c = head.at("config");
    cfg.answer_window_ms = c.at("answer_window_ms").get<std::int64_t>();
    cfg.seed = c.at("seed").get<std::uint64_t>();
    cfg.geometry.dot_radius = c.value("dot_radius", cfg.geometry.dot_radius);
    cfg.geometry.min_separation = c.value("min_separation", cfg.geometry.min_separation);
    cfg.geometry.placement_radius = c.value("placement_radius", cfg.geometry.placement_radius);
    Session s(head.at("id").get<std::string>(), head.at("created_ms").get<std::int64_t>(), cfg);

    std::optional<LevelChangeRecord> pending;  // emitted by the last answer, not yet seen
    for (std::size_t k = 1; k < events.size(); ++k) {
      const json& e = events[k];
      const std::string kind = e.at("event").get<std::string>();
      expect(!pending || kind == "level_change", "missing level_change event");
      if (kind == "trial") {
        expect(e.at("index").get<std::uint64_t>() == s.state_.trials_issued, "trial index");
        Trial t;
        t.numerosity = e.at("numerosity").get<int>();
        t.deadline_ms = e.at("deadline_ms").get<std::int64_t>();
        for (const auto& p : e.at("positions")) {
          t.positions.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        }
        present(s.state_, std::move(t));
        s.issued_ms_ = e.at("issued_ms").get<std::int64_t>();
      } else if (kind == "answer") {
        std::optional<int> digit;
        if (!e.at("digit").is_null()) digit = e.at("digit").get<int>();
        auto r = submit_answer(s.state_, digit, e.at("elapsed_ms").get<std::int64_t>());
        expect(to_string(r.verdict) == e.at("verdict").get<std::string>(), "verdict");
        expect(s.state_.level == e.at("level").get<int>(), "level");
        expect(s.state_.streak == e.at("streak").get<int>(), "streak");
        expect(to_string(s.state_.status) == e.at("status").get<std::string>(), "status");
        pending = r.record;
      } else if (kind == "level_change") {
        expect(pending && *pending == record_from(e), "level_change record");
        pending.reset();
      } else if (kind == "end") {
        s.end();
      } else {
        throw SessionError(ErrorKind::kBadLog, "session: unknown event '" + kind + "'");
      }
    }
    // A crash between the answer and its level_change line leaves the
    // record implied by the answer; the state already holds it.
    return s;
  } catch (const json::exception& e) {
    throw SessionError(ErrorKind::kBadLog, std::string("session: malformed log: ") + e.what());
  } catch (const SessionError& e) {
    if (e.kind() == ErrorKind::kBadLog) throw;
    throw SessionError(ErrorKind::kBadLog, std::string("session: log replay failed: ") + e.what());
  }
}

std::vector<LevelChangeRecord> records_from_log(std::istream& log) {
  std::vector<LevelChangeRecord> out;
  try {
    for (const auto& e : parse_lines(read_lines(log))) {
      if (e.value("event", "") == "level_change") out.push_back(record_from(e));
    }
  } catch (const json::exception& e) {
    throw SessionError(ErrorKind::kBadLog, std::string("session: malformed log: ") + e.what());
  }
  return out;
}

Session simulate(const Agent& agent, const std::string& id, const SessionConfig& config,
                 std::size_t max_trials, Session::Sink sink) {
  Session s(id, 0, config, std::move(sink));
  Rng guess(config.seed, kAgentStream);
  std::int64_t now = 0;
  for (std::size_t k = 0; k < max_trials && s.state().status == Status::kActive; ++k) {
    const int n = s.trial(now).numerosity;
    const int digit = n <= agent.capacity ? n : static_cast<int>(guess.below(10));
    now += agent.reaction_ms;
    s.answer(digit, now);
  }
  s.end();
  return s;
}

}  // namespace smnist::session
