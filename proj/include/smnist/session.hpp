#pragma once

#include <cstdint>
#include <functional>
#include <istream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "smnist/sampler.hpp"

namespace smnist::session {

inline constexpr int kStartLevel = 3;
inline constexpr int kFinalLevel = 10;
inline constexpr int kStreakLength = 10;
inline constexpr std::int64_t kDefaultAnswerWindowMs = 3000;

// Dot placement inside a unit disc. Centers stay within
// placement_radius so every dot is fully inside the disc.
struct Geometry {
  double dot_radius = 0.05;
  double min_separation = 0.2;  // between centers: two dot diameters
  double placement_radius = 0.95;
  bool operator==(const Geometry&) const = default;
};

struct Dot {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Dot&) const = default;
};

struct Trial {
  int numerosity = 0;
  std::vector<Dot> positions;
  std::int64_t deadline_ms = kDefaultAnswerWindowMs;
  bool operator==(const Trial&) const = default;
};

// One completed streak. i is the level being played when the streak
// completed; the record is shown under label i+1.
struct LevelChangeRecord {
  int i = kStartLevel;
  int sum = 0;  // of the kStreakLength numerosities
  std::int64_t s_ms = 0;

  double l() const { return static_cast<double>(sum) / kStreakLength; }
  int l_int() const { return sum / kStreakLength; }
  int label() const { return i + 1; }
  bool operator==(const LevelChangeRecord&) const = default;
};

enum class Status { kActive, kCompleted, kEnded };
enum class Verdict { kCorrect, kWrong, kLate };

std::string_view to_string(Status s);
std::string_view to_string(Verdict v);
Status parse_status(std::string_view s);
Verdict parse_verdict(std::string_view s);

struct SessionState {
  int level = kStartLevel;
  int streak = 0;
  std::int64_t clock_ms = 0;
  std::vector<int> draw_log;
  std::vector<LevelChangeRecord> records;
  Status status = Status::kActive;
  std::optional<Trial> outstanding;
  std::uint64_t trials_issued = 0;
  bool operator==(const SessionState&) const = default;
};

enum class ErrorKind { kNotActive, kNoTrial, kTrialOutstanding, kBadDigit, kBadElapsed, kBadLog };

class SessionError : public std::runtime_error {
 public:
  SessionError(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct AnswerResult {
  Verdict verdict = Verdict::kWrong;
  int numerosity = 0;
  std::optional<LevelChangeRecord> record;
};

// Numerosity uniform over {0..level-1}; positions rejection-sampled.
Trial draw_trial(int level, const Geometry& geometry, std::int64_t deadline_ms, Rng& rng);
// Makes `trial` the outstanding trial.
void present(SessionState& state, Trial trial);
const Trial& next_trial(SessionState& state, const Geometry& geometry, std::int64_t deadline_ms,
                        Rng& rng);

// A missing digit is a timeout. Answers later than the deadline are kLate
// even when the digit is right. The session clock advances by the answer
// time, at least 1 ms, so record timestamps strictly increase.
AnswerResult submit_answer(SessionState& state, std::optional<int> digit,
                           std::int64_t elapsed_ms);

// Sum over records of (l_i + 1)(i + 1) / s_i.
double heuristic_score(const std::vector<LevelChangeRecord>& records);
// (L - 2) / 2, the expected streak mean for label L; L must be at least 4.
double theoretical_mean(int level_label);

struct AggregateRow {
  int level_label = 0;
  double measured = 0.0;  // mean of l_int
  double theoretical = 0.0;
  std::size_t n = 0;
};

std::vector<AggregateRow> aggregate(const std::vector<std::vector<LevelChangeRecord>>& sessions);
std::string aggregate_csv(const std::vector<AggregateRow>& rows);

// "(9) 4/0 5/1 6/2 7/2 8/2 9/2 0/0 <0.14078243>": labels 4..10 in fixed
// slots, "0/0" for a label not reached yet, "11/x" once the final level is
// done.
std::string render_display(const SessionState& state);
// Record timestamps in ms, one per reached label.
std::string render_ms_row(const SessionState& state);

struct SessionConfig {
  std::int64_t answer_window_ms = kDefaultAnswerWindowMs;
  std::uint64_t seed = 1;
  Geometry geometry;
  bool operator==(const SessionConfig&) const = default;
};

// A session plus its JSON-lines event log. Every event is handed to the
// sink before the call that produced it returns.
class Session {
 public:
  using Sink = std::function<void(const std::string& line)>;

  Session(std::string id, std::int64_t created_ms, SessionConfig config, Sink sink = {});

  const std::string& id() const { return id_; }
  std::int64_t created_ms() const { return created_ms_; }
  const SessionConfig& config() const { return config_; }
  const SessionState& state() const { return state_; }
  // Server time at which the outstanding trial was issued.
  std::int64_t issued_ms() const { return issued_ms_; }

  // The outstanding trial, issuing a new one if none is pending.
  const Trial& trial(std::int64_t now_ms);
  AnswerResult answer(std::optional<int> digit, std::int64_t now_ms);
  // Stops an unfinished session; later trial/answer calls fail.
  void end();

  void set_sink(Sink sink) { sink_ = std::move(sink); }

  // Rebuilds a session by re-applying a log. A truncated final line (a
  // crash mid-write) is ignored; any other inconsistency throws kBadLog.
  static Session replay(std::istream& log);
  static Session replay(const std::vector<std::string>& lines);

 private:
  void emit(const std::string& line);

  std::string id_;
  std::int64_t created_ms_;
  SessionConfig config_;
  SessionState state_;
  Rng rng_;
  std::int64_t issued_ms_ = 0;
  Sink sink_;
};

// Level-change records found in a log; tolerant of a truncated tail.
std::vector<LevelChangeRecord> records_from_log(std::istream& log);

struct Agent {
  int capacity = std::numeric_limits<int>::max();  // counts above this are guessed
  std::int64_t reaction_ms = 500;
};

// Plays one session to completion (or max_trials) with a synthetic agent
// that answers correctly iff the numerosity is within its capacity and
// otherwise guesses a digit uniformly.
Session simulate(const Agent& agent, const std::string& id, const SessionConfig& config,
                 std::size_t max_trials = 200000, Session::Sink sink = {});

}  // namespace smnist::session
