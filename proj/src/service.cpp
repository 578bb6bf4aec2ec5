#include "smnist/service.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <fstream>
#include <httplib.h>
#include <iostream>
#include <json.hpp>
#include <random>
#include <regex>
#include <sstream>
#include <thread>

#include "smnist/dataset_io.hpp"
#include "smnist/idx.hpp"

namespace smnist::service {

using nlohmann::json;
namespace fs = std::filesystem;

struct Service::Http {
  httplib::Server server;
  std::thread thread;
};

namespace {

constexpr const char* kLogExt = ".jsonl";
const std::regex kIdPattern("[A-Za-z0-9_-]{1,64}");
const std::regex kNamePattern("[A-Za-z0-9_][A-Za-z0-9_.-]{0,127}");

Response error(int status, const std::string& message) {
  return {status, json{{"error", message}}.dump()};
}

Response ok(const json& body, int status = 200) { return {status, body.dump()}; }

std::int64_t wall_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

json record_json(const session::LevelChangeRecord& r) {
  return {{"i", r.i},     {"label", r.label()}, {"sum", r.sum},
          {"l", r.l()},   {"l_int", r.l_int()}, {"s_ms", r.s_ms}};
}

json state_json(const session::SessionState& s) {
  json recs = json::array();
  for (const auto& r : s.records) recs.push_back(record_json(r));
  return {{"level", s.level},
          {"streak", s.streak},
          {"clock_ms", s.clock_ms},
          {"status", session::to_string(s.status)},
          {"records", recs},
          {"score", session::heuristic_score(s.records)},
          {"display", session::render_display(s)},
          {"ms_row", session::render_ms_row(s)}};
}

int status_for(session::ErrorKind kind) {
  switch (kind) {
    case session::ErrorKind::kBadDigit:
    case session::ErrorKind::kBadElapsed: return 400;
    case session::ErrorKind::kNotActive:
    case session::ErrorKind::kNoTrial:
    case session::ErrorKind::kTrialOutstanding: return 409;
    case session::ErrorKind::kBadLog: return 500;
  }
  return 500;
}

bool dataset_file_allowed(const std::string& file) {
  static const std::array<std::string, 4> idx_files = {
      idx::kTrainImagesFile, idx::kTrainLabelsFile, idx::kTestImagesFile, idx::kTestLabelsFile};
  if (file == kManifestFile) return true;
  for (const auto& f : idx_files) {
    if (file == f || file == f + ".gz") return true;
  }
  return false;
}

// Each event line is flushed before the request that caused it is answered.
session::Session::Sink append_to(const fs::path& file) {
  return [file](const std::string& line) {
    std::ofstream out(file, std::ios::app);
    out << line << '\n';
    out.flush();
    if (!out) throw std::runtime_error("cannot append to " + file.string());
  };
}

httplib::Server::Handler adapt(std::function<Response(const httplib::Request&)> fn) {
  return [fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
    Response r = fn(req);
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
}

}  // namespace

Service::Service(ServiceConfig config, Clock clock)
    : config_(std::move(config)), clock_(clock ? std::move(clock) : Clock(wall_ms)) {
  id_state_ = config_.seed ? *config_.seed : (std::uint64_t{std::random_device{}()} << 32) ^
                                                 std::random_device{}();
  fs::create_directories(sessions_dir());
  restore();
}

Service::~Service() { stop(); }

fs::path Service::sessions_dir() const { return config_.data_dir / "sessions"; }

std::size_t Service::session_count() const {
  std::lock_guard lock(mu_);
  return sessions_.size();
}

void Service::restore() {
  for (const auto& entry : fs::directory_iterator(sessions_dir())) {
    if (entry.path().extension() != kLogExt) continue;
    std::ifstream in(entry.path());
    try {
      auto s = std::make_unique<session::Session>(session::Session::replay(in));
      if (s->id() != entry.path().stem().string()) {
        throw session::SessionError(session::ErrorKind::kBadLog, "log id differs from file name");
      }
      auto e = std::make_shared<Entry>();
      e->session = std::move(s);
      sessions_[e->session->id()] = std::move(e);
      ++restored_;
    } catch (const std::exception& ex) {
      std::cerr << "smnist: skipping " << entry.path() << ": " << ex.what() << '\n';
      ++unreadable_;
    }
  }
  // Reattach sinks so restored sessions keep appending to their logs.
  for (auto& [id, e] : sessions_) {
    const fs::path file = sessions_dir() / (id + kLogExt);
    e->session->set_sink(append_to(file));
  }
}

std::string Service::new_id() {
  char buf[17];
  for (;;) {
    Rng r(id_state_++, 0x1d);
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(r.next()));
    if (!sessions_.count(buf) && !fs::exists(sessions_dir() / (std::string(buf) + kLogExt))) {
      return buf;
    }
  }
}

std::shared_ptr<Service::Entry> Service::find(const std::string& id) const {
  if (!std::regex_match(id, kIdPattern)) return nullptr;
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

Response Service::create_session(const std::string& body) {
  session::SessionConfig cfg;
  cfg.answer_window_ms = config_.answer_window_ms;
  if (!body.empty()) {
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return error(400, "body must be a JSON object");
    if (j.contains("answer_window_ms")) {
      if (!j["answer_window_ms"].is_number_integer() || j["answer_window_ms"].get<long long>() <= 0) {
        return error(400, "answer_window_ms must be a positive integer");
      }
      cfg.answer_window_ms = j["answer_window_ms"].get<std::int64_t>();
    }
  }
  std::lock_guard lock(mu_);
  const std::string id = new_id();
  cfg.seed = Rng(id_state_++, 0x5e).next();
  const fs::path file = sessions_dir() / (id + kLogExt);
  auto e = std::make_shared<Entry>();
  try {
    e->session = std::make_unique<session::Session>(
        id, clock_(), cfg, append_to(file));
  } catch (const std::exception& ex) {
    return error(500, ex.what());
  }
  sessions_[id] = e;
  const auto& s = *e->session;
  return ok({{"id", id},
             {"created_ms", s.created_ms()},
             {"config", {{"answer_window_ms", cfg.answer_window_ms}, {"seed", cfg.seed}}},
             {"state", state_json(s.state())}},
            201);
}

Response Service::get_trial(const std::string& id) {
  auto e = find(id);
  if (!e) return error(404, "unknown session " + id);
  std::lock_guard lock(e->mu);
  try {
    const auto& t = e->session->trial(clock_());
    json pos = json::array();
    for (const auto& d : t.positions) pos.push_back({d.x, d.y});
    const auto& st = e->session->state();
    return ok({{"index", st.trials_issued - 1},
               {"positions", pos},
               {"deadline_ms", t.deadline_ms},
               {"issued_ms", e->session->issued_ms()},
               {"dot_radius", e->session->config().geometry.dot_radius},
               {"level", st.level},
               {"streak", st.streak}});
  } catch (const session::SessionError& ex) {
    return error(status_for(ex.kind()), ex.what());
  } catch (const std::exception& ex) {
    return error(500, ex.what());
  }
}

Response Service::post_answer(const std::string& id, const std::string& body) {
  const std::int64_t received = clock_();
  auto e = find(id);
  if (!e) return error(404, "unknown session " + id);
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return error(400, "body must be a JSON object");
  std::optional<int> digit;
  if (j.value("timeout", false)) {
    digit.reset();
  } else if (!j.contains("digit") || !j["digit"].is_number_integer()) {
    return error(400, "digit must be an integer 0..9");
  } else {
    const auto d = j["digit"].get<long long>();
    if (d < 0 || d > 9) return error(400, "digit must be an integer 0..9");
    digit = static_cast<int>(d);
  }
  std::lock_guard lock(e->mu);
  try {
    auto r = e->session->answer(digit, received);
    json out = {{"verdict", session::to_string(r.verdict)},
                {"numerosity", r.numerosity},
                {"state", state_json(e->session->state())}};
    if (r.record) out["record"] = record_json(*r.record);
    return ok(out);
  } catch (const session::SessionError& ex) {
    return error(status_for(ex.kind()), ex.what());
  } catch (const std::exception& ex) {
    return error(500, ex.what());
  }
}

Response Service::get_report(const std::string& id) {
  auto e = find(id);
  if (!e) return error(404, "unknown session " + id);
  std::lock_guard lock(e->mu);
  json out = state_json(e->session->state());
  out["id"] = id;
  out["created_ms"] = e->session->created_ms();
  return ok(out);
}

Response Service::get_aggregate(bool csv) {
  // Reads the persisted logs; a log being appended to yields a prefix.
  std::vector<std::vector<session::LevelChangeRecord>> all;
  for (const auto& entry : fs::directory_iterator(sessions_dir())) {
    if (entry.path().extension() != kLogExt) continue;
    std::ifstream in(entry.path());
    try {
      all.push_back(session::records_from_log(in));
    } catch (const std::exception&) {
      continue;
    }
  }
  const auto rows = session::aggregate(all);
  if (csv) return {200, session::aggregate_csv(rows), "text/csv"};
  json arr = json::array();
  for (const auto& r : rows) {
    arr.push_back({{"level_label", r.level_label},
                   {"measured", r.measured},
                   {"theoretical", r.theoretical},
                   {"n", r.n}});
  }
  return ok({{"sessions", all.size()}, {"rows", arr}});
}

Response Service::list_datasets() {
  const fs::path root = config_.datasets_dir ? *config_.datasets_dir : config_.data_dir / "datasets";
  json names = json::array();
  if (fs::is_directory(root)) {
    std::vector<std::string> found;
    for (const auto& entry : fs::directory_iterator(root)) {
      if (entry.is_directory() && fs::exists(entry.path() / kManifestFile)) {
        found.push_back(entry.path().filename().string());
      }
    }
    std::sort(found.begin(), found.end());
    for (auto& n : found) names.push_back(n);
  }
  return ok({{"datasets", names}});
}

Response Service::get_dataset_file(const std::string& name, const std::string& file) {
  if (!std::regex_match(name, kNamePattern) || name.find("..") != std::string::npos ||
      !dataset_file_allowed(file)) {
    return error(404, "no such dataset file");
  }
  const fs::path root = config_.datasets_dir ? *config_.datasets_dir : config_.data_dir / "datasets";
  const fs::path path = root / name / file;
  std::ifstream in(path, std::ios::binary);
  if (!in) return error(404, "no such dataset file");
  std::ostringstream buf;
  buf << in.rdbuf();
  const bool text = file == kManifestFile;
  return {200, buf.str(), text ? "application/json" : "application/octet-stream"};
}

void Service::install_routes() {
  auto& svr = http_->server;
  svr.Post("/api/sessions",
           adapt([this](const httplib::Request& req) { return create_session(req.body); }));
  svr.Get(R"(/api/sessions/([^/]+)/trial)", adapt([this](const httplib::Request& req) {
            return get_trial(req.matches[1]);
          }));
  svr.Post(R"(/api/sessions/([^/]+)/answer)", adapt([this](const httplib::Request& req) {
             return post_answer(req.matches[1], req.body);
           }));
  svr.Get(R"(/api/sessions/([^/]+)/report)", adapt([this](const httplib::Request& req) {
            return get_report(req.matches[1]);
          }));
  svr.Get("/api/aggregate", adapt([this](const httplib::Request& req) {
            return get_aggregate(req.get_param_value("format") == "csv");
          }));
  svr.Get("/api/datasets", adapt([this](const httplib::Request&) { return list_datasets(); }));
  svr.Get(R"(/api/datasets/([^/]+)/([^/]+))", adapt([this](const httplib::Request& req) {
            return get_dataset_file(req.matches[1], req.matches[2]);
          }));
  if (config_.static_dir) svr.set_mount_point("/", config_.static_dir->string());
}

int Service::start(const std::string& host, int port) {
  stop();
  http_ = std::make_unique<Http>();
  install_routes();
  int bound = port;
  if (port == 0) {
    bound = http_->server.bind_to_any_port(host);
  } else if (!http_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) {
    http_.reset();
    return -1;
  }
  http_->thread = std::thread([this] { http_->server.listen_after_bind(); });
  http_->server.wait_until_ready();
  return bound;
}

bool Service::listen(const std::string& host, int port) {
  stop();
  http_ = std::make_unique<Http>();
  install_routes();
  return http_->server.listen(host, port);
}

void Service::stop() {
  if (!http_) return;
  http_->server.stop();
  if (http_->thread.joinable()) http_->thread.join();
  http_.reset();
}

}  // namespace smnist::service
