#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "smnist/session.hpp"

namespace smnist::service {

struct ServiceConfig {
  std::filesystem::path data_dir = "smnist-data";  // sessions/ and datasets/ live here
  std::optional<std::filesystem::path> datasets_dir;  // defaults to data_dir/datasets
  std::optional<std::filesystem::path> static_dir;    // served at / when set
  std::int64_t answer_window_ms = session::kDefaultAnswerWindowMs;
  // Seeds session ids and per-session trial streams; random when unset.
  std::optional<std::uint64_t> seed;
};

struct Response {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

// Request handlers, usable without a socket. The HTTP server in serve()
// only routes to these.
class Service {
 public:
  using Clock = std::function<std::int64_t()>;  // milliseconds

  explicit Service(ServiceConfig config, Clock clock = {});
  ~Service();

  Response create_session(const std::string& body);
  Response get_trial(const std::string& id);
  Response post_answer(const std::string& id, const std::string& body);
  Response get_report(const std::string& id);
  Response get_aggregate(bool csv);
  Response list_datasets();
  Response get_dataset_file(const std::string& name, const std::string& file);

  std::size_t session_count() const;
  std::filesystem::path sessions_dir() const;
  // Sessions rebuilt from logs at startup, and logs that failed to replay.
  std::size_t restored() const { return restored_; }
  std::size_t unreadable() const { return unreadable_; }

  // Binds to host:port (port 0 picks a free one) and serves on a
  // background thread; returns the bound port, or -1.
  int start(const std::string& host, int port);
  // Blocks until stop() is called from elsewhere.
  bool listen(const std::string& host, int port);
  void stop();

 private:
  struct Entry {
    std::mutex mu;
    std::unique_ptr<session::Session> session;
  };
  struct Http;

  std::shared_ptr<Entry> find(const std::string& id) const;
  std::string new_id();
  void restore();
  void install_routes();

  ServiceConfig config_;
  Clock clock_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::uint64_t id_state_;
  std::size_t restored_ = 0;
  std::size_t unreadable_ = 0;
  std::unique_ptr<Http> http_;
};

}  // namespace smnist::service
