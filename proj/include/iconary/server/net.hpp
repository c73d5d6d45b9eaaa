#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "iconary/agent.hpp"
#include "iconary/server/ingest.hpp"
#include "iconary/server/session.hpp"

// Network front end: newline-delimited JSON over TCP for play, and a
// read-only HTTP surface for icon metadata and finished games.
namespace iconary::server {

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 7878;       // 0 picks a free port
  int http_port = 7879;  // 0 picks a free port; -1 disables HTTP
  std::filesystem::path data_dir;  // finished games are stored here when set
  std::shared_ptr<const SessionContext> context;
  std::vector<std::string> phrases;  // phrase pool for new sessions
  std::shared_ptr<const DrawerAgent> ai_drawer;    // binds the drawer role of every session
  std::shared_ptr<const GuesserAgent> ai_guesser;  // binds the guesser role of every session
  std::uint64_t seed = 1;
  std::chrono::milliseconds tick_interval{500};
};

class GameServer {
 public:
  explicit GameServer(ServerConfig config);
  ~GameServer();
  GameServer(const GameServer&) = delete;
  GameServer& operator=(const GameServer&) = delete;

  // Starts listening and returns once both sockets are bound.
  void start();
  void stop();
  // Blocks until stop() is called.
  void wait();

  int port() const { return bound_port_; }
  int http_port() const { return bound_http_port_; }

  // Transport-independent entry point; `reply` receives messages addressed
  // to the sender. Thread-safe: transitions of one session are serialized.
  using Sink = std::function<void(const std::string& line)>;
  void dispatch(const std::string& session_id, Sender from, const nlohmann::json& message, const Sink& reply);
  // Registers where drawer/guesser output of a session goes.
  void attach(const std::string& session_id, Role role, Sink sink);

  // Finished session transcript, if any.
  std::optional<GameRecord> finished_game(const std::string& session_id) const;
  std::optional<nlohmann::json> session_snapshot(const std::string& session_id) const;

  // Seconds on the server's monotonic clock.
  double now() const;

 private:
  struct Live;
  std::shared_ptr<Live> get_or_create(const std::string& id);
  std::shared_ptr<Live> find(const std::string& id) const;
  void deliver(Live& live, const std::vector<Outbound>& out, const Sink& reply);
  void after_step(const std::shared_ptr<Live>& live);
  void run_ai_drawer(std::shared_ptr<Live> live);
  void run_ai_guesser(std::shared_ptr<Live> live);
  void persist(const Session& s);
  void accept_loop();
  void serve_connection(int fd);
  void tick_loop();

  ServerConfig config_;
  std::chrono::steady_clock::time_point epoch_;
  mutable std::mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<Live>> sessions_;
  std::size_t next_phrase_ = 0;
  std::atomic<bool> running_{false};
  int listen_fd_ = -1;
  int bound_port_ = 0;
  int bound_http_port_ = 0;
  struct Http;
  std::unique_ptr<Http> http_;
  std::vector<std::thread> threads_;
  std::mutex workers_mu_;
  std::vector<std::thread> workers_;
};

}  // namespace iconary::server
