#include "iconary/server/net.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <ctime>
#include <iostream>

#include <httplib.h>

#include "iconary/constraints.hpp"
#include "iconary/baseline.hpp"
#include "iconary/schema.hpp"

namespace iconary::server {

using nlohmann::json;

struct GameServer::Live {
  std::mutex mu;
  Session session;
  Sink drawer_sink;
  Sink guesser_sink;
  std::mt19937_64 rng;
  bool ai_busy = false;
  bool persisted = false;
};

struct GameServer::Http {
  httplib::Server server;
};

namespace {

struct Conn {
  int fd = -1;
  std::mutex write_mu;
  void write_line(const std::string& line) {
    std::lock_guard<std::mutex> lock(write_mu);
    std::string buf = line + "\n";
    std::size_t off = 0;
    while (off < buf.size()) {
      const ssize_t n = ::send(fd, buf.data() + off, buf.size() - off, MSG_NOSIGNAL);
      if (n <= 0) return;
      off += static_cast<std::size_t>(n);
    }
  }
};

std::string utc_date() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[16];
  std::strftime(buf, sizeof buf, "%Y-%m-%d", &tm);
  return buf;
}

}  // namespace

GameServer::GameServer(ServerConfig config) : config_(std::move(config)), epoch_(std::chrono::steady_clock::now()) {
  if (!config_.context) throw std::invalid_argument("server needs a session context");
  if (config_.phrases.empty()) throw std::invalid_argument("server needs at least one phrase");
}

GameServer::~GameServer() { stop(); }

double GameServer::now() const {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_).count();
}

std::shared_ptr<GameServer::Live> GameServer::find(const std::string& id) const {
  std::lock_guard<std::mutex> lock(sessions_mu_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

std::shared_ptr<GameServer::Live> GameServer::get_or_create(const std::string& id) {
  std::lock_guard<std::mutex> lock(sessions_mu_);
  auto it = sessions_.find(id);
  if (it != sessions_.end()) return it->second;
  auto live = std::make_shared<Live>();
  const std::string& text = config_.phrases[next_phrase_++ % config_.phrases.size()];
  live->session = new_session(id, Phrase::from_text(text), config_.context);
  live->rng.seed(config_.seed + sessions_.size());
  const double t = now();
  if (config_.ai_drawer) {
    live->session =
        session_step(live->session, Sender::drawer, {{"type", "join"}, {"role", "drawer"}, {"player", "ai-drawer"}, {"ai", true}}, t)
            .session;
  }
  if (config_.ai_guesser) {
    live->session = session_step(live->session, Sender::guesser,
                                 {{"type", "join"}, {"role", "guesser"}, {"player", "ai-guesser"}, {"ai", true}}, t)
                        .session;
  }
  sessions_.emplace(id, live);
  return live;
}

void GameServer::deliver(Live& live, const std::vector<Outbound>& out, const Sink& reply) {
  for (const auto& o : out) {
    const std::string line = encode_line(o.body);
    const Sink* sink = o.to == Audience::drawer ? &live.drawer_sink
                       : o.to == Audience::guesser ? &live.guesser_sink
                                                   : &reply;
    if (*sink) (*sink)(line);
  }
}

void GameServer::attach(const std::string& session_id, Role role, Sink sink) {
  auto live = get_or_create(session_id);
  std::lock_guard<std::mutex> lock(live->mu);
  (role == Role::drawer ? live->drawer_sink : live->guesser_sink) = std::move(sink);
}

void GameServer::dispatch(const std::string& session_id, Sender from, const json& message, const Sink& reply) {
  const bool is_join = message.is_object() && message.value("type", "") == "join";
  auto live = is_join ? get_or_create(session_id) : find(session_id);
  if (!live) {
    if (reply) reply(encode_line({{"type", "error"}, {"code", "unknown_session"}, {"message", "no session " + session_id}}));
    return;
  }
  {
    std::lock_guard<std::mutex> lock(live->mu);
    StepResult r = session_step(live->session, from, message, now());
    live->session = std::move(r.session);
    deliver(*live, r.out, reply);
  }
  after_step(live);
}

void GameServer::after_step(const std::shared_ptr<Live>& live) {
  std::lock_guard<std::mutex> lock(live->mu);
  const Session& s = live->session;
  if (s.phase == Phase::finished) {
    if (!live->persisted) {
      live->persisted = true;
      persist(s);
    }
    return;
  }
  if (live->ai_busy || !running_) return;
  const bool drawer_ai = s.phase == Phase::drawer_turn && config_.ai_drawer && s.drawer && s.drawer->is_ai;
  const bool guesser_ai = s.phase == Phase::guesser_turn && config_.ai_guesser && s.guesser && s.guesser->is_ai;
  if (!drawer_ai && !guesser_ai) return;
  live->ai_busy = true;
  std::lock_guard<std::mutex> wlock(workers_mu_);
  if (drawer_ai) {
    workers_.emplace_back([this, live] { run_ai_drawer(live); });
  } else {
    workers_.emplace_back([this, live] { run_ai_guesser(live); });
  }
}

void GameServer::run_ai_drawer(std::shared_ptr<Live> live) {
  Session snapshot;
  std::uint64_t seed = 0;
  {
    std::lock_guard<std::mutex> lock(live->mu);
    snapshot = live->session;
    seed = live->rng();
  }
  json msg;
  try {
    std::mt19937_64 rng(seed);
    std::vector<Drawing> priors;
    for (const auto& r : snapshot.state.rounds) priors.push_back(r.drawing);
    auto d = agents::diversify_drawing(*config_.ai_drawer, drawer_view(snapshot.state), priors, rng);
    msg = {{"type", "submit_drawing"},
           {"tokens", codec::to_strings(codec::encode_drawing(d.drawing, config_.context->library, config_.context->spec))}};
  } catch (const std::exception& e) {
    std::cerr << "ai drawer failed in " << snapshot.id << ": " << e.what() << "\n";
  }
  {
    std::lock_guard<std::mutex> lock(live->mu);
    live->ai_busy = false;
    if (!msg.is_null()) {
      StepResult r = session_step(live->session, Sender::drawer, msg, now());
      live->session = std::move(r.session);
      deliver(*live, r.out, nullptr);
    }
  }
  after_step(live);
}

void GameServer::run_ai_guesser(std::shared_ptr<Live> live) {
  while (running_) {
    Session snapshot;
    {
      std::lock_guard<std::mutex> lock(live->mu);
      snapshot = live->session;
    }
    if (snapshot.phase != Phase::guesser_turn) break;
    const GameState& st = snapshot.state;
    json msg{{"type", "pass_turn"}};
    if (st.rounds.back().guesses.size() < config_.context->ai_guesses_per_drawing) {
      auto constraints = GuessConstraints::from_view(mask_phrase(st.phrase), st.rounds);
      auto candidates = config_.ai_guesser->propose(guesser_view(st), constraints, 1);
      if (!candidates.empty()) msg = {{"type", "submit_guess"}, {"words", candidates.front()}};
    }
    std::lock_guard<std::mutex> lock(live->mu);
    StepResult r = session_step(live->session, Sender::guesser, msg, now());
    live->session = std::move(r.session);
    deliver(*live, r.out, nullptr);
    if (msg["type"] == "pass_turn") break;
  }
  {
    std::lock_guard<std::mutex> lock(live->mu);
    live->ai_busy = false;
  }
  after_step(live);
}

void GameServer::persist(const Session& s) {
  if (config_.data_dir.empty()) return;
  try {
    GameStore(config_.data_dir).append(to_record(s), utc_date());
  } catch (const std::exception& e) {
    std::cerr << "could not store " << s.id << ": " << e.what() << "\n";
  }
}

std::optional<GameRecord> GameServer::finished_game(const std::string& session_id) const {
  auto live = find(session_id);
  if (!live) return std::nullopt;
  std::lock_guard<std::mutex> lock(live->mu);
  if (live->session.phase != Phase::finished) return std::nullopt;
  return to_record(live->session);
}

std::optional<json> GameServer::session_snapshot(const std::string& session_id) const {
  auto live = find(session_id);
  if (!live) return std::nullopt;
  std::lock_guard<std::mutex> lock(live->mu);
  return session_to_json(live->session);
}

// ---------------------------------------------------------------------------
// Sockets

void GameServer::start() {
  if (running_) return;
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw std::runtime_error("socket() failed");
  int yes = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(config_.port));
  if (::inet_pton(AF_INET, config_.host.c_str(), &addr.sin_addr) != 1) throw std::runtime_error("bad host " + config_.host);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listen_fd_, 64) != 0) {
    ::close(listen_fd_);
    throw std::runtime_error("cannot listen on port " + std::to_string(config_.port));
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  bound_port_ = ntohs(addr.sin_port);

  if (config_.http_port >= 0) {
    http_ = std::make_unique<Http>();
    http_->server.Get("/icons", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(config_.context->library.to_manifest_text(), "application/json");
    });
    http_->server.Get(R"(/games/([A-Za-z0-9_.\-]+))", [this](const httplib::Request& req, httplib::Response& res) {
      auto rec = finished_game(req.matches[1]);
      if (!rec) {
        res.status = 404;
        res.set_content(R"({"error":"no finished game with that id"})", "application/json");
        return;
      }
      res.set_content(schema::dump_record(*rec), "application/json");
    });
    http_->server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"ok":true})", "application/json");
    });
    if (config_.http_port == 0) {
      bound_http_port_ = http_->server.bind_to_any_port(config_.host);
    } else if (http_->server.bind_to_port(config_.host, config_.http_port)) {
      bound_http_port_ = config_.http_port;
    } else {
      bound_http_port_ = -1;
    }
    if (bound_http_port_ < 0) throw std::runtime_error("cannot bind HTTP port");
    threads_.emplace_back([this] { http_->server.listen_after_bind(); });
  }

  running_ = true;
  threads_.emplace_back([this] { accept_loop(); });
  threads_.emplace_back([this] { tick_loop(); });
}

void GameServer::stop() {
  if (!running_.exchange(false)) return;
  if (http_) http_->server.stop();
  if (listen_fd_ >= 0) {
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
  for (auto& t : threads_) {
    if (t.joinable()) t.join();
  }
  threads_.clear();
  std::vector<std::thread> workers;
  {
    std::lock_guard<std::mutex> lock(workers_mu_);
    workers.swap(workers_);
  }
  for (auto& t : workers) {
    if (t.joinable()) t.join();
  }
}

void GameServer::wait() {
  while (running_) std::this_thread::sleep_for(std::chrono::milliseconds(100));
}

void GameServer::tick_loop() {
  while (running_) {
    std::this_thread::sleep_for(config_.tick_interval);
    std::vector<std::string> ids;
    {
      std::lock_guard<std::mutex> lock(sessions_mu_);
      for (const auto& [id, live] : sessions_) ids.push_back(id);
    }
    for (const auto& id : ids) {
      auto live = find(id);
      bool active = false;
      {
        std::lock_guard<std::mutex> lock(live->mu);
        active = live->session.started_at && live->session.phase != Phase::finished;
      }
      if (active) dispatch(id, Sender::server, {{"type", "tick"}}, nullptr);
    }
  }
}

void GameServer::accept_loop() {
  std::vector<std::thread> conns;
  std::vector<int> fds;
  while (running_) {
    pollfd p{listen_fd_, POLLIN, 0};
    if (::poll(&p, 1, 200) <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    fds.push_back(fd);
    conns.emplace_back([this, fd] { serve_connection(fd); });
  }
  for (int fd : fds) ::shutdown(fd, SHUT_RDWR);
  for (auto& t : conns) t.join();
}

void GameServer::serve_connection(int fd) {
  auto conn = std::make_shared<Conn>();
  conn->fd = fd;
  Sink sink = [conn](const std::string& line) { conn->write_line(line); };
  std::string session_id;
  std::optional<Sender> role;
  std::string buffer;
  char chunk[4096];
  while (running_) {
    pollfd p{fd, POLLIN, 0};
    const int ready = ::poll(&p, 1, 200);
    if (ready == 0) continue;
    if (ready < 0) break;
    const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
    if (n <= 0) break;
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t nl;
    while ((nl = buffer.find('\n')) != std::string::npos) {
      std::string line = buffer.substr(0, nl);
      buffer.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      json msg;
      try {
        msg = parse_client_message(line).body;
      } catch (const ProtocolError& e) {
        sink(encode_line({{"type", "error"}, {"code", e.code()}, {"message", e.what()}}));
        continue;
      }
      if (msg["type"] == "join") {
        if (!msg.contains("session") || !msg["session"].is_string()) {
          sink(encode_line({{"type", "error"}, {"code", "malformed"}, {"message", "join needs a \"session\" code"}}));
          continue;
        }
        if (role) {
          sink(encode_line({{"type", "error"}, {"code", "already_joined"}, {"message", "connection already joined"}}));
          continue;
        }
        const std::string sid = msg["session"].get<std::string>();
        const Sender as = msg["role"] == "drawer" ? Sender::drawer : Sender::guesser;
        bool joined = false;
        dispatch(sid, as, msg, [&](const std::string& out) {
          if (out.find("\"of\":\"join\"") != std::string::npos) joined = true;
          sink(out);
        });
        if (joined) {
          session_id = sid;
          role = as;
          attach(sid, as == Sender::drawer ? Role::drawer : Role::guesser, sink);
        }
        continue;
      }
      if (!role) {
        sink(encode_line({{"type", "error"}, {"code", "not_joined"}, {"message", "join a session first"}}));
        continue;
      }
      dispatch(session_id, *role, msg, sink);
    }
  }
  ::close(fd);
}

}  // namespace iconary::server
