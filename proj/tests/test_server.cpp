#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "iconary/constraints.hpp"
#include "iconary/schema.hpp"
#include "iconary/server/ingest.hpp"
#include "iconary/server/net.hpp"
#include "iconary/server/protocol.hpp"
#include "iconary/server/session.hpp"

using namespace iconary;
using namespace iconary::server;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::shared_ptr<const SessionContext> context() {
  auto c = std::make_shared<SessionContext>();
  c->library = IconLibrary({{"dog", "dog", {}}, {"ball", "ball", {}}, {"cat", "cat", {}}, {"arrow", "arrow", {}}}, {"arrow"});
  return c;
}

json join(const std::string& role, const std::string& player, bool ai = false) {
  return {{"type", "join"}, {"role", role}, {"player", player}, {"ai", ai}};
}

json drawing_msg(std::vector<std::string> icons) {
  json arr = json::array();
  double x = 0.2;
  for (auto& i : icons) {
    arr.push_back({{"icon", i}, {"x", x}, {"y", 0.5}, {"scale", 1.0}, {"rotation", 0.0}, {"flipped", false}});
    x += 0.3;
  }
  return {{"type", "submit_drawing"}, {"icons", arr}};
}

json guess_msg(std::vector<std::string> words) { return {{"type", "submit_guess"}, {"words", words}}; }

struct Script {
  Session s;
  std::vector<Outbound> out;
  std::string drawer_lines, guesser_lines;
  double t = 0;

  explicit Script(const std::string& phrase) : s(new_session("s1", Phrase::from_text(phrase), context())) {}

  StepResult step(Sender from, const json& m, double dt = 1.0) {
    t += dt;
    StepResult r = session_step(s, from, m, t);
    s = r.session;
    for (const auto& o : r.out) {
      const Audience to = o.to == Audience::sender ? (from == Sender::drawer ? Audience::drawer : Audience::guesser) : o.to;
      (to == Audience::drawer ? drawer_lines : guesser_lines) += encode_line(o.body) + "\n";
      out.push_back(o);
    }
    return r;
  }
};

std::string types(const std::vector<Outbound>& out) {
  std::string s;
  for (const auto& o : out) s += o.body["type"].get<std::string>() + " ";
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path temp_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("iconary-test-" + name + "-" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// The two-round game in docs/fixtures: a drawing, five wrong guesses, a
// pass, a revised drawing, a winning guess.
Script fixture_game() {
  Script g("a dog chasing ball");
  g.step(Sender::drawer, join("drawer", "p1"));
  g.step(Sender::guesser, join("guesser", "p2"));
  g.step(Sender::guesser, {{"type", "start"}});
  g.step(Sender::drawer, drawing_msg({"dog", "ball"}), 10);
  g.step(Sender::guesser, guess_msg({"a", "dog", "eating", "cat"}));
  for (const char* w : {"biting", "holding", "kicking", "throwing"}) g.step(Sender::guesser, guess_msg({"a", "dog", w, "ball"}));
  g.step(Sender::guesser, {{"type", "pass_turn"}});
  g.step(Sender::drawer, drawing_msg({"dog", "arrow", "ball"}), 12);
  g.step(Sender::guesser, guess_msg({"A", "dog", "Chasing", "ball"}));
  return g;
}

}  // namespace

TEST_CASE("protocol parsing") {
  CHECK(parse_client_message(R"({"type":"tick"})").type == ClientType::tick);
  for (const char* bad : {"", "{", "[]", R"({"type":7})", R"({"type":"dance"})", R"({"type":"join","role":"judge","player":"x"})",
                          R"({"type":"join","role":"drawer"})", R"({"type":"submit_guess","words":"dog"})",
                          R"({"type":"submit_guess","words":[1]})", R"({"type":"submit_drawing"})"}) {
    CAPTURE(bad);
    try {
      parse_client_message(bad);
      FAIL("expected a protocol error");
    } catch (const ProtocolError& e) {
      CHECK(e.code() == "malformed");
    }
  }
  CHECK(encode_line({{"b", 1}, {"a", "x"}}) == R"({"a":"x","b":1})");
}

TEST_CASE("closeness verdicts") {
  agents::AlignmentModel m(2, {"dog", "puppy", "car"}, {}, {1, 0, 0.9, std::sqrt(1 - 0.81), 0, 1}, {});
  CHECK(closeness("Dog", "dog", &m) == Verdict::correct);
  CHECK(closeness("puppy", "dog", &m) == Verdict::close);
  CHECK(closeness("car", "dog", &m) == Verdict::incorrect);
  CHECK(closeness("puppy", "dog", &m, 0.95) == Verdict::incorrect);
  CHECK(closeness("zebra", "dog", &m) == Verdict::incorrect);
  CHECK(closeness("puppy", "dog", nullptr) == Verdict::incorrect);
}

TEST_CASE("a winning two-round game") {
  Script g = fixture_game();
  CHECK(g.s.phase == Phase::finished);
  CHECK(g.s.outcome == Outcome::won);
  REQUIRE(g.s.state.rounds.size() == 2);
  CHECK(g.s.state.rounds[0].guesses.size() == 5);
  CHECK(g.s.state.rounds[1].guesses.size() == 1);
  const GameRecord r = to_record(g.s);
  CHECK(schema::validate_record(r).empty());
  CHECK(game_outcome(r).won);
  CHECK(r.elapsed_seconds == doctest::Approx(g.t - 3));
  CHECK(r.split == Split::train);
}

TEST_CASE("rejected messages leave the session unchanged") {
  Script g("a dog chasing ball");
  g.step(Sender::drawer, join("drawer", "p1"));
  auto r = g.step(Sender::guesser, {{"type", "start"}});
  CHECK(r.out.size() == 1);
  CHECK(r.out[0].body["code"] == "not_joined");
  g.step(Sender::guesser, join("guesser", "p2"));
  CHECK(g.step(Sender::guesser, join("guesser", "p3")).out[0].body["code"] == "role_taken");
  g.step(Sender::drawer, {{"type", "start"}});
  CHECK(g.s.phase == Phase::drawer_turn);

  const json before = session_to_json(g.s);
  r = g.step(Sender::guesser, guess_msg({"a", "dog", "x", "y"}));
  REQUIRE(r.out.size() == 1);
  CHECK(r.out[0].to == Audience::sender);
  CHECK(r.out[0].body["code"] == "out_of_phase");
  json after = session_to_json(g.s);
  // only the log and the clock move
  after["log"] = before["log"];
  after["clock"] = before["clock"];
  CHECK(after == before);

  CHECK(g.step(Sender::drawer, drawing_msg({"unicorn"})).out[0].body["code"] == "invalid_drawing");
  CHECK(g.step(Sender::drawer, drawing_msg({})).out[0].body["code"] == "invalid_drawing");
  CHECK(g.step(Sender::drawer, {{"type", "submit_drawing"}, {"tokens", {"<icon:dog>", "<x_3>"}}}).out[0].body["code"] ==
        "invalid_drawing");
  CHECK(g.step(Sender::drawer, {{"type", "tick"}}).out[0].body["code"] == "forbidden");
  CHECK(types(g.step(Sender::drawer, drawing_msg({"dog"})).out) == "ack drawing turn turn ");
  CHECK(g.step(Sender::guesser, guess_msg({"dog"})).out[0].body["code"] == "bad_length");
}

TEST_CASE("guesser never sees hidden words") {
  Script g = fixture_game();
  const std::string hidden = "chasing";
  // the word is revealed by the final feedback; everything before must not carry it
  const auto fb = g.guesser_lines.rfind("\"type\":\"feedback\"");
  REQUIRE(fb != std::string::npos);
  const auto cut = g.guesser_lines.rfind('\n', fb);
  CHECK(g.guesser_lines.substr(0, cut).find(hidden) == std::string::npos);
  CHECK(g.drawer_lines.find(hidden) != std::string::npos);
}

TEST_CASE("timeout fires exactly once") {
  Script g("dog");
  g.step(Sender::drawer, join("drawer", "p1"));
  g.step(Sender::guesser, join("guesser", "p2"));
  g.step(Sender::drawer, {{"type", "start"}});
  auto r = g.step(Sender::server, {{"type", "tick"}}, 100);
  CHECK(r.out.empty());
  r = g.step(Sender::server, {{"type", "tick"}}, 200);
  CHECK(types(r.out) == "timeout timeout game_over game_over ");
  CHECK(g.s.timeout_fired);
  CHECK(g.s.outcome == Outcome::lost_timeout);
  r = g.step(Sender::server, {{"type", "tick"}}, 10);
  CHECK(r.out.empty());
  r = g.step(Sender::drawer, drawing_msg({"dog"}));
  CHECK(r.out[0].body["code"] == "finished");

  Script late("dog");
  late.step(Sender::drawer, join("drawer", "p1"));
  late.step(Sender::guesser, join("guesser", "p2"));
  late.step(Sender::drawer, {{"type", "start"}});
  r = late.step(Sender::drawer, drawing_msg({"dog"}), 500);
  CHECK(types(r.out).rfind("timeout timeout game_over game_over", 0) == 0);
  CHECK(late.s.state.rounds.empty());
}

TEST_CASE("clock never runs backwards") {
  Script g("dog");
  g.step(Sender::drawer, join("drawer", "p1"));
  g.step(Sender::guesser, join("guesser", "p2"));
  g.step(Sender::drawer, {{"type", "start"}}, 50);
  const double c = g.s.clock;
  g.step(Sender::drawer, drawing_msg({"dog"}), -20);
  CHECK(g.s.clock == c);
}

TEST_CASE("replaying the log reproduces the session") {
  Script g = fixture_game();
  const Session fresh = new_session("s1", Phrase::from_text("a dog chasing ball"), context());
  CHECK(session_to_json(replay_log(fresh, g.s.log)).dump() == session_to_json(g.s).dump());
}

TEST_CASE("protocol fixtures are byte exact") {
  const fs::path dir = fs::path(ICONARY_SOURCE_DIR) / "docs" / "fixtures";
  Script g = fixture_game();
  std::string in;
  for (const auto& e : g.s.log) {
    in += encode_line({{"now", e.now}, {"from", std::string(to_string(e.from))}, {"message", e.message}}) + "\n";
  }
  if (std::getenv("ICONARY_UPDATE_FIXTURES")) {
    fs::create_directories(dir);
    std::ofstream(dir / "two_round_game.in.jsonl", std::ios::binary) << in;
    std::ofstream(dir / "two_round_game.drawer.jsonl", std::ios::binary) << g.drawer_lines;
    std::ofstream(dir / "two_round_game.guesser.jsonl", std::ios::binary) << g.guesser_lines;
  }
  CHECK(slurp(dir / "two_round_game.in.jsonl") == in);
  CHECK(slurp(dir / "two_round_game.drawer.jsonl") == g.drawer_lines);
  CHECK(slurp(dir / "two_round_game.guesser.jsonl") == g.guesser_lines);

  // the input fixture drives a fresh session to the same output
  Session s = new_session("s1", Phrase::from_text("a dog chasing ball"), context());
  std::istringstream lines(slurp(dir / "two_round_game.in.jsonl"));
  std::string line;
  std::vector<Outbound> out;
  while (std::getline(lines, line)) {
    const json e = json::parse(line);
    const Sender from = e["from"] == "drawer" ? Sender::drawer : e["from"] == "guesser" ? Sender::guesser : Sender::server;
    auto r = session_step(s, from, e["message"], e["now"].get<double>());
    s = r.session;
    out.insert(out.end(), r.out.begin(), r.out.end());
  }
  CHECK(out == g.out);
}

TEST_CASE("ingest reports violations") {
  const GameRecord good = to_record(fixture_game().s);
  std::string text;
  for (int i = 0; i < 30; ++i) {
    GameRecord r = good;
    r.game_id = "g" + std::to_string(i);
    text += schema::dump_record(r) + "\n";
  }
  GameRecord bad = good;
  bad.game_id = "bad";
  bad.rounds[0].guesses[0].words.pop_back();
  const std::string one_bad = text + schema::dump_record(bad) + "\n" + "{not json\n";
  auto res = ingest_jsonl_text(one_bad, "mem", IngestOptions{1.0});
  CHECK(res.corpus.size() == 30);
  CHECK(res.report.records_seen == 32);
  CHECK(res.report.violations.size() == 2);
  CHECK(res.report.violations[0].source == "mem:31");
  CHECK(res.report.violation_rate() == doctest::Approx(2.0 / 32));
  CHECK_THROWS_AS(ingest_jsonl_text(one_bad, "mem", IngestOptions{0.05}), IngestError);
  CHECK_NOTHROW(ingest_jsonl_text(one_bad, "mem", IngestOptions{0.07}));

  IngestOptions strict;
  IconLibrary lib({{"dog", "dog", {}}}, {});
  strict.library = &lib;
  strict.max_violation_rate = 1.0;
  CHECK(ingest_jsonl_text(text, "mem", strict).corpus.empty());
}

TEST_CASE("export and re-import is byte stable") {
  const auto corpus = ingest_dataset(fs::path(ICONARY_SOURCE_DIR) / "data" / "synthetic50.jsonl").corpus;
  REQUIRE(corpus.size() == 50);
  const std::string once = export_jsonl(corpus);
  const auto again = ingest_jsonl_text(once, "mem").corpus;
  CHECK(again == corpus);
  CHECK(export_jsonl(again) == once);
}

TEST_CASE("ingest walks directories and lists unparseable files") {
  const fs::path dir = temp_dir("ingest");
  fs::create_directories(dir / "a" / "b");
  GameRecord r = to_record(fixture_game().s);
  std::ofstream(dir / "a" / "one.json") << schema::dump_record(r);
  r.game_id = "s2";
  write_jsonl(dir / "a" / "b" / "two.jsonl", {r});
  std::ofstream(dir / "broken.json") << "{{{";
  std::ofstream(dir / "notes.txt") << "ignored";
  const auto res = ingest_dataset(dir);
  CHECK(res.corpus.size() == 2);
  CHECK(res.report.unparseable_files.size() == 1);
  CHECK_THROWS_AS(ingest_dataset(dir / "missing"), IngestError);
  fs::remove_all(dir);
}

TEST_CASE("game store appends by date") {
  const fs::path dir = temp_dir("store");
  GameStore store(dir);
  GameRecord r = to_record(fixture_game().s);
  const fs::path p = store.append(r, "2024-03-09");
  CHECK(p == dir / "2024" / "03" / "09" / "s1.json");
  CHECK_THROWS(store.append(r, "2024-03-09"));
  r.game_id = "s2";
  store.append(r, "2024-03-10");
  const auto loaded = store.load();
  CHECK(loaded.corpus.size() == 2);
  CHECK_THROWS(store.append(r, "March 10"));
  fs::remove_all(dir);
}

TEST_CASE("self-play drives a full game") {
  class Fixed final : public DrawerAgent {
   public:
    Drawing draw(const DrawerView&) const override { return Drawing{{{"dog", 0.5, 0.5, 1.0, 0.0, false}}, 0}; }
    Drawing sample(const DrawerView&, std::mt19937_64&) const override {
      return Drawing{{{"ball", 0.5, 0.5, 1.0, 0.0, false}}, 0};
    }
  };
  class Says final : public GuesserAgent {
   public:
    std::vector<std::vector<std::string>> propose(const GuesserView& v, const GuessConstraints& c,
                                                  std::size_t) const override {
      for (const char* w : {"cat", "dog"}) {
        std::vector<std::string> g{w};
        if (v.rounds.size() >= 2 && c.satisfied_by(g)) return {g};
      }
      return {};
    }
  };
  std::mt19937_64 rng(1);
  auto r = self_play(new_session("sp", Phrase::from_text("dog"), context()), Fixed{}, Says{}, rng);
  CHECK(r.protocol_errors == 0);
  CHECK(r.session.outcome == Outcome::won);
  REQUIRE(r.session.state.rounds.size() == 2);
  CHECK(r.session.state.rounds[1].drawing.placements[0].icon_id == "ball");
}

namespace {

int connect_to(int port) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in a{};
  a.sin_family = AF_INET;
  a.sin_port = htons(static_cast<std::uint16_t>(port));
  ::inet_pton(AF_INET, "127.0.0.1", &a.sin_addr);
  REQUIRE(::connect(fd, reinterpret_cast<sockaddr*>(&a), sizeof a) == 0);
  timeval tv{5, 0};
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
  return fd;
}

void send_line(int fd, const json& j) {
  const std::string s = j.dump() + "\n";
  REQUIRE(::send(fd, s.data(), s.size(), 0) == static_cast<ssize_t>(s.size()));
}

// Reads lines until one has the given type.
json read_until(int fd, const std::string& type, std::string& buf) {
  char chunk[4096];
  for (;;) {
    std::size_t nl;
    while ((nl = buf.find('\n')) != std::string::npos) {
      json j = json::parse(buf.substr(0, nl));
      buf.erase(0, nl + 1);
      if (j["type"] == type) return j;
    }
    const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
    if (n <= 0) return json();
    buf.append(chunk, static_cast<std::size_t>(n));
  }
}

class DogDrawer final : public DrawerAgent {
 public:
  Drawing draw(const DrawerView&) const override { return Drawing{{{"dog", 0.5, 0.5, 1.0, 0.0, false}}, 0}; }
  Drawing sample(const DrawerView& v, std::mt19937_64&) const override { return draw(v); }
};

}  // namespace

TEST_CASE("server: human guesser against an AI drawer over TCP and HTTP") {
  const fs::path dir = temp_dir("serve");
  ServerConfig cfg;
  cfg.port = 0;
  cfg.http_port = 0;
  cfg.context = context();
  cfg.phrases = {"big dog"};
  cfg.ai_drawer = std::make_shared<DogDrawer>();
  cfg.data_dir = dir;
  cfg.tick_interval = std::chrono::milliseconds(50);
  GameServer server(cfg);
  server.start();
  REQUIRE(server.port() > 0);
  REQUIRE(server.http_port() > 0);

  const int fd = connect_to(server.port());
  std::string buf;
  send_line(fd, {{"type", "submit_guess"}, {"words", {"x"}}});
  CHECK(read_until(fd, "error", buf)["code"] == "not_joined");
  send_line(fd, {{"type", "join"}, {"session", "abc"}, {"role", "guesser"}, {"player", "me"}});
  const json ack = read_until(fd, "ack", buf);
  CHECK(ack["phrase"] == json::array({nullptr, nullptr}));
  send_line(fd, {{"type", "start"}});
  const json drawing = read_until(fd, "drawing", buf);
  CHECK(drawing["tokens"][0] == "<icon:dog>");
  send_line(fd, {{"type", "submit_guess"}, {"words", {"big", "dog"}}});
  const json over = read_until(fd, "game_over", buf);
  CHECK(over["outcome"] == "won");
  ::close(fd);

  httplib::Client http("127.0.0.1", server.http_port());
  auto health = http.Get("/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  auto icons = http.Get("/icons");
  REQUIRE(icons);
  CHECK(IconLibrary::from_manifest_text(icons->body).contains("dog"));
  auto game = http.Get("/games/abc");
  REQUIRE(game);
  CHECK(game->status == 200);
  CHECK(schema::record_from_json(json::parse(game->body)).outcome == Outcome::won);
  CHECK(http.Get("/games/nope")->status == 404);

  server.stop();
  CHECK(GameStore(dir).load().corpus.size() == 1);
  fs::remove_all(dir);
}
