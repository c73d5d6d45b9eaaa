#pragma once

#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "iconary/agent.hpp"
#include "iconary/alignment.hpp"
#include "iconary/codec.hpp"
#include "iconary/core.hpp"
#include "iconary/server/protocol.hpp"

// Live game sessions as a pure state machine over timestamped messages.
namespace iconary::server {

enum class Phase { waiting, drawer_turn, guesser_turn, finished };
std::string_view to_string(Phase p);

// Shared, read-only configuration of a session.
struct SessionContext {
  IconLibrary library;
  codec::QuantizationSpec spec{};
  std::shared_ptr<const agents::AlignmentModel> alignment;  // optional, for "close" verdicts
  double close_threshold = kDefaultCloseThreshold;
  double budget_seconds = 240.0;
  std::size_t ai_guesses_per_drawing = 5;
};

enum class Sender { drawer, guesser, server };
std::string_view to_string(Sender s);

struct LoggedEvent {
  double now = 0.0;
  Sender from = Sender::server;
  nlohmann::json message;
  bool operator==(const LoggedEvent&) const = default;
};

struct Session {
  std::string id;
  std::shared_ptr<const SessionContext> context;
  GameState state;  // full phrase; guessed flags as revealed so far
  std::optional<Player> drawer;
  std::optional<Player> guesser;
  Phase phase = Phase::waiting;
  std::optional<double> started_at;
  double clock = 0.0;  // latest reading seen; never decreases
  bool timeout_fired = false;
  std::optional<Outcome> outcome;
  std::vector<LoggedEvent> log;
};

Session new_session(std::string id, Phrase phrase, std::shared_ptr<const SessionContext> context);

// `sender` addresses the connection the message came from (join replies and
// errors, before a role may be bound).
enum class Audience { drawer, guesser, sender };

struct Outbound {
  Audience to = Audience::drawer;
  nlohmann::json body;
  bool operator==(const Outbound&) const = default;
};

struct StepResult {
  Session session;
  std::vector<Outbound> out;
};

// Pure transition. The message is appended to the event log whether it is
// accepted or rejected; rejected messages leave every other field unchanged
// and produce one error reply to the sender. Any message arriving after the
// budget has run out first fires the timeout.
StepResult session_step(const Session& session, Sender from, const nlohmann::json& message, double now);

// Re-applies a session's log to a fresh session with the same id, phrase
// and context.
Session replay_log(const Session& initial, const std::vector<LoggedEvent>& log);

double remaining_seconds(const Session& s);

// Everything that determines future behaviour, for byte-level comparison.
nlohmann::json session_to_json(const Session& s);

// Transcript in the canonical record form (split is "train" for live games).
GameRecord to_record(const Session& s);

// Agent-vs-agent game driven through session_step with a simulated clock.
struct SelfPlayOptions {
  double seconds_per_drawing = 20.0;
  double seconds_per_guess = 8.0;
};

struct SelfPlayResult {
  Session session;
  std::size_t protocol_errors = 0;  // error replies received by either agent
  std::vector<Outbound> transcript;
};

SelfPlayResult self_play(Session session, const DrawerAgent& drawer, const GuesserAgent& guesser,
                         std::mt19937_64& rng, const SelfPlayOptions& options = {});

}  // namespace iconary::server
