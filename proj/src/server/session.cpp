#include "iconary/server/session.hpp"

#include <algorithm>

#include "iconary/baseline.hpp"
#include "iconary/constraints.hpp"
#include "iconary/schema.hpp"

namespace iconary::server {

using nlohmann::json;

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::waiting: return "waiting";
    case Phase::drawer_turn: return "drawer_turn";
    case Phase::guesser_turn: return "guesser_turn";
    case Phase::finished: return "finished";
  }
  return "?";
}

std::string_view to_string(Sender s) {
  switch (s) {
    case Sender::drawer: return "drawer";
    case Sender::guesser: return "guesser";
    case Sender::server: return "server";
  }
  return "?";
}

Session new_session(std::string id, Phrase phrase, std::shared_ptr<const SessionContext> context) {
  if (!context) throw std::invalid_argument("session needs a context");
  Session s;
  s.id = std::move(id);
  s.context = std::move(context);
  s.state.phrase = phrase.reset();
  s.state.remaining_seconds = s.context->budget_seconds;
  return s;
}

double remaining_seconds(const Session& s) {
  if (!s.started_at) return s.context->budget_seconds;
  return std::max(0.0, s.context->budget_seconds - (s.clock - *s.started_at));
}

namespace {

json masked_words(const Phrase& p) {
  json out = json::array();
  for (std::size_t i = 0; i < p.size(); ++i) out.push_back(p.revealed(i) ? json(p[i].text) : json(nullptr));
  return out;
}

json full_words(const Phrase& p) {
  json out = json::array();
  for (const auto& w : p.words()) out.push_back(w.text);
  return out;
}

json slot_flags(const Phrase& p) {
  json out = json::array();
  for (const auto& w : p.words()) out.push_back(w.is_stopword ? "stopword" : "content");
  return out;
}

class Stepper {
 public:
  Stepper(const Session& s, Sender from, double now) : next_(s), from_(from) {
    next_.clock = std::max(now, s.clock);
  }

  StepResult run(const json& message) {
    next_.log.push_back({next_.clock, from_, message});
    const bool expired = next_.started_at && next_.phase != Phase::finished &&
                         next_.clock - *next_.started_at >= next_.context->budget_seconds;
    if (expired) fire_timeout();

    ClientMessage msg;
    try {
      msg = parse_client_object(message);
    } catch (const ProtocolError& e) {
      return reject(e.code(), e.what());
    }
    if (msg.type == ClientType::tick) {
      if (from_ != Sender::server) return reject("forbidden", "tick is reserved for the server");
      return finish();
    }
    if (from_ == Sender::server) return reject("forbidden", "server may only send tick");
    if (next_.phase == Phase::finished) return reject("finished", "the game is over");
    if (msg.type != ClientType::join) {
      const bool bound = from_ == Sender::drawer ? next_.drawer.has_value() : next_.guesser.has_value();
      if (!bound) return reject("not_joined", "join the session first");
    }

    switch (msg.type) {
      case ClientType::join: return join(msg.body);
      case ClientType::start: return start();
      case ClientType::submit_drawing: return submit_drawing(msg.body);
      case ClientType::submit_guess: return submit_guess(msg.body);
      case ClientType::pass_turn: return pass_turn();
      case ClientType::tick: break;
    }
    return finish();
  }

 private:
  StepResult finish() { return {std::move(next_), std::move(out_)}; }

  void send(Audience to, json body) { out_.push_back({to, std::move(body)}); }
  void both(const json& body) {
    send(Audience::drawer, body);
    send(Audience::guesser, body);
  }

  // Rejections only log the message; everything else stays as it was.
  StepResult reject(const std::string& code, const std::string& text) {
    if (from_ != Sender::server) send(Audience::sender, {{"type", "error"}, {"code", code}, {"message", text}});
    return finish();
  }

  void ack(Audience to, std::string_view of) {
    send(to, {{"type", "ack"}, {"of", of}, {"remaining_seconds", remaining_seconds(next_)}});
  }

  void game_over() {
    const std::string outcome(to_string(*next_.outcome));
    send(Audience::drawer, {{"type", "game_over"}, {"outcome", outcome}, {"phrase", full_words(next_.state.phrase)}});
    send(Audience::guesser,
         {{"type", "game_over"}, {"outcome", outcome}, {"phrase", masked_words(next_.state.phrase)}});
  }

  void fire_timeout() {
    next_.phase = Phase::finished;
    next_.timeout_fired = true;
    next_.outcome = Outcome::lost_timeout;
    next_.state.remaining_seconds = 0.0;
    both({{"type", "timeout"}, {"remaining_seconds", 0.0}});
    game_over();
  }

  void announce_turn(Role turn) {
    next_.state.turn = turn;
    next_.state.remaining_seconds = remaining_seconds(next_);
    both({{"type", "turn"}, {"turn", std::string(to_string(turn))}, {"remaining_seconds", remaining_seconds(next_)}});
  }

  StepResult join(const json& body) {
    if (next_.phase != Phase::waiting) return reject("out_of_phase", "players can only join before the start");
    const bool drawer = body["role"] == "drawer";
    auto& slot = drawer ? next_.drawer : next_.guesser;
    if (slot) return reject("role_taken", std::string(drawer ? "drawer" : "guesser") + " is already bound");
    slot = Player{body["player"].get<std::string>(), body.value("ai", false)};
    json reply{{"type", "ack"},
               {"of", "join"},
               {"session", next_.id},
               {"role", drawer ? "drawer" : "guesser"},
               {"slots", slot_flags(next_.state.phrase)},
               {"remaining_seconds", remaining_seconds(next_)}};
    reply["phrase"] = drawer ? full_words(next_.state.phrase) : masked_words(next_.state.phrase);
    send(Audience::sender, std::move(reply));
    return finish();
  }

  StepResult start() {
    if (next_.phase != Phase::waiting) return reject("out_of_phase", "the game has already started");
    if (!next_.drawer || !next_.guesser) return reject("not_ready", "both roles must be bound before start");
    next_.started_at = next_.clock;
    next_.phase = Phase::drawer_turn;
    ack(from_ == Sender::drawer ? Audience::drawer : Audience::guesser, "start");
    announce_turn(Role::drawer);
    return finish();
  }

  StepResult submit_drawing(const json& body) {
    if (from_ != Sender::drawer) return reject("not_your_turn", "only the drawer submits drawings");
    if (next_.phase != Phase::drawer_turn) return reject("out_of_phase", "it is not the drawer's turn");
    Drawing d;
    try {
      d = schema::drawing_from_json(body, "$");
      d.round_index = static_cast<int>(next_.state.rounds.size());
      if (d.placements.empty()) return reject("invalid_drawing", "a drawing needs at least one icon");
      for (auto& p : d.placements) {
        if (!next_.context->library.contains(p.icon_id)) return reject("invalid_drawing", "unknown icon " + p.icon_id);
        p.x = std::clamp(p.x, 0.0, 1.0);
        p.y = std::clamp(p.y, 0.0, 1.0);
      }
      validate_drawing(d);
    } catch (const std::exception& e) {
      return reject("invalid_drawing", e.what());
    }
    const auto tokens = codec::encode_drawing(d, next_.context->library, next_.context->spec);
    next_.state.rounds.push_back(Round{d, {}});
    next_.phase = Phase::guesser_turn;
    ack(Audience::drawer, "submit_drawing");
    send(Audience::guesser, {{"type", "drawing"},
                             {"round", d.round_index},
                             {"tokens", codec::to_strings(tokens)},
                             {"remaining_seconds", remaining_seconds(next_)}});
    announce_turn(Role::guesser);
    return finish();
  }

  StepResult submit_guess(const json& body) {
    if (from_ != Sender::guesser) return reject("not_your_turn", "only the guesser submits guesses");
    if (next_.phase != Phase::guesser_turn) return reject("out_of_phase", "it is not the guesser's turn");
    Guess g{body["words"].get<std::vector<std::string>>(), {}};
    Round& round = next_.state.rounds.back();
    if (next_.guesser->is_ai && round.guesses.size() >= next_.context->ai_guesses_per_drawing) {
      return reject("guess_limit", "AI guessers make at most " + std::to_string(next_.context->ai_guesses_per_drawing) +
                                       " guesses per drawing");
    }
    GuessEvaluation ev;
    try {
      ev = evaluate_guess(next_.state.phrase, g);
    } catch (const InvalidGuess& e) {
      return reject("bad_length", e.what());
    }
    json verdicts = json::array();
    for (std::size_t i = 0; i < g.words.size(); ++i) {
      verdicts.push_back(to_string(closeness(g.words[i], next_.state.phrase[i].text, next_.context->alignment.get(),
                                             next_.context->close_threshold)));
    }
    next_.state.phrase = ev.phrase;
    round.guesses.push_back(ev.guess);
    ack(Audience::guesser, "submit_guess");
    both({{"type", "feedback"},
          {"round", static_cast<int>(next_.state.rounds.size()) - 1},
          {"index", round.guesses.size() - 1},
          {"words", g.words},
          {"verdicts", verdicts},
          {"phrase", masked_words(next_.state.phrase)},
          {"remaining_seconds", remaining_seconds(next_)}});
    if (ev.won) {
      next_.phase = Phase::finished;
      next_.outcome = Outcome::won;
      game_over();
    }
    return finish();
  }

  StepResult pass_turn() {
    if (from_ != Sender::guesser) return reject("not_your_turn", "only the guesser passes the turn");
    if (next_.phase != Phase::guesser_turn) return reject("out_of_phase", "it is not the guesser's turn");
    next_.phase = Phase::drawer_turn;
    ack(Audience::guesser, "pass_turn");
    announce_turn(Role::drawer);
    return finish();
  }

  Session next_;
  Sender from_;
  std::vector<Outbound> out_;
};

}  // namespace

StepResult session_step(const Session& session, Sender from, const json& message, double now) {
  return Stepper(session, from, now).run(message);
}

Session replay_log(const Session& initial, const std::vector<LoggedEvent>& log) {
  Session s = initial;
  for (const auto& e : log) s = session_step(s, e.from, e.message, e.now).session;
  return s;
}

json session_to_json(const Session& s) {
  json rounds = json::array();
  for (const auto& r : s.state.rounds) {
    json guesses = json::array();
    for (const auto& g : r.guesses) guesses.push_back(schema::to_json(g));
    rounds.push_back({{"drawing", schema::to_json(r.drawing)}, {"guesses", guesses}});
  }
  auto player = [](const std::optional<Player>& p) {
    return p ? json{{"id", p->id}, {"ai", p->is_ai}} : json(nullptr);
  };
  json log = json::array();
  for (const auto& e : s.log) log.push_back({{"now", e.now}, {"from", to_string(e.from)}, {"message", e.message}});
  return {{"id", s.id},
          {"phase", to_string(s.phase)},
          {"turn", to_string(s.state.turn)},
          {"phrase", schema::to_json(s.state.phrase)},
          {"rounds", rounds},
          {"drawer", player(s.drawer)},
          {"guesser", player(s.guesser)},
          {"started_at", s.started_at ? json(*s.started_at) : json(nullptr)},
          {"clock", s.clock},
          {"remaining_seconds", s.state.remaining_seconds},
          {"timeout_fired", s.timeout_fired},
          {"outcome", s.outcome ? json(to_string(*s.outcome)) : json(nullptr)},
          {"log", log}};
}

GameRecord to_record(const Session& s) {
  GameRecord r;
  r.game_id = s.id;
  r.phrase = s.state.phrase;
  r.rounds = s.state.rounds;
  r.outcome = s.outcome.value_or(Outcome::lost_timeout);
  r.elapsed_seconds = s.started_at ? std::min(s.clock - *s.started_at, s.context->budget_seconds) : 0.0;
  r.split = Split::train;
  if (s.drawer) r.drawer = *s.drawer;
  if (s.guesser) r.guesser = *s.guesser;
  return r;
}

SelfPlayResult self_play(Session session, const DrawerAgent& drawer, const GuesserAgent& guesser,
                         std::mt19937_64& rng, const SelfPlayOptions& options) {
  SelfPlayResult result;
  double t = session.clock;
  auto step = [&](Sender from, const json& msg) {
    StepResult r = session_step(session, from, msg, t);
    session = std::move(r.session);
    for (auto& o : r.out) {
      if (o.body.value("type", "") == "error") ++result.protocol_errors;
      result.transcript.push_back(std::move(o));
    }
  };
  step(Sender::drawer, {{"type", "join"}, {"role", "drawer"}, {"player", "ai-drawer"}, {"ai", true}});
  step(Sender::guesser, {{"type", "join"}, {"role", "guesser"}, {"player", "ai-guesser"}, {"ai", true}});
  step(Sender::drawer, {{"type", "start"}});

  while (session.phase != Phase::finished) {
    if (session.phase == Phase::drawer_turn) {
      std::vector<Drawing> priors;
      for (const auto& r : session.state.rounds) priors.push_back(r.drawing);
      auto d = agents::diversify_drawing(drawer, drawer_view(session.state), priors, rng);
      t += options.seconds_per_drawing;
      step(Sender::drawer,
           {{"type", "submit_drawing"},
            {"tokens", codec::to_strings(codec::encode_drawing(d.drawing, session.context->library, session.context->spec))}});
      continue;
    }
    const GameState& st = session.state;
    std::optional<std::vector<std::string>> words;
    if (st.rounds.back().guesses.size() < session.context->ai_guesses_per_drawing) {
      auto constraints = GuessConstraints::from_view(mask_phrase(st.phrase), st.rounds);
      auto candidates = guesser.propose(guesser_view(st), constraints, 1);
      if (!candidates.empty()) words = candidates.front();
    }
    t += options.seconds_per_guess;
    if (words) {
      step(Sender::guesser, {{"type", "submit_guess"}, {"words", *words}});
    } else {
      step(Sender::guesser, {{"type", "pass_turn"}});
    }
  }
  result.session = std::move(session);
  return result;
}

}  // namespace iconary::server
