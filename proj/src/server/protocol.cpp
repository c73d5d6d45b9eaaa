#include "iconary/server/protocol.hpp"

namespace iconary::server {

using nlohmann::json;

std::string_view to_string(ClientType t) {
  switch (t) {
    case ClientType::join: return "join";
    case ClientType::start: return "start";
    case ClientType::submit_drawing: return "submit_drawing";
    case ClientType::submit_guess: return "submit_guess";
    case ClientType::pass_turn: return "pass_turn";
    case ClientType::tick: return "tick";
  }
  return "?";
}

std::string_view to_string(ServerType t) {
  switch (t) {
    case ServerType::ack: return "ack";
    case ServerType::drawing: return "drawing";
    case ServerType::feedback: return "feedback";
    case ServerType::turn: return "turn";
    case ServerType::timeout: return "timeout";
    case ServerType::game_over: return "game_over";
    case ServerType::error: return "error";
  }
  return "?";
}

std::optional<ClientType> parse_client_type(std::string_view s) {
  for (auto t : {ClientType::join, ClientType::start, ClientType::submit_drawing, ClientType::submit_guess,
                 ClientType::pass_turn, ClientType::tick}) {
    if (to_string(t) == s) return t;
  }
  return std::nullopt;
}

ClientMessage parse_client_message(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ProtocolError("malformed", std::string("not valid JSON: ") + e.what());
  }
  return parse_client_object(j);
}

ClientMessage parse_client_object(const json& j) {
  if (!j.is_object()) throw ProtocolError("malformed", "message must be a JSON object");
  auto it = j.find("type");
  if (it == j.end() || !it->is_string()) throw ProtocolError("malformed", "missing \"type\"");
  auto type = parse_client_type(it->get<std::string>());
  if (!type) throw ProtocolError("malformed", "unknown message type \"" + it->get<std::string>() + "\"");

  auto need_string = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_string()) throw ProtocolError("malformed", std::string("\"") + key + "\" must be a string");
  };
  switch (*type) {
    case ClientType::join:
      need_string("role");
      if (j["role"] != "drawer" && j["role"] != "guesser") throw ProtocolError("malformed", "role must be drawer or guesser");
      need_string("player");
      if (j.contains("ai") && !j["ai"].is_boolean()) throw ProtocolError("malformed", "\"ai\" must be a boolean");
      break;
    case ClientType::submit_drawing:
      if (!j.contains("tokens") && !j.contains("icons")) throw ProtocolError("malformed", "drawing needs \"tokens\" or \"icons\"");
      break;
    case ClientType::submit_guess: {
      if (!j.contains("words") || !j["words"].is_array()) throw ProtocolError("malformed", "\"words\" must be an array");
      for (const auto& w : j["words"]) {
        if (!w.is_string()) throw ProtocolError("malformed", "guess words must be strings");
      }
      break;
    }
    default:
      break;
  }
  return {*type, j};
}

std::string encode_line(const json& message) { return message.dump(); }

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::correct: return "correct";
    case Verdict::close: return "close";
    case Verdict::incorrect: return "incorrect";
  }
  return "?";
}

Verdict closeness(std::string_view guess_word, std::string_view phrase_word, const agents::AlignmentModel* model,
                  double threshold) {
  if (words_match(guess_word, phrase_word)) return Verdict::correct;
  if (!model) return Verdict::incorrect;
  auto cos = model->word_cosine(guess_word, phrase_word);
  return cos && *cos >= threshold ? Verdict::close : Verdict::incorrect;
}

}  // namespace iconary::server
