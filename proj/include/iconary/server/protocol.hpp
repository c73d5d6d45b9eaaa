#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "iconary/alignment.hpp"
#include "iconary/core.hpp"

// Newline-delimited JSON wire protocol (see docs/protocol.md).
namespace iconary::server {

enum class ClientType { join, start, submit_drawing, submit_guess, pass_turn, tick };
enum class ServerType { ack, drawing, feedback, turn, timeout, game_over, error };

std::string_view to_string(ClientType t);
std::string_view to_string(ServerType t);
std::optional<ClientType> parse_client_type(std::string_view s);

class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(std::string code, const std::string& what) : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

// A client message after structural checks. `body` keeps the full object.
struct ClientMessage {
  ClientType type = ClientType::tick;
  nlohmann::json body;
};

// Throws ProtocolError("malformed", ...) for non-JSON input, a missing or
// unknown "type", or payload fields of the wrong shape.
ClientMessage parse_client_message(std::string_view line);
ClientMessage parse_client_object(const nlohmann::json& j);

// One line of wire output: compact JSON with sorted keys, no trailing newline.
std::string encode_line(const nlohmann::json& message);

enum class Verdict { correct, close, incorrect };
std::string_view to_string(Verdict v);

inline constexpr double kDefaultCloseThreshold = 0.5;

// correct per evaluate_guess; close when the alignment word embeddings have
// cosine >= threshold; incorrect otherwise, including words the model does
// not know and the case where no model is loaded.
Verdict closeness(std::string_view guess_word, std::string_view phrase_word, const agents::AlignmentModel* model,
                  double threshold = kDefaultCloseThreshold);

}  // namespace iconary::server
