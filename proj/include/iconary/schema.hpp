#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "iconary/core.hpp"

// Canonical JSON form of game records (see docs/game-schema.md).
namespace iconary::schema {

inline constexpr int kSchemaVersion = 1;

class SchemaError : public std::runtime_error {
 public:
  SchemaError(std::string path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

nlohmann::json to_json(const IconPlacement& p);
nlohmann::json to_json(const Drawing& d);
nlohmann::json to_json(const Phrase& p);
nlohmann::json to_json(const Guess& g);
nlohmann::json to_json(const GameRecord& r);

// Structural parsing; throws SchemaError naming the JSON path of the first
// problem. A drawing may be given as "icons" (continuous poses) or as
// "tokens" (wire-form quantized tokens).
IconPlacement placement_from_json(const nlohmann::json& j, const std::string& path = "$");
Drawing drawing_from_json(const nlohmann::json& j, const std::string& path = "$");
Phrase phrase_from_json(const nlohmann::json& j, const std::string& path = "$");
Guess guess_from_json(const nlohmann::json& j, const std::string& path = "$");
GameRecord record_from_json(const nlohmann::json& j);

// Semantic checks beyond structure: guess lengths, non-empty rounds for
// finished games, pose ranges, and the won-implies-all-guessed rule. Returns
// human-readable violations (empty when valid).
std::vector<std::string> validate_record(const GameRecord& r);

// Stable text form: sorted keys, no whitespace.
std::string dump_record(const GameRecord& r);

}  // namespace iconary::schema
