#include "iconary/schema.hpp"

#include "iconary/codec.hpp"

namespace iconary::schema {

using nlohmann::json;

namespace {

const json& field(const json& j, const char* key, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw SchemaError(path + "." + key, "missing field");
  return *it;
}

template <typename T>
T get_as(const json& j, const char* key, const std::string& path) {
  const json& v = field(j, key, path);
  try {
    return v.get<T>();
  } catch (const json::exception& e) {
    throw SchemaError(path + "." + key, std::string("wrong type: ") + e.what());
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return get_as<T>(j, key, path);
}

Player player_from_json(const json& j, const std::string& path) {
  Player p;
  p.id = get_or<std::string>(j, "id", "", path);
  p.is_ai = get_or<bool>(j, "ai", false, path);
  return p;
}

}  // namespace

json to_json(const IconPlacement& p) {
  return {{"icon", p.icon_id}, {"x", p.x},        {"y", p.y},
          {"scale", p.scale},  {"rotation", p.rotation}, {"flipped", p.flipped}};
}

json to_json(const Drawing& d) {
  json icons = json::array();
  for (const auto& p : d.placements) icons.push_back(to_json(p));
  return {{"round_index", d.round_index}, {"icons", icons}};
}

json to_json(const Phrase& p) {
  json words = json::array();
  for (const auto& w : p.words()) {
    words.push_back({{"text", w.text}, {"stopword", w.is_stopword}, {"oov", w.is_oov}, {"guessed", w.guessed}});
  }
  return words;
}

json to_json(const Guess& g) {
  json out{{"words", g.words}};
  if (g.evaluated()) {
    std::vector<bool> c(g.correctness.begin(), g.correctness.end());
    out["correct"] = c;
  }
  return out;
}

json to_json(const GameRecord& r) {
  json rounds = json::array();
  for (const auto& round : r.rounds) {
    json guesses = json::array();
    for (const auto& g : round.guesses) guesses.push_back(to_json(g));
    rounds.push_back({{"drawing", to_json(round.drawing)}, {"guesses", guesses}});
  }
  return {{"schema_version", kSchemaVersion},
          {"game_id", r.game_id},
          {"split", std::string(to_string(r.split))},
          {"outcome", std::string(to_string(r.outcome))},
          {"elapsed_seconds", r.elapsed_seconds},
          {"phrase", to_json(r.phrase)},
          {"drawer", {{"id", r.drawer.id}, {"ai", r.drawer.is_ai}}},
          {"guesser", {{"id", r.guesser.id}, {"ai", r.guesser.is_ai}}},
          {"rounds", rounds}};
}

IconPlacement placement_from_json(const json& j, const std::string& path) {
  IconPlacement p;
  p.icon_id = get_as<std::string>(j, "icon", path);
  p.x = get_as<double>(j, "x", path);
  p.y = get_as<double>(j, "y", path);
  p.scale = get_or<double>(j, "scale", 1.0, path);
  p.rotation = get_or<double>(j, "rotation", 0.0, path);
  p.flipped = get_or<bool>(j, "flipped", false, path);
  return p;
}

Drawing drawing_from_json(const json& j, const std::string& path) {
  Drawing d;
  d.round_index = get_or<int>(j, "round_index", 0, path);
  if (j.is_object() && j.contains("tokens") && !j.contains("icons")) {
    auto strings = get_as<std::vector<std::string>>(j, "tokens", path);
    try {
      Drawing decoded = codec::decode_drawing(codec::parse_tokens(strings), {}, d.round_index);
      return decoded;
    } catch (const std::exception& e) {
      throw SchemaError(path + ".tokens", e.what());
    }
  }
  const json& icons = field(j, "icons", path);
  if (!icons.is_array()) throw SchemaError(path + ".icons", "expected an array");
  for (std::size_t i = 0; i < icons.size(); ++i) {
    d.placements.push_back(placement_from_json(icons[i], path + ".icons[" + std::to_string(i) + "]"));
  }
  return d;
}

Phrase phrase_from_json(const json& j, const std::string& path) {
  if (!j.is_array()) throw SchemaError(path, "expected an array of words");
  std::vector<PhraseWord> words;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    PhraseWord w;
    w.text = get_as<std::string>(j[i], "text", p);
    w.is_stopword = get_or<bool>(j[i], "stopword", false, p);
    w.is_oov = get_or<bool>(j[i], "oov", false, p);
    w.guessed = get_or<bool>(j[i], "guessed", false, p);
    words.push_back(std::move(w));
  }
  try {
    return Phrase(std::move(words));
  } catch (const std::invalid_argument& e) {
    throw SchemaError(path, e.what());
  }
}

Guess guess_from_json(const json& j, const std::string& path) {
  Guess g;
  g.words = get_as<std::vector<std::string>>(j, "words", path);
  if (j.contains("correct")) {
    auto c = get_as<std::vector<bool>>(j, "correct", path);
    g.correctness.assign(c.begin(), c.end());
    if (g.correctness.size() != g.words.size()) throw SchemaError(path + ".correct", "length differs from words");
  }
  return g;
}

GameRecord record_from_json(const json& j) {
  const std::string root = "$";
  GameRecord r;
  int version = get_or<int>(j, "schema_version", kSchemaVersion, root);
  if (version != kSchemaVersion) throw SchemaError("$.schema_version", "unsupported version " + std::to_string(version));
  r.game_id = get_as<std::string>(j, "game_id", root);
  try {
    r.split = parse_split(get_as<std::string>(j, "split", root));
  } catch (const std::invalid_argument& e) {
    throw SchemaError("$.split", e.what());
  }
  try {
    r.outcome = parse_outcome(get_as<std::string>(j, "outcome", root));
  } catch (const std::invalid_argument& e) {
    throw SchemaError("$.outcome", e.what());
  }
  r.elapsed_seconds = get_or<double>(j, "elapsed_seconds", 0.0, root);
  r.phrase = phrase_from_json(field(j, "phrase", root), "$.phrase");
  if (j.contains("drawer")) r.drawer = player_from_json(j["drawer"], "$.drawer");
  if (j.contains("guesser")) r.guesser = player_from_json(j["guesser"], "$.guesser");
  const json& rounds = field(j, "rounds", root);
  if (!rounds.is_array()) throw SchemaError("$.rounds", "expected an array");
  for (std::size_t i = 0; i < rounds.size(); ++i) {
    const std::string p = "$.rounds[" + std::to_string(i) + "]";
    Round round;
    round.drawing = drawing_from_json(field(rounds[i], "drawing", p), p + ".drawing");
    const json& guesses = field(rounds[i], "guesses", p);
    if (!guesses.is_array()) throw SchemaError(p + ".guesses", "expected an array");
    for (std::size_t g = 0; g < guesses.size(); ++g) {
      round.guesses.push_back(guess_from_json(guesses[g], p + ".guesses[" + std::to_string(g) + "]"));
    }
    r.rounds.push_back(std::move(round));
  }
  return r;
}

std::vector<std::string> validate_record(const GameRecord& r) {
  std::vector<std::string> out;
  if (r.game_id.empty()) out.push_back("empty game_id");
  if (r.elapsed_seconds < 0.0) out.push_back("negative elapsed_seconds");
  bool any_guess = false;
  for (std::size_t i = 0; i < r.rounds.size(); ++i) {
    const auto& round = r.rounds[i];
    const std::string where = "round " + std::to_string(i);
    try {
      validate_drawing(round.drawing);
    } catch (const std::invalid_argument& e) {
      out.push_back(where + ": " + e.what());
    }
    for (std::size_t g = 0; g < round.guesses.size(); ++g) {
      any_guess = true;
      if (round.guesses[g].words.size() != r.phrase.size()) {
        out.push_back(where + " guess " + std::to_string(g) + ": length " +
                      std::to_string(round.guesses[g].words.size()) + " != phrase length " +
                      std::to_string(r.phrase.size()));
      }
    }
  }
  if (r.rounds.empty() && r.outcome == Outcome::won) out.push_back("won game without rounds");
  if (r.outcome == Outcome::won && !any_guess) out.push_back("won game without guesses");
  if (r.outcome == Outcome::won && out.empty() && !game_outcome(r).won) {
    out.push_back("outcome is won but some content word was never guessed");
  }
  return out;
}

std::string dump_record(const GameRecord& r) { return to_json(r).dump(); }

}  // namespace iconary::schema
