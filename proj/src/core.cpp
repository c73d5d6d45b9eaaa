#include "iconary/core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace iconary {

using nlohmann::json;

// ---------------------------------------------------------------------------
// IconLibrary

IconLibrary::IconLibrary(std::vector<Icon> icons, std::vector<std::string> arrow_icon_ids)
    : icons_(std::move(icons)), arrows_(std::move(arrow_icon_ids)) {
  for (std::size_t i = 0; i < icons_.size(); ++i) {
    const Icon& icon = icons_[i];
    if (icon.id.empty()) throw std::invalid_argument("icon with empty id");
    if (icon.name.empty()) throw std::invalid_argument("icon '" + icon.id + "' has empty name");
    if (!index_.emplace(icon.id, i).second) {
      throw std::invalid_argument("duplicate icon id '" + icon.id + "'");
    }
  }
  for (const auto& a : arrows_) {
    if (!contains(a)) throw std::invalid_argument("arrow id '" + a + "' not in library");
  }
}

const Icon* IconLibrary::find(std::string_view id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &icons_[it->second];
}

const Icon& IconLibrary::at(std::string_view id) const {
  const Icon* icon = find(id);
  if (!icon) throw std::invalid_argument("unknown icon id '" + std::string(id) + "'");
  return *icon;
}

bool IconLibrary::is_arrow(std::string_view id) const {
  return std::find(arrows_.begin(), arrows_.end(), id) != arrows_.end();
}

IconLibrary IconLibrary::from_manifest_text(std::string_view json_text) {
  json j = json::parse(json_text);
  std::vector<Icon> icons;
  for (const auto& e : j.at("icons")) {
    Icon icon;
    icon.id = e.at("id").get<std::string>();
    icon.name = e.at("name").get<std::string>();
    if (e.contains("tags")) icon.tags = e.at("tags").get<std::vector<std::string>>();
    icons.push_back(std::move(icon));
  }
  std::vector<std::string> arrows;
  if (j.contains("arrows")) arrows = j.at("arrows").get<std::vector<std::string>>();
  return IconLibrary(std::move(icons), std::move(arrows));
}

IconLibrary IconLibrary::load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open icon manifest: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_manifest_text(buf.str());
}

std::string IconLibrary::to_manifest_text() const {
  json icons = json::array();
  for (const auto& icon : icons_) {
    icons.push_back({{"id", icon.id}, {"name", icon.name}, {"tags", icon.tags}});
  }
  return json{{"icons", icons}, {"arrows", arrows_}}.dump(2);
}

// ---------------------------------------------------------------------------
// Drawings

void validate_placement(const IconPlacement& p) {
  auto finite = [](double v) { return std::isfinite(v); };
  if (p.icon_id.empty()) throw std::invalid_argument("placement without icon id");
  if (!finite(p.x) || p.x < 0.0 || p.x > 1.0) throw std::invalid_argument("x outside [0,1]");
  if (!finite(p.y) || p.y < 0.0 || p.y > 1.0) throw std::invalid_argument("y outside [0,1]");
  if (!finite(p.scale) || p.scale <= 0.0) throw std::invalid_argument("scale must be positive");
  if (!finite(p.rotation) || p.rotation < 0.0 || p.rotation >= 360.0) {
    throw std::invalid_argument("rotation outside [0,360)");
  }
}

void validate_drawing(const Drawing& d) {
  if (d.placements.empty()) throw std::invalid_argument("drawing has no placements");
  if (d.round_index < 0) throw std::invalid_argument("negative round index");
  for (const auto& p : d.placements) validate_placement(p);
}

std::vector<std::string> icon_multiset(const Drawing& d) {
  std::vector<std::string> ids;
  ids.reserve(d.placements.size());
  for (const auto& p : d.placements) ids.push_back(p.icon_id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

// ---------------------------------------------------------------------------
// Phrase

Phrase::Phrase(std::vector<PhraseWord> words) : words_(std::move(words)) {
  bool has_content = false;
  for (const auto& w : words_) {
    if (w.text.empty()) throw std::invalid_argument("empty phrase word");
    for (char c : w.text) {
      if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
        throw std::invalid_argument("phrase word contains whitespace: '" + w.text + "'");
      }
    }
    if (!w.is_stopword) has_content = true;
  }
  if (!has_content) throw std::invalid_argument("phrase has no content word");
}

Phrase Phrase::from_text(std::string_view text, const StopwordList& stopwords,
                         const std::map<std::string, int>* train_vocab) {
  std::vector<PhraseWord> words;
  for (auto& raw : split_words(text)) {
    PhraseWord w;
    w.text = normalize_word(raw);
    w.is_stopword = stopwords.contains(w.text);
    w.is_oov = train_vocab != nullptr && !w.is_stopword && !train_vocab->count(w.text);
    words.push_back(std::move(w));
  }
  return Phrase(std::move(words));
}

std::size_t Phrase::content_count() const {
  return static_cast<std::size_t>(std::count_if(
      words_.begin(), words_.end(), [](const PhraseWord& w) { return !w.is_stopword; }));
}

std::string Phrase::text() const {
  std::vector<std::string> t;
  for (const auto& w : words_) t.push_back(w.text);
  return join_words(t);
}

bool Phrase::all_revealed() const {
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (!revealed(i)) return false;
  }
  return true;
}

Phrase Phrase::reset() const {
  Phrase p = *this;
  for (auto& w : p.words_) w.guessed = false;
  return p;
}

bool Guess::all_correct() const {
  return evaluated() && std::all_of(correctness.begin(), correctness.end(), [](bool b) { return b; });
}

GuessEvaluation evaluate_guess(const Phrase& phrase, const Guess& guess) {
  if (guess.words.size() != phrase.size()) {
    throw InvalidGuess("guess has " + std::to_string(guess.words.size()) +
                       " words, phrase has " + std::to_string(phrase.size()));
  }
  GuessEvaluation out{guess, phrase, false};
  out.guess.correctness.assign(guess.words.size(), false);
  for (std::size_t i = 0; i < guess.words.size(); ++i) {
    if (words_match(guess.words[i], phrase[i].text)) {
      out.guess.correctness[i] = true;
      out.phrase.mark_guessed(i);
    }
  }
  out.won = out.guess.all_correct() || out.phrase.all_revealed();
  return out;
}

// ---------------------------------------------------------------------------
// Enums

std::string_view to_string(Outcome o) { return o == Outcome::won ? "won" : "lost_timeout"; }

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::ind_valid: return "ind_valid";
    case Split::ind_test: return "ind_test";
    case Split::ood_valid: return "ood_valid";
    case Split::ood_test: return "ood_test";
  }
  return "train";
}

std::string_view to_string(Role r) { return r == Role::drawer ? "drawer" : "guesser"; }

Outcome parse_outcome(std::string_view s) {
  if (s == "won") return Outcome::won;
  if (s == "lost_timeout") return Outcome::lost_timeout;
  throw std::invalid_argument("unknown outcome '" + std::string(s) + "'");
}

Split parse_split(std::string_view s) {
  for (Split sp : {Split::train, Split::ind_valid, Split::ind_test, Split::ood_valid, Split::ood_test}) {
    if (to_string(sp) == s) return sp;
  }
  throw std::invalid_argument("unknown split '" + std::string(s) + "'");
}

Role parse_role(std::string_view s) {
  if (s == "drawer") return Role::drawer;
  if (s == "guesser") return Role::guesser;
  throw std::invalid_argument("unknown role '" + std::string(s) + "'");
}

bool is_ood(Split s) { return s == Split::ood_valid || s == Split::ood_test; }

std::string_view to_string(Revision r) {
  switch (r) {
    case Revision::edit: return "edit";
    case Revision::add: return "add";
    case Revision::redraw: return "redraw";
    case Revision::single_drawing: return "single_drawing";
  }
  return "edit";
}

// ---------------------------------------------------------------------------
// Outcomes

std::vector<bool> guessed_after(const GameRecord& record, std::optional<std::size_t> max_guesses,
                                std::optional<std::size_t> max_rounds) {
  const Phrase& phrase = record.phrase;
  std::vector<bool> guessed(phrase.size(), false);
  for (std::size_t i = 0; i < phrase.size(); ++i) guessed[i] = phrase[i].is_stopword;
  std::size_t used = 0;
  std::size_t rounds = 0;
  for (const auto& round : record.rounds) {
    if (max_rounds && rounds >= *max_rounds) break;
    ++rounds;
    for (const auto& g : round.guesses) {
      if (max_guesses && used >= *max_guesses) return guessed;
      ++used;
      if (g.words.size() != phrase.size()) continue;
      for (std::size_t i = 0; i < phrase.size(); ++i) {
        if (!guessed[i] && words_match(g.words[i], phrase[i].text)) guessed[i] = true;
      }
    }
  }
  return guessed;
}

GameOutcome game_outcome(const GameRecord& record) {
  GameOutcome out;
  std::vector<bool> guessed = guessed_after(record);
  for (std::size_t i = 0; i < guessed.size(); ++i) {
    if (!guessed[i] && !record.phrase[i].is_stopword) ++out.missed_words;
  }
  out.won = out.missed_words == 0;
  out.off_by_one = out.missed_words <= 1;
  for (const auto& round : record.rounds) {
    for (const auto& g : round.guesses) {
      if (g.words.size() != record.phrase.size()) continue;
      bool all = true;
      for (std::size_t i = 0; i < g.words.size() && all; ++i) {
        all = words_match(g.words[i], record.phrase[i].text);
      }
      if (all) out.exact_phrase_guessed = true;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Revisions

Revision classify_revision(const Drawing& prev, const Drawing& next) {
  const auto a = icon_multiset(prev);
  const auto b = icon_multiset(next);
  if (a == b) return Revision::edit;
  if (std::includes(b.begin(), b.end(), a.begin(), a.end())) return Revision::add;
  if (std::includes(a.begin(), a.end(), b.begin(), b.end())) return Revision::edit;
  return Revision::redraw;
}

Revision classify_game_revision(const GameRecord& record) {
  if (record.rounds.size() < 2) return Revision::single_drawing;
  Revision worst = Revision::edit;
  for (std::size_t i = 1; i < record.rounds.size(); ++i) {
    Revision r = classify_revision(record.rounds[i - 1].drawing, record.rounds[i].drawing);
    if (static_cast<int>(r) > static_cast<int>(worst)) worst = r;
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Views

MaskedPhrase mask_phrase(const Phrase& phrase) {
  MaskedPhrase out;
  for (std::size_t i = 0; i < phrase.size(); ++i) {
    MaskedWord w;
    w.is_stopword = phrase[i].is_stopword;
    w.is_oov = phrase[i].is_oov;
    if (phrase.revealed(i)) w.text = phrase[i].text;
    out.words.push_back(std::move(w));
  }
  return out;
}

DrawerView drawer_view(const GameState& state) {
  return DrawerView{state.phrase, state.rounds, state.remaining_seconds};
}

GuesserView guesser_view(const GameState& state) {
  return GuesserView{mask_phrase(state.phrase), state.rounds, state.remaining_seconds};
}

}  // namespace iconary
