#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "iconary/text.hpp"

namespace iconary {

// ---------------------------------------------------------------------------
// Icons

struct Icon {
  std::string id;
  std::string name;  // lowercase, 1-4 words
  std::vector<std::string> tags;
};

class IconLibrary {
 public:
  IconLibrary() = default;
  // Throws std::invalid_argument on duplicate ids, empty names, or arrow ids
  // that are not in the library.
  IconLibrary(std::vector<Icon> icons, std::vector<std::string> arrow_icon_ids);

  // Manifest: {"icons":[{"id","name","tags","art"}...], "arrows":[ids...]}.
  static IconLibrary load_manifest(const std::string& path);
  static IconLibrary from_manifest_text(std::string_view json_text);
  std::string to_manifest_text() const;

  const std::vector<Icon>& icons() const { return icons_; }
  const std::vector<std::string>& arrow_icon_ids() const { return arrows_; }
  const Icon* find(std::string_view id) const;
  const Icon& at(std::string_view id) const;
  bool contains(std::string_view id) const { return find(id) != nullptr; }
  bool is_arrow(std::string_view id) const;
  std::size_t size() const { return icons_.size(); }

 private:
  std::vector<Icon> icons_;
  std::vector<std::string> arrows_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

// ---------------------------------------------------------------------------
// Drawings

// Coordinates are normalized to the unit square; the 2:1 display aspect is a
// rendering concern.
struct IconPlacement {
  std::string icon_id;
  double x = 0.5;
  double y = 0.5;
  double scale = 1.0;
  double rotation = 0.0;  // degrees, [0, 360)
  bool flipped = false;

  bool operator==(const IconPlacement&) const = default;
};

struct Drawing {
  std::vector<IconPlacement> placements;  // creation order
  int round_index = 0;

  bool operator==(const Drawing&) const = default;
};

// Throws std::invalid_argument if a placement violates the pose ranges.
void validate_placement(const IconPlacement& p);
void validate_drawing(const Drawing& d);

// Sorted icon ids of the drawing (the bag-of-icons view).
std::vector<std::string> icon_multiset(const Drawing& d);

// ---------------------------------------------------------------------------
// Phrases and guesses

struct PhraseWord {
  std::string text;
  bool is_stopword = false;
  bool is_oov = false;
  bool guessed = false;

  bool operator==(const PhraseWord&) const = default;
};

class Phrase {
 public:
  Phrase() = default;
  // Throws std::invalid_argument when there is no content word or a word is
  // empty or contains whitespace.
  explicit Phrase(std::vector<PhraseWord> words);

  // Builds a phrase from raw text, flagging stopwords from `stopwords` and
  // OOV words as those absent from `train_vocab` (when given).
  static Phrase from_text(std::string_view text,
                          const StopwordList& stopwords = StopwordList::builtin(),
                          const std::map<std::string, int>* train_vocab = nullptr);

  const std::vector<PhraseWord>& words() const { return words_; }
  const PhraseWord& operator[](std::size_t i) const { return words_[i]; }
  std::size_t size() const { return words_.size(); }
  std::size_t content_count() const;
  std::string text() const;

  // Revealed to the Guesser: stopwords plus guessed words.
  bool revealed(std::size_t i) const {
    return words_[i].is_stopword || words_[i].guessed;
  }
  bool all_revealed() const;

  // Sets guessed for position i; never clears a flag.
  void mark_guessed(std::size_t i) { words_[i].guessed = true; }
  // Copy with every guessed flag cleared (start-of-game view).
  Phrase reset() const;

  bool operator==(const Phrase&) const = default;

 private:
  std::vector<PhraseWord> words_;
};

struct Guess {
  std::vector<std::string> words;
  std::vector<bool> correctness;  // empty until evaluated

  bool evaluated() const { return correctness.size() == words.size() && !words.empty(); }
  bool all_correct() const;
  bool operator==(const Guess&) const = default;
};

class InvalidGuess : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct GuessEvaluation {
  Guess guess;    // correctness filled
  Phrase phrase;  // guessed flags updated monotonically
  bool won = false;
};

// Position i is correct iff normalize_word(guess[i]) == normalize_word(phrase[i]).
// Throws InvalidGuess when lengths differ.
GuessEvaluation evaluate_guess(const Phrase& phrase, const Guess& guess);

// ---------------------------------------------------------------------------
// Game records

enum class Outcome { won, lost_timeout };
enum class Split { train, ind_valid, ind_test, ood_valid, ood_test };
enum class Role { drawer, guesser };

std::string_view to_string(Outcome o);
std::string_view to_string(Split s);
std::string_view to_string(Role r);
Outcome parse_outcome(std::string_view s);
Split parse_split(std::string_view s);
Role parse_role(std::string_view s);
bool is_ood(Split s);

struct Player {
  std::string id;  // anonymous
  bool is_ai = false;
  bool operator==(const Player&) const = default;
};

struct Round {
  Drawing drawing;
  std::vector<Guess> guesses;
  bool operator==(const Round&) const = default;
};

struct GameRecord {
  std::string game_id;
  Phrase phrase;  // guessed flags as of game end
  std::vector<Round> rounds;
  Outcome outcome = Outcome::lost_timeout;
  double elapsed_seconds = 0.0;
  Split split = Split::train;
  Player drawer;
  Player guesser;

  bool operator==(const GameRecord&) const = default;
};

struct GameOutcome {
  bool won = false;
  bool off_by_one = false;
  std::size_t missed_words = 0;  // content words never guessed
  // Some single guess matched every position (the stricter win reading).
  bool exact_phrase_guessed = false;
};

GameOutcome game_outcome(const GameRecord& record);

// Per-position guessed flags after replaying the first `max_guesses` guesses
// (all guesses when nullopt) of the first `max_rounds` rounds.
std::vector<bool> guessed_after(const GameRecord& record,
                                std::optional<std::size_t> max_guesses = std::nullopt,
                                std::optional<std::size_t> max_rounds = std::nullopt);

enum class Revision { edit = 0, add = 1, redraw = 2, single_drawing = 3 };
std::string_view to_string(Revision r);

Revision classify_revision(const Drawing& prev, const Drawing& next);
// Latter-most label over all consecutive drawing pairs.
Revision classify_game_revision(const GameRecord& record);

// ---------------------------------------------------------------------------
// Game state and role-restricted views

// Phrase as seen by the Guesser: unrevealed slots carry no text.
struct MaskedWord {
  std::optional<std::string> text;
  bool is_stopword = false;
  bool is_oov = false;
  bool operator==(const MaskedWord&) const = default;
};

struct MaskedPhrase {
  std::vector<MaskedWord> words;
  std::size_t size() const { return words.size(); }
  bool operator==(const MaskedPhrase&) const = default;
};

MaskedPhrase mask_phrase(const Phrase& phrase);

struct GameState {
  Phrase phrase;
  std::vector<Round> rounds;  // last round may have no guesses yet
  Role turn = Role::drawer;
  double remaining_seconds = 240.0;
};

struct DrawerView {
  Phrase phrase;
  std::vector<Round> rounds;
  double remaining_seconds = 0.0;
};

struct GuesserView {
  MaskedPhrase phrase;
  std::vector<Round> rounds;
  double remaining_seconds = 0.0;

  const Drawing* latest_drawing() const {
    return rounds.empty() ? nullptr : &rounds.back().drawing;
  }
};

DrawerView drawer_view(const GameState& state);
GuesserView guesser_view(const GameState& state);

}  // namespace iconary
