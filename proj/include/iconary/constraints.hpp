#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "iconary/agent.hpp"
#include "iconary/core.hpp"

// Lexically constrained guess generation over a wordpiece vocabulary.
namespace iconary {

// Word-level constraints for one guess: phrase length, words known to be
// correct, words known to be wrong at each position, and complete guesses
// that must not be repeated. Words are stored normalized.
struct GuessConstraints {
  std::size_t n_words = 0;
  std::vector<std::optional<std::string>> known;
  std::vector<std::set<std::string>> incorrect;
  std::vector<std::vector<std::string>> prior_guesses;

  GuessConstraints() = default;
  explicit GuessConstraints(std::size_t n);

  // Known words from the revealed slots, plus history from every evaluated
  // guess in `rounds`.
  static GuessConstraints from_view(const MaskedPhrase& phrase, const std::vector<Round>& rounds);

  // Folds an evaluated guess in: correct words become known, wrong ones are
  // excluded at their position, and the full guess is never repeated.
  void record(const Guess& evaluated);

  bool is_prior(const std::vector<std::string>& words) const;
  // Exact compliance of a finished word sequence.
  bool satisfied_by(const std::vector<std::string>& words) const;
};

}  // namespace iconary

namespace iconary::constraints {

class TokenizerView {
 public:
  TokenizerView(std::vector<std::string> surfaces, std::vector<bool> word_start, std::size_t eos_id);

  // One word-start piece per word, then eos.
  static TokenizerView whole_words(const std::vector<std::string>& words);
  // SentencePiece-style listing: pieces beginning with "▁" start a word,
  // others continue one. "</s>" is eos.
  static TokenizerView from_marked(const std::vector<std::string>& marked_pieces);

  std::size_t size() const { return surfaces_.size(); }
  std::size_t eos() const { return eos_; }
  bool is_word_start(std::size_t id) const { return word_start_[id]; }
  bool is_continuation(std::size_t id) const { return id != eos_ && !word_start_[id]; }
  const std::string& surface(std::size_t id) const { return surfaces_[id]; }
  std::optional<std::size_t> find(std::string_view surface, bool word_start) const;

  // Greedy longest-match segmentation of one word; the first piece is a
  // word-start piece. nullopt when the word cannot be spelled.
  std::optional<std::vector<std::size_t>> tokenize_word(std::string_view word) const;

  std::vector<std::string> words_of(std::span<const std::size_t> pieces) const;

 private:
  std::vector<std::string> surfaces_;
  std::vector<bool> word_start_;
  std::size_t eos_;
  std::map<std::pair<std::string, bool>, std::size_t, std::less<>> index_;
};

// Decoding progress of one beam.
struct ConstraintState {
  std::size_t words_started = 0;
  std::size_t pieces_in_word = 0;
  std::string partial;  // surface of the word in progress
  bool finished = false;

  std::size_t current_word() const { return words_started - 1; }
  ConstraintState advance(std::size_t piece, const TokenizerView& tok) const;
};

// Constraints plus the tokenization of every known word.
class CompiledConstraints {
 public:
  CompiledConstraints(GuessConstraints constraints, const TokenizerView& tok);

  const GuessConstraints& constraints() const { return c_; }
  const std::optional<std::vector<std::size_t>>& known_pieces(std::size_t pos) const { return known_pieces_[pos]; }

 private:
  GuessConstraints c_;
  std::vector<std::optional<std::vector<std::size_t>>> known_pieces_;
};

// Admissible next pieces. An all-false mask marks the beam dead.
std::vector<bool> allowed_mask(const ConstraintState& state, const CompiledConstraints& constraints,
                               const TokenizerView& tok);

// softmax(logits + b * unseen). Throws std::invalid_argument on non-finite
// logits or b < 0.
std::vector<double> boost_rare(std::span<const double> logits, const std::vector<bool>& unseen, double b);
std::vector<double> log_boost_rare(std::span<const double> logits, const std::vector<bool>& unseen, double b);

// Prefix -> one finite score (logit) per vocabulary piece.
class TokenScorer {
 public:
  virtual ~TokenScorer() = default;
  virtual std::vector<double> score(std::span<const std::size_t> prefix) const = 0;
  // Scorers that cannot be called concurrently return false; scores() then
  // serializes calls.
  virtual bool concurrent_safe() const { return true; }

  std::vector<double> scores(std::span<const std::size_t> prefix) const;

 private:
  mutable std::mutex serial_;
};

class UniformScorer final : public TokenScorer {
 public:
  explicit UniformScorer(std::size_t vocab) : vocab_(vocab) {}
  std::vector<double> score(std::span<const std::size_t>) const override;

 private:
  std::size_t vocab_;
};

// Prefix-independent log-frequency scores (add-one smoothed).
class UnigramScorer final : public TokenScorer {
 public:
  explicit UnigramScorer(const std::vector<double>& counts);
  std::vector<double> score(std::span<const std::size_t>) const override { return logits_; }

 private:
  std::vector<double> logits_;
};

// Scores `target[len(prefix)]` at 0 and everything else at `off`; after the
// target is exhausted eos wins.
class StubScorer final : public TokenScorer {
 public:
  StubScorer(std::size_t vocab, std::vector<std::size_t> target, std::size_t eos, double off = -30.0);
  std::vector<double> score(std::span<const std::size_t> prefix) const override;

 private:
  std::size_t vocab_;
  std::vector<std::size_t> target_;
  std::size_t eos_;
  double off_;
};

class FunctionScorer final : public TokenScorer {
 public:
  using Fn = std::function<std::vector<double>(std::span<const std::size_t>)>;
  explicit FunctionScorer(Fn fn, bool concurrent_safe = true) : fn_(std::move(fn)), safe_(concurrent_safe) {}
  std::vector<double> score(std::span<const std::size_t> prefix) const override { return fn_(prefix); }
  bool concurrent_safe() const override { return safe_; }

 private:
  Fn fn_;
  bool safe_;
};

struct SearchOptions {
  std::size_t beams = 20;
  std::size_t max_pieces = 24;  // excluding eos
  double boost = 2.0;
  std::vector<bool> unseen;  // per vocab piece; empty = none
  std::size_t max_results = 20;
};

struct Hypothesis {
  std::vector<std::size_t> pieces;  // without eos
  std::vector<std::string> words;
  double log_prob = 0.0;  // includes eos

  // Mean log-probability per emitted piece, eos included.
  double normalized_score() const { return log_prob / static_cast<double>(pieces.size() + 1); }
};

// Score used to rank finished hypotheses.
double length_normalized(double log_prob, std::size_t pieces_with_eos);

struct SearchResult {
  std::vector<Hypothesis> ranked;  // best first, distinct word sequences
  std::size_t dead_beams = 0;
  bool no_guess() const { return ranked.empty(); }
};

SearchResult constrained_beam_search(const TokenScorer& lm, const GuessConstraints& constraints,
                                     const TokenizerView& tok, const SearchOptions& options = {});

// GuesserAgent backed by a scorer factory and constrained beam search.
class LmGuesser final : public GuesserAgent {
 public:
  using ScorerFactory = std::function<std::unique_ptr<TokenScorer>(const GuesserView&)>;
  LmGuesser(TokenizerView tok, ScorerFactory factory, SearchOptions options = {});
  std::vector<std::vector<std::string>> propose(const GuesserView& view, const GuessConstraints& constraints,
                                                std::size_t max_candidates) const override;

 private:
  TokenizerView tok_;
  ScorerFactory factory_;
  SearchOptions options_;
};

struct RoundResult {
  std::vector<Guess> guesses;  // evaluated, in submission order
  Phrase phrase;               // guessed flags after the round
  bool won = false;
};

// Up to k guesses for the latest drawing. Each guess is evaluated before the
// next is requested, so revealed and excluded words tighten the constraints
// within the round.
RoundResult guess_round(const GuesserAgent& agent, const GameState& state, std::size_t k = 5);

}  // namespace iconary::constraints
