#include "iconary/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace iconary {

GuessConstraints::GuessConstraints(std::size_t n) : n_words(n), known(n), incorrect(n) {}

GuessConstraints GuessConstraints::from_view(const MaskedPhrase& phrase, const std::vector<Round>& rounds) {
  GuessConstraints c(phrase.size());
  for (std::size_t i = 0; i < phrase.size(); ++i) {
    if (phrase.words[i].text) c.known[i] = normalize_word(*phrase.words[i].text);
  }
  for (const auto& round : rounds) {
    for (const auto& g : round.guesses) {
      if (g.words.size() == c.n_words) c.record(g);
    }
  }
  return c;
}

void GuessConstraints::record(const Guess& g) {
  if (g.words.size() != n_words) throw InvalidGuess("guess length does not match the phrase");
  std::vector<std::string> normalized;
  for (const auto& w : g.words) normalized.push_back(normalize_word(w));
  if (g.evaluated()) {
    for (std::size_t i = 0; i < n_words; ++i) {
      if (g.correctness[i]) {
        known[i] = normalized[i];
      } else if (!known[i]) {
        incorrect[i].insert(normalized[i]);
      }
    }
  }
  if (!is_prior(normalized)) prior_guesses.push_back(std::move(normalized));
}

bool GuessConstraints::is_prior(const std::vector<std::string>& words) const {
  for (const auto& p : prior_guesses) {
    if (p.size() != words.size()) continue;
    bool same = true;
    for (std::size_t i = 0; i < p.size() && same; ++i) same = p[i] == normalize_word(words[i]);
    if (same) return true;
  }
  return false;
}

bool GuessConstraints::satisfied_by(const std::vector<std::string>& words) const {
  if (words.size() != n_words) return false;
  for (std::size_t i = 0; i < n_words; ++i) {
    const std::string w = normalize_word(words[i]);
    if (known[i] && *known[i] != w) return false;
    if (incorrect[i].count(w)) return false;
  }
  return !is_prior(words);
}

}  // namespace iconary

namespace iconary::constraints {

// ---------------------------------------------------------------------------
// Tokenizer

TokenizerView::TokenizerView(std::vector<std::string> surfaces, std::vector<bool> word_start, std::size_t eos_id)
    : surfaces_(std::move(surfaces)), word_start_(std::move(word_start)), eos_(eos_id) {
  if (surfaces_.size() != word_start_.size()) throw std::invalid_argument("one word-start flag per piece");
  if (eos_ >= surfaces_.size()) throw std::invalid_argument("eos id out of range");
  word_start_[eos_] = false;
  for (std::size_t i = 0; i < surfaces_.size(); ++i) {
    if (i == eos_) continue;
    if (surfaces_[i].empty()) throw std::invalid_argument("empty wordpiece");
    index_.emplace(std::make_pair(surfaces_[i], static_cast<bool>(word_start_[i])), i);
  }
}

TokenizerView TokenizerView::whole_words(const std::vector<std::string>& words) {
  std::vector<std::string> s;
  std::vector<bool> ws;
  std::set<std::string> seen;
  for (const auto& w : words) {
    std::string n = normalize_word(w);
    if (n.empty() || !seen.insert(n).second) continue;
    s.push_back(std::move(n));
    ws.push_back(true);
  }
  const std::size_t eos = s.size();
  s.emplace_back("</s>");
  ws.push_back(false);
  return TokenizerView(std::move(s), std::move(ws), eos);
}

TokenizerView TokenizerView::from_marked(const std::vector<std::string>& marked) {
  static const std::string kMarker = "\xE2\x96\x81";  // U+2581
  std::vector<std::string> s;
  std::vector<bool> ws;
  std::optional<std::size_t> eos;
  for (const auto& p : marked) {
    if (p == "</s>") {
      eos = s.size();
      s.push_back(p);
      ws.push_back(false);
    } else if (p.rfind(kMarker, 0) == 0) {
      s.push_back(p.substr(kMarker.size()));
      ws.push_back(true);
    } else {
      s.push_back(p);
      ws.push_back(false);
    }
  }
  if (!eos) throw std::invalid_argument("vocabulary has no </s>");
  return TokenizerView(std::move(s), std::move(ws), *eos);
}

std::optional<std::size_t> TokenizerView::find(std::string_view surface, bool word_start) const {
  auto it = index_.find(std::make_pair(std::string(surface), word_start));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::vector<std::size_t>> TokenizerView::tokenize_word(std::string_view word) const {
  const std::string w = normalize_word(word);
  std::vector<std::size_t> out;
  std::size_t pos = 0;
  while (pos < w.size()) {
    bool found = false;
    for (std::size_t len = w.size() - pos; len > 0; --len) {
      if (auto id = find(std::string_view(w).substr(pos, len), out.empty())) {
        out.push_back(*id);
        pos += len;
        found = true;
        break;
      }
    }
    if (!found) return std::nullopt;
  }
  if (out.empty()) return std::nullopt;
  return out;
}

std::vector<std::string> TokenizerView::words_of(std::span<const std::size_t> pieces) const {
  std::vector<std::string> words;
  for (std::size_t id : pieces) {
    if (id == eos_) break;
    if (word_start_[id] || words.empty()) {
      words.push_back(surfaces_[id]);
    } else {
      words.back() += surfaces_[id];
    }
  }
  return words;
}

// ---------------------------------------------------------------------------
// Constraint state

ConstraintState ConstraintState::advance(std::size_t piece, const TokenizerView& tok) const {
  ConstraintState next = *this;
  if (piece == tok.eos()) {
    next.finished = true;
  } else if (tok.is_word_start(piece)) {
    ++next.words_started;
    next.pieces_in_word = 1;
    next.partial = tok.surface(piece);
  } else {
    ++next.pieces_in_word;
    next.partial += tok.surface(piece);
  }
  return next;
}

CompiledConstraints::CompiledConstraints(GuessConstraints constraints, const TokenizerView& tok)
    : c_(std::move(constraints)) {
  c_.known.resize(c_.n_words);
  c_.incorrect.resize(c_.n_words);
  for (const auto& k : c_.known) {
    known_pieces_.push_back(k ? tok.tokenize_word(*k) : std::nullopt);
  }
}

std::vector<bool> allowed_mask(const ConstraintState& state, const CompiledConstraints& compiled,
                               const TokenizerView& tok) {
  std::vector<bool> mask(tok.size(), false);
  if (state.finished) return mask;
  const GuessConstraints& c = compiled.constraints();
  const std::size_t n = c.n_words;
  const std::size_t started = state.words_started;

  bool word_can_end = true;
  if (started >= 1) {
    const std::size_t cur = state.current_word();
    const auto& pieces = compiled.known_pieces(cur);
    if (c.known[cur]) {
      // Inside a known word: only its own next piece.
      if (!pieces) return mask;
      word_can_end = state.pieces_in_word == pieces->size();
      if (state.pieces_in_word < pieces->size()) mask[(*pieces)[state.pieces_in_word]] = true;
    } else {
      for (std::size_t id = 0; id < tok.size(); ++id) {
        if (tok.is_continuation(id)) mask[id] = true;
      }
    }
    // A word known to be wrong here may only be extended, not closed.
    if (c.incorrect[cur].count(normalize_word(state.partial))) word_can_end = false;
  }
  if (!word_can_end) return mask;

  if (started < n) {
    if (c.known[started]) {
      const auto& pieces = compiled.known_pieces(started);
      if (pieces) mask[pieces->front()] = true;
    } else {
      for (std::size_t id = 0; id < tok.size(); ++id) {
        if (tok.is_word_start(id)) mask[id] = true;
      }
    }
  } else {
    mask[tok.eos()] = true;
  }
  return mask;
}

// ---------------------------------------------------------------------------
// Boosting

std::vector<double> log_boost_rare(std::span<const double> logits, const std::vector<bool>& unseen, double b) {
  if (!(b >= 0.0) || !std::isfinite(b)) throw std::invalid_argument("boost must be finite and >= 0");
  if (!unseen.empty() && unseen.size() != logits.size()) throw std::invalid_argument("unseen mask size mismatch");
  std::vector<double> z(logits.begin(), logits.end());
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!std::isfinite(z[i])) throw std::invalid_argument("non-finite logit at index " + std::to_string(i));
    if (!unseen.empty() && unseen[i]) z[i] += b;
  }
  if (z.empty()) return z;
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - mx);
  const double lse = mx + std::log(sum);
  for (double& v : z) v -= lse;
  return z;
}

std::vector<double> boost_rare(std::span<const double> logits, const std::vector<bool>& unseen, double b) {
  if (!(b >= 0.0) || !std::isfinite(b)) throw std::invalid_argument("boost must be finite and >= 0");
  if (!unseen.empty() && unseen.size() != logits.size()) throw std::invalid_argument("unseen mask size mismatch");
  std::vector<double> p(logits.begin(), logits.end());
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!std::isfinite(p[i])) throw std::invalid_argument("non-finite logit at index " + std::to_string(i));
    if (!unseen.empty() && unseen[i]) p[i] += b;
  }
  if (p.empty()) return p;
  const double mx = *std::max_element(p.begin(), p.end());
  double sum = 0.0;
  for (double& v : p) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : p) v /= sum;
  return p;
}

// ---------------------------------------------------------------------------
// Scorers

std::vector<double> TokenScorer::scores(std::span<const std::size_t> prefix) const {
  if (concurrent_safe()) return score(prefix);
  std::lock_guard<std::mutex> lock(serial_);
  return score(prefix);
}

std::vector<double> UniformScorer::score(std::span<const std::size_t>) const {
  return std::vector<double>(vocab_, 0.0);
}

UnigramScorer::UnigramScorer(const std::vector<double>& counts) {
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0) + static_cast<double>(counts.size());
  for (double c : counts) logits_.push_back(std::log((c + 1.0) / total));
}

StubScorer::StubScorer(std::size_t vocab, std::vector<std::size_t> target, std::size_t eos, double off)
    : vocab_(vocab), target_(std::move(target)), eos_(eos), off_(off) {}

std::vector<double> StubScorer::score(std::span<const std::size_t> prefix) const {
  std::vector<double> out(vocab_, off_);
  const std::size_t next = prefix.size() < target_.size() ? target_[prefix.size()] : eos_;
  out[next] = 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Beam search

double length_normalized(double log_prob, std::size_t pieces_with_eos) {
  return log_prob / static_cast<double>(pieces_with_eos);
}

namespace {

struct Beam {
  std::vector<std::size_t> pieces;
  ConstraintState state;
  double log_prob = 0.0;
};

bool better_live(const Beam& a, const Beam& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  return a.pieces < b.pieces;
}

bool better_final(const Hypothesis& a, const Hypothesis& b) {
  const double sa = a.normalized_score(), sb = b.normalized_score();
  if (sa != sb) return sa > sb;
  return a.pieces < b.pieces;
}

}  // namespace

SearchResult constrained_beam_search(const TokenScorer& lm, const GuessConstraints& constraints,
                                     const TokenizerView& tok, const SearchOptions& options) {
  if (options.beams == 0) throw std::invalid_argument("beam size must be positive");
  const CompiledConstraints compiled(constraints, tok);
  SearchResult result;
  std::vector<Hypothesis> finished;
  std::vector<Beam> live{Beam{}};

  for (std::size_t step = 0; step <= options.max_pieces && !live.empty(); ++step) {
    std::vector<Beam> candidates;
    for (const Beam& beam : live) {
      std::vector<bool> mask = allowed_mask(beam.state, compiled, tok);
      if (step == options.max_pieces) {
        for (std::size_t id = 0; id < mask.size(); ++id) mask[id] = mask[id] && id == tok.eos();
      }
      if (std::none_of(mask.begin(), mask.end(), [](bool m) { return m; })) {
        ++result.dead_beams;
        continue;
      }
      const std::vector<double> logits = lm.scores(beam.pieces);
      if (logits.size() != tok.size()) throw std::invalid_argument("scorer returned wrong vocabulary size");
      const std::vector<double> logp = log_boost_rare(logits, options.unseen, options.boost);
      for (std::size_t id = 0; id < mask.size(); ++id) {
        if (!mask[id]) continue;
        if (id == tok.eos()) {
          Hypothesis h{beam.pieces, tok.words_of(beam.pieces), beam.log_prob + logp[id]};
          if (!constraints.is_prior(h.words)) finished.push_back(std::move(h));
          continue;
        }
        Beam next{beam.pieces, beam.state.advance(id, tok), beam.log_prob + logp[id]};
        next.pieces.push_back(id);
        candidates.push_back(std::move(next));
      }
    }
    std::sort(candidates.begin(), candidates.end(), better_live);
    if (candidates.size() > options.beams) candidates.resize(options.beams);
    live = std::move(candidates);
  }

  std::sort(finished.begin(), finished.end(), better_final);
  std::set<std::vector<std::string>> seen;
  for (auto& h : finished) {
    if (result.ranked.size() >= options.max_results) break;
    if (!constraints.satisfied_by(h.words)) continue;
    std::vector<std::string> key;
    for (const auto& w : h.words) key.push_back(normalize_word(w));
    if (!seen.insert(key).second) continue;
    result.ranked.push_back(std::move(h));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Agents

LmGuesser::LmGuesser(TokenizerView tok, ScorerFactory factory, SearchOptions options)
    : tok_(std::move(tok)), factory_(std::move(factory)), options_(std::move(options)) {}

std::vector<std::vector<std::string>> LmGuesser::propose(const GuesserView& view, const GuessConstraints& constraints,
                                                         std::size_t max_candidates) const {
  auto scorer = factory_(view);
  SearchOptions opts = options_;
  opts.max_results = max_candidates;
  SearchResult r = constrained_beam_search(*scorer, constraints, tok_, opts);
  std::vector<std::vector<std::string>> out;
  for (auto& h : r.ranked) out.push_back(std::move(h.words));
  return out;
}

RoundResult guess_round(const GuesserAgent& agent, const GameState& state, std::size_t k) {
  if (state.rounds.empty()) throw std::invalid_argument("no drawing to guess from");
  GameState s = state;
  s.turn = Role::guesser;
  RoundResult out{{}, s.phrase, false};
  GuessConstraints constraints = GuessConstraints::from_view(mask_phrase(s.phrase), s.rounds);
  for (std::size_t i = 0; i < k; ++i) {
    auto candidates = agent.propose(guesser_view(s), constraints, 1);
    if (candidates.empty()) break;
    GuessEvaluation ev = evaluate_guess(s.phrase, Guess{candidates.front(), {}});
    s.phrase = ev.phrase;
    s.rounds.back().guesses.push_back(ev.guess);
    constraints.record(ev.guess);
    out.guesses.push_back(ev.guess);
    if (ev.won) {
      out.won = true;
      break;
    }
  }
  out.phrase = s.phrase;
  return out;
}

}  // namespace iconary::constraints
