#include "iconary/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace iconary::agents {

// ---------------------------------------------------------------------------
// Drawer

BaselineDrawer::BaselineDrawer(std::shared_ptr<const AlignmentModel> model, IconLibrary library,
                               BaselineDrawerOptions options)
    : model_(std::move(model)), library_(std::move(library)), options_(std::move(options)) {
  if (!model_) throw std::invalid_argument("drawer needs an alignment model");
  if (options_.icons_per_word == 0) throw std::invalid_argument("icons_per_word must be positive");
  if (!(options_.temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
}

std::vector<std::pair<std::string, double>> BaselineDrawer::ranked_icons(const std::string& word) const {
  std::vector<std::pair<std::string, double>> out;
  if (!model_->word_index(word)) return out;
  for (const auto& icon : library_.icons()) {
    if (library_.is_arrow(icon.id)) continue;
    if (auto s = model_->similarity(icon.id, word)) out.emplace_back(icon.id, *s);
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

Drawing BaselineDrawer::layout(const std::vector<std::vector<std::string>>& groups, const DrawerView& view) const {
  Drawing d;
  d.round_index = static_cast<int>(view.rounds.size());
  std::size_t total = 0;
  for (const auto& g : groups) total += g.size();
  std::size_t j = 0;
  for (const auto& g : groups) {
    for (const auto& id : g) {
      IconPlacement p;
      p.icon_id = id;
      p.x = (static_cast<double>(j) + 0.5) / static_cast<double>(total);
      p.y = 0.5;
      d.placements.push_back(std::move(p));
      ++j;
    }
  }
  const bool unguessed = !view.phrase.all_revealed();
  if (options_.emphasis_arrow && !view.rounds.empty() && unguessed && !d.placements.empty() &&
      !library_.arrow_icon_ids().empty()) {
    IconPlacement arrow;
    arrow.icon_id = library_.arrow_icon_ids().front();
    arrow.x = d.placements.front().x;
    arrow.y = 0.2;
    arrow.rotation = 90.0;  // points down at the group below
    d.placements.push_back(std::move(arrow));
  }
  return d;
}

DrawPlan BaselineDrawer::plan(const DrawerView& view) const {
  DrawPlan out;
  const Phrase& phrase = view.phrase;
  std::vector<std::vector<std::string>> groups;

  if (phrase.all_revealed()) {
    for (std::size_t w = 0; w < phrase.size() && groups.empty(); ++w) {
      if (phrase[w].is_stopword) continue;
      auto ranked = ranked_icons(phrase[w].text);
      if (!ranked.empty()) groups.push_back({ranked.front().first});
    }
  } else {
    for (std::size_t w = 0; w < phrase.size(); ++w) {
      if (phrase.revealed(w)) continue;
      std::vector<std::string> group;
      for (const auto& [id, sim] : ranked_icons(phrase[w].text)) {
        if (group.size() >= options_.icons_per_word || sim <= options_.similarity_floor) break;
        group.push_back(id);
      }
      if (group.empty()) {
        out.skipped_words.push_back(phrase[w].text);
        if (options_.log) options_.log("no icon above the similarity floor for \"" + phrase[w].text + "\"");
        continue;
      }
      groups.push_back(std::move(group));
    }
    if (groups.empty()) {
      for (std::size_t w = 0; w < phrase.size() && groups.empty(); ++w) {
        if (phrase.revealed(w)) continue;
        auto ranked = ranked_icons(phrase[w].text);
        if (!ranked.empty()) groups.push_back({ranked.front().first});
      }
    }
  }
  if (groups.empty()) {
    for (const auto& icon : library_.icons()) {
      if (!library_.is_arrow(icon.id)) {
        groups.push_back({icon.id});
        break;
      }
    }
  }
  if (groups.empty()) throw std::runtime_error("icon library has no drawable icons");
  out.drawing = layout(groups, view);
  return out;
}

Drawing BaselineDrawer::draw(const DrawerView& view) const { return plan(view).drawing; }

Drawing BaselineDrawer::sample(const DrawerView& view, std::mt19937_64& rng) const {
  const Phrase& phrase = view.phrase;
  std::vector<std::vector<std::string>> groups;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t w = 0; w < phrase.size(); ++w) {
    if (phrase[w].is_stopword) continue;
    if (phrase.revealed(w) && !phrase.all_revealed()) continue;
    auto ranked = ranked_icons(phrase[w].text);
    if (ranked.empty()) continue;
    std::vector<std::string> group;
    for (std::size_t k = 0; k < options_.icons_per_word && !ranked.empty(); ++k) {
      const double mx = ranked.front().second;
      std::vector<double> weights;
      for (const auto& r : ranked) weights.push_back(std::exp((r.second - mx) / options_.temperature));
      const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
      double u = unit(rng) * total;
      std::size_t pick = 0;
      while (pick + 1 < weights.size() && u >= weights[pick]) u -= weights[pick++];
      group.push_back(ranked[pick].first);
      ranked.erase(ranked.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    groups.push_back(std::move(group));
    if (phrase.all_revealed()) break;
  }
  if (groups.empty()) return draw(view);
  return layout(groups, view);
}

// ---------------------------------------------------------------------------
// Guesser

std::map<std::string, double> word_log_prior(const std::vector<GameRecord>& corpus) {
  std::map<std::string, double> counts;
  double total = 0.0;
  for (const auto& g : corpus) {
    for (const auto& w : g.phrase.words()) {
      if (w.is_stopword) continue;
      counts[normalize_word(w.text)] += 1.0;
      total += 1.0;
    }
  }
  const double denom = total + static_cast<double>(counts.size()) + 1.0;
  for (auto& [w, c] : counts) c = std::log((c + 1.0) / denom);
  return counts;
}

BaselineGuesser::BaselineGuesser(std::shared_ptr<const AlignmentModel> model, IconLibrary library,
                                 std::map<std::string, double> log_prior, BaselineGuesserOptions options)
    : model_(std::move(model)), library_(std::move(library)), log_prior_(std::move(log_prior)),
      options_(std::move(options)) {
  if (!model_) throw std::invalid_argument("guesser needs an alignment model");
  for (const auto& [word, lp] : log_prior_) {
    unknown_log_prior_ = std::min(unknown_log_prior_, lp);
  }
}

std::vector<std::pair<std::string, double>> BaselineGuesser::slot_scores(const Drawing& drawing, std::size_t blank,
                                                                         std::size_t blanks) const {
  // Icons the model knows, ordered left to right.
  std::vector<std::pair<double, std::size_t>> order;
  for (std::size_t i = 0; i < drawing.placements.size(); ++i) {
    const auto& p = drawing.placements[i];
    if (library_.is_arrow(p.icon_id) || !model_->icon_index(p.icon_id)) continue;
    order.emplace_back(p.x, i);
  }
  std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  std::vector<std::pair<std::string, double>> out;
  for (const auto& word : model_->words()) {
    double s = 0.0;
    for (std::size_t r = 0; r < order.size(); ++r) {
      const std::size_t slot = blanks == 0 ? 0 : r * blanks / order.size();
      const double weight = slot == blank ? 1.0 : options_.off_position_weight;
      s += weight * *model_->similarity(drawing.placements[order[r].second].icon_id, word);
    }
    auto it = log_prior_.find(word);
    const double prior = it == log_prior_.end() ? unknown_log_prior_ : it->second;
    out.emplace_back(word, options_.sharpness * s + options_.prior_weight * prior);
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

std::vector<std::vector<std::string>> BaselineGuesser::propose(const GuesserView& view,
                                                               const GuessConstraints& constraints,
                                                               std::size_t max_candidates) const {
  const Drawing* drawing = view.latest_drawing();
  const std::size_t n = constraints.n_words;
  if (!drawing || n == 0) return {};

  std::vector<std::size_t> blank_of(n, 0);
  std::size_t blanks = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!constraints.known[i]) blank_of[i] = blanks++;
  }

  std::vector<std::vector<std::pair<std::string, double>>> per_slot(blanks);
  std::set<std::string> vocab_set;
  for (std::size_t b = 0; b < blanks; ++b) {
    per_slot[b] = slot_scores(*drawing, b, blanks);
    for (std::size_t k = 0; k < per_slot[b].size() && k < options_.candidates_per_slot; ++k) {
      vocab_set.insert(per_slot[b][k].first);
    }
  }
  for (const auto& k : constraints.known) {
    if (k) vocab_set.insert(*k);
  }
  if (vocab_set.empty()) return {};
  const std::vector<std::string> vocab(vocab_set.begin(), vocab_set.end());
  const auto tok = constraints::TokenizerView::whole_words(vocab);

  // Dense score table: position -> piece -> logit.
  constexpr double kOff = -50.0;
  std::vector<std::vector<double>> table(n + 1, std::vector<double>(tok.size(), kOff));
  for (std::size_t i = 0; i < n; ++i) {
    if (constraints.known[i]) {
      if (auto id = tok.find(*constraints.known[i], true)) table[i][*id] = 0.0;
      continue;
    }
    for (const auto& [word, s] : per_slot[blank_of[i]]) {
      if (auto id = tok.find(word, true)) table[i][*id] = s;
    }
  }
  table[n][tok.eos()] = 0.0;

  const double penalty = options_.repeat_penalty;
  constraints::FunctionScorer scorer([&table, &tok, n, penalty](std::span<const std::size_t> prefix) {
    std::vector<double> row = table[std::min(prefix.size(), n)];
    for (std::size_t id : prefix) {
      if (id != tok.eos()) row[id] -= penalty;
    }
    return row;
  });
  constraints::SearchOptions opts = options_.search;
  opts.max_pieces = n;
  opts.max_results = max_candidates;
  opts.unseen.clear();
  auto result = constraints::constrained_beam_search(scorer, constraints, tok, opts);
  std::vector<std::vector<std::string>> out;
  for (auto& h : result.ranked) out.push_back(std::move(h.words));
  return out;
}

// ---------------------------------------------------------------------------
// Diversity

DiversifiedDrawing diversify_drawing(const DrawerAgent& agent, const DrawerView& view,
                                     const std::vector<Drawing>& prior_drawings, std::mt19937_64& rng) {
  DiversifiedDrawing out{agent.draw(view), false};
  const auto bag = icon_multiset(out.drawing);
  const bool repeats = std::any_of(prior_drawings.begin(), prior_drawings.end(),
                                   [&](const Drawing& d) { return icon_multiset(d) == bag; });
  if (repeats) {
    out.drawing = agent.sample(view, rng);
    out.resampled = true;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Likelihood oracles

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

GrammarUniformLikelihood::GrammarUniformLikelihood(const codec::DrawingVocab& vocab) : vocab_(&vocab) {}

std::vector<double> GrammarUniformLikelihood::token_log_likelihoods(
    const DrawerView&, const std::vector<codec::DrawingToken>& tokens) const {
  std::vector<double> out;
  codec::DrawingGrammarState state;
  for (const auto& t : tokens) {
    const auto mask = codec::grammar_mask(state, *vocab_);
    const auto id = vocab_->id_of(t);
    if (!id || !mask[*id]) {
      out.push_back(kNegInf);
      break;
    }
    const auto allowed = static_cast<double>(std::count(mask.begin(), mask.end(), true));
    out.push_back(-std::log(allowed));
    state = codec::advance(state, t);
  }
  return out;
}

AlignmentLikelihood::AlignmentLikelihood(std::shared_ptr<const AlignmentModel> model,
                                         const codec::DrawingVocab& vocab, double end_probability)
    : model_(std::move(model)), vocab_(&vocab), end_probability_(end_probability) {
  if (!model_) throw std::invalid_argument("likelihood needs an alignment model");
  if (!(end_probability > 0.0 && end_probability < 1.0)) throw std::invalid_argument("end probability must be in (0,1)");
}

std::vector<double> AlignmentLikelihood::token_log_likelihoods(
    const DrawerView& view, const std::vector<codec::DrawingToken>& tokens) const {
  // Icon distribution: softmax over the best similarity to any unguessed word.
  std::vector<std::string> targets;
  for (std::size_t w = 0; w < view.phrase.size(); ++w) {
    if (!view.phrase.revealed(w)) targets.push_back(view.phrase[w].text);
  }
  if (targets.empty()) {
    for (const auto& w : view.phrase.words()) {
      if (!w.is_stopword) targets.push_back(w.text);
    }
  }
  std::map<std::string, double> icon_score;
  double known_min = 0.0;
  bool any = false;
  for (const auto& t : vocab_->tokens()) {
    if (t.kind != codec::TokenKind::icon) continue;
    std::optional<double> best;
    for (const auto& w : targets) {
      if (auto s = model_->similarity(t.icon_id, w); s && (!best || *s > *best)) best = s;
    }
    if (best) {
      icon_score[t.icon_id] = *best;
      known_min = any ? std::min(known_min, *best) : *best;
      any = true;
    }
  }
  double mx = kNegInf;
  std::vector<double> logits;
  for (const auto& t : vocab_->tokens()) {
    if (t.kind != codec::TokenKind::icon) continue;
    auto it = icon_score.find(t.icon_id);
    logits.push_back(it != icon_score.end() ? it->second : known_min - 1.0);
    mx = std::max(mx, logits.back());
  }
  double z = 0.0;
  for (double l : logits) z += std::exp(l - mx);
  const double log_z = mx + std::log(z);

  std::vector<double> out;
  codec::DrawingGrammarState state;
  for (const auto& t : tokens) {
    const auto mask = codec::grammar_mask(state, *vocab_);
    const auto id = vocab_->id_of(t);
    if (!id || !mask[*id]) {
      out.push_back(kNegInf);
      break;
    }
    double lp = 0.0;
    if (t.kind == codec::TokenKind::end_of_drawing) {
      lp = std::log(end_probability_);
    } else if (t.kind == codec::TokenKind::icon) {
      auto it = icon_score.find(t.icon_id);
      lp = (it != icon_score.end() ? it->second : known_min - 1.0) - log_z;
      if (state.icons_emitted > 0) lp += std::log1p(-end_probability_);
    } else {
      lp = -std::log(static_cast<double>(codec::bucket_count(t.kind, vocab_->spec())));
    }
    out.push_back(lp);
    state = codec::advance(state, t);
  }
  return out;
}

}  // namespace iconary::agents
