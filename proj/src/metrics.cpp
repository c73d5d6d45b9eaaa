#include "iconary/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <span>
#include <thread>

#include "iconary/constraints.hpp"
#include "iconary/schema.hpp"

namespace iconary::metrics {

void EvalConfig::validate() const {
  if (guesses_per_drawing == 0 || guess_cutoff == 0 || drawing_cutoff == 0) {
    throw std::invalid_argument("evaluation cutoffs must be positive");
  }
  for (auto c : guess_cutoffs) {
    if (c == 0) throw std::invalid_argument("guess cutoffs must be positive");
  }
  for (auto c : drawing_cutoffs) {
    if (c == 0) throw std::invalid_argument("drawing cutoffs must be positive");
  }
}

std::size_t allowed_misses(std::size_t length) {
  if (length <= 2) return 0;
  if (length <= 5) return 1;
  return 2;
}

bool soft_win(const Phrase& phrase, const std::vector<bool>& guessed, bool ood_mode) {
  if (guessed.size() != phrase.size()) throw std::invalid_argument("one guessed flag per phrase word");
  std::size_t misses = 0;
  bool has_oov = false, oov_hit = false;
  for (std::size_t i = 0; i < phrase.size(); ++i) {
    const bool hit = guessed[i] || phrase[i].is_stopword;
    if (!hit) ++misses;
    if (phrase[i].is_oov) {
      has_oov = true;
      oov_hit = oov_hit || hit;
    }
  }
  if (misses > allowed_misses(phrase.size())) return false;
  if (ood_mode && has_oov && !oov_hit) return false;
  return true;
}

double multiset_f1(std::vector<std::string> predicted, std::vector<std::string> reference) {
  if (predicted.empty() || reference.empty()) return 0.0;
  std::sort(predicted.begin(), predicted.end());
  std::sort(reference.begin(), reference.end());
  std::vector<std::string> common;
  std::set_intersection(predicted.begin(), predicted.end(), reference.begin(), reference.end(),
                        std::back_inserter(common));
  const double p = static_cast<double>(common.size()) / static_cast<double>(predicted.size());
  const double r = static_cast<double>(common.size()) / static_cast<double>(reference.size());
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

std::optional<double> icon_f1(const Drawing& model, const std::vector<Drawing>& human_drawings) {
  if (model.placements.empty()) throw std::invalid_argument("model drawing is empty");
  if (human_drawings.empty()) return std::nullopt;
  double best = 0.0;
  const auto bag = icon_multiset(model);
  for (const auto& h : human_drawings) best = std::max(best, multiset_f1(bag, icon_multiset(h)));
  return best;
}

// ---------------------------------------------------------------------------
// Perplexity

namespace {

// Drawer-side state at the moment round `r` was drawn.
DrawerView view_before_round(const GameRecord& record, std::size_t r) {
  GameState s;
  s.phrase = record.phrase.reset();
  for (std::size_t i = 0; i < r; ++i) {
    s.rounds.push_back(record.rounds[i]);
    for (const auto& g : record.rounds[i].guesses) {
      if (g.words.size() == s.phrase.size()) s.phrase = evaluate_guess(s.phrase, g).phrase;
    }
  }
  return drawer_view(s);
}

std::optional<double> mean(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Incremental mean; a constant sequence averages to that constant exactly.
std::optional<double> running_mean(std::span<const double> v) {
  if (v.empty()) return std::nullopt;
  double m = 0.0;
  std::size_t k = 0;
  for (double x : v) m += (x - m) / static_cast<double>(++k);
  return m;
}

std::optional<double> rate(std::size_t hits, std::size_t total) {
  if (total == 0) return std::nullopt;
  return static_cast<double>(hits) / static_cast<double>(total);
}

std::optional<double> pct(std::size_t hits, std::size_t total) {
  auto r = rate(hits, total);
  if (!r) return std::nullopt;
  return *r * 100.0;
}

}  // namespace

PerplexityReport drawing_perplexity(const DrawingLikelihood& oracle, const std::vector<GameRecord>& corpus,
                                    const IconLibrary& library, const codec::QuantizationSpec& spec) {
  PerplexityReport report;
  report.token_format = oracle.token_format();
  std::vector<double> per_game;
  for (const auto& record : corpus) {
    std::vector<double> per_drawing;
    bool ok = !record.rounds.empty();
    for (std::size_t r = 0; r < record.rounds.size() && ok; ++r) {
      const auto tokens = codec::encode_drawing(record.rounds[r].drawing, library, spec);
      const auto ll = oracle.token_log_likelihoods(view_before_round(record, r), tokens);
      if (ll.size() != tokens.size()) {
        ok = false;
        break;
      }
      const double ppl = ll.empty() ? 1.0 : std::exp(-*running_mean(ll));
      if (!std::isfinite(ppl) || std::any_of(ll.begin(), ll.end(), [](double v) { return !std::isfinite(v); })) {
        ok = false;
        break;
      }
      per_drawing.push_back(ppl);
    }
    if (!ok) {
      report.excluded_games.push_back(record.game_id);
      continue;
    }
    report.drawings_scored += per_drawing.size();
    per_game.push_back(*running_mean(per_drawing));
  }
  report.games_used = per_game.size();
  report.value = running_mean(per_game);
  return report;
}

double perplexity_difference(const PerplexityReport& a, const PerplexityReport& b) {
  if (a.token_format != b.token_format) {
    throw std::invalid_argument("perplexities use different drawing encodings ('" + a.token_format + "' vs '" +
                                b.token_format + "') and are not comparable");
  }
  if (!a.value || !b.value) throw std::invalid_argument("perplexity undefined");
  return *a.value - *b.value;
}

// ---------------------------------------------------------------------------
// Replay evaluation

ReplayTrace replay_game(const GuesserAgent& agent, const GameRecord& record, const EvalConfig& config) {
  const Phrase truth = record.phrase.reset();
  const std::size_t n = truth.size();
  ReplayTrace trace;
  trace.guessed.assign(n, false);
  for (std::size_t i = 0; i < n; ++i) trace.guessed[i] = truth[i].is_stopword;

  Phrase human_known = truth;  // words revealed by human guesses on earlier drawings
  std::vector<std::vector<Guess>> own(record.rounds.size());

  for (std::size_t d = 0; d < record.rounds.size(); ++d) {
    GameState state;
    state.turn = Role::guesser;
    state.phrase = human_known;
    for (std::size_t i = 0; i < n; ++i) {
      if (trace.guessed[i]) state.phrase.mark_guessed(i);
    }
    for (std::size_t j = 0; j < d; ++j) {
      Round r{record.rounds[j].drawing, {}};
      for (const auto& g : record.rounds[j].guesses) {
        if (g.words.size() == n) r.guesses.push_back(evaluate_guess(truth, g).guess);
      }
      for (const auto& g : own[j]) r.guesses.push_back(g);
      state.rounds.push_back(std::move(r));
    }
    state.rounds.push_back(Round{record.rounds[d].drawing, {}});

    GuessConstraints constraints = GuessConstraints::from_view(mask_phrase(state.phrase), state.rounds);
    for (std::size_t k = 0; k < config.guesses_per_drawing && !state.phrase.all_revealed(); ++k) {
      auto candidates = agent.propose(guesser_view(state), constraints, 1);
      if (candidates.empty()) break;
      GuessEvaluation ev = evaluate_guess(truth, Guess{candidates.front(), {}});
      for (std::size_t i = 0; i < n; ++i) {
        if (!ev.guess.correctness[i]) continue;
        if (!human_known[i].guessed) trace.guessed[i] = true;
        state.phrase.mark_guessed(i);
      }
      state.rounds.back().guesses.push_back(ev.guess);
      own[d].push_back(ev.guess);
      constraints.record(ev.guess);
    }
    trace.agent_guesses.push_back(own[d]);
    trace.after_drawing.push_back(trace.guessed);

    for (const auto& g : record.rounds[d].guesses) {
      if (g.words.size() == n) human_known = evaluate_guess(human_known, g).phrase;
    }
  }
  return trace;
}

MetricsReport replay_eval_guesser(const GuesserAgent& agent, const std::vector<GameRecord>& corpus,
                                  const EvalConfig& config) {
  config.validate();
  MetricsReport report;
  report.name = "guesser-replay";
  report.curve_unit = "drawings";

  std::vector<const GameRecord*> valid;
  for (const auto& r : corpus) {
    auto violations = schema::validate_record(r);
    if (!violations.empty() || r.rounds.empty()) {
      ++report.skipped;
      report.notes.push_back("skipped " + r.game_id + ": " +
                             (violations.empty() ? std::string("no rounds") : violations.front()));
      continue;
    }
    valid.push_back(&r);
  }

  std::vector<ReplayTrace> traces(valid.size());
  const std::size_t threads = agent.concurrent_safe() ? std::max<std::size_t>(1, config.threads) : 1;
  if (threads == 1) {
    for (std::size_t i = 0; i < valid.size(); ++i) traces[i] = replay_game(agent, *valid[i], config);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < valid.size(); i += threads) traces[i] = replay_game(agent, *valid[i], config);
      });
    }
    for (auto& th : pool) th.join();
  }

  std::size_t wins = 0, soft = 0, obo = 0;
  std::vector<std::size_t> cut_wins(config.drawing_cutoffs.size(), 0), cut_soft(config.drawing_cutoffs.size(), 0);
  for (std::size_t i = 0; i < valid.size(); ++i) {
    const Phrase& phrase = valid[i]->phrase;
    const ReplayTrace& t = traces[i];
    std::size_t missed = 0;
    for (std::size_t w = 0; w < phrase.size(); ++w) missed += !t.guessed[w] && !phrase[w].is_stopword;
    wins += missed == 0;
    obo += missed <= 1;
    soft += soft_win(phrase, t.guessed, config.ood_mode);
    for (std::size_t c = 0; c < config.drawing_cutoffs.size(); ++c) {
      const std::size_t upto = std::min(config.drawing_cutoffs[c], t.after_drawing.size());
      const auto& flags = t.after_drawing[upto - 1];
      cut_wins[c] += std::all_of(flags.begin(), flags.end(), [](bool b) { return b; });
      cut_soft[c] += soft_win(phrase, flags, config.ood_mode);
    }
  }
  report.games = valid.size();
  report.win_rate = rate(wins, valid.size());
  report.soft_win_rate = rate(soft, valid.size());
  report.off_by_one_rate = rate(obo, valid.size());
  for (std::size_t c = 0; c < config.drawing_cutoffs.size(); ++c) {
    report.curve.push_back({config.drawing_cutoffs[c], rate(cut_wins[c], valid.size()),
                            rate(cut_soft[c], valid.size()), valid.size()});
  }
  return report;
}

MetricsReport eval_drawer(const DrawerAgent& agent, const DrawingLikelihood* likelihood,
                          const std::vector<GameRecord>& corpus, const IconLibrary& library,
                          const EvalConfig& config, const codec::QuantizationSpec& spec) {
  config.validate();
  MetricsReport report;
  report.name = "drawer-automatic";
  std::map<std::string, std::vector<Drawing>> initial_by_phrase;
  std::map<std::string, const GameRecord*> first_game;
  std::vector<GameRecord> usable;
  for (const auto& r : corpus) {
    if (!schema::validate_record(r).empty() || r.rounds.empty()) {
      ++report.skipped;
      continue;
    }
    const std::string key = r.phrase.text();
    initial_by_phrase[key].push_back(r.rounds.front().drawing);
    first_game.emplace(key, &r);
    usable.push_back(r);
  }
  std::vector<double> f1s;
  for (const auto& [phrase, humans] : initial_by_phrase) {
    GameState s;
    s.phrase = first_game[phrase]->phrase.reset();
    Drawing d = agent.draw(drawer_view(s));
    if (auto f1 = icon_f1(d, humans)) f1s.push_back(*f1);
  }
  report.games = usable.size();
  report.icon_f1 = mean(f1s);
  if (likelihood) {
    auto ppl = drawing_perplexity(*likelihood, usable, library, spec);
    report.perplexity = ppl.value;
    report.notes.push_back("perplexity token format: " + ppl.token_format);
    for (const auto& g : ppl.excluded_games) report.notes.push_back("perplexity excluded " + g);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Human/AI scoring

HumanAiScores human_ai_scoring(const std::vector<GameRecord>& games, const EvalConfig& config) {
  config.validate();
  HumanAiScores out;
  std::vector<const GameRecord*> ai_guesser, ai_drawer;
  for (const auto& g : games) {
    if (g.guesser.is_ai) ai_guesser.push_back(&g);
    if (g.drawer.is_ai) ai_drawer.push_back(&g);
    if (!g.guesser.is_ai && !g.drawer.is_ai) ++out.ignored_games;
  }
  auto curve = [&](const std::vector<const GameRecord*>& set, const std::vector<std::size_t>& cutoffs,
                   bool by_guess) {
    std::vector<CutoffPoint> points;
    std::vector<std::size_t> cuts = cutoffs;
    cuts.push_back(0);  // unlimited
    for (std::size_t c : cuts) {
      std::size_t wins = 0, soft = 0;
      for (const GameRecord* g : set) {
        std::optional<std::size_t> limit;
        if (c != 0) limit = c;
        auto flags = by_guess ? guessed_after(*g, limit, std::nullopt) : guessed_after(*g, std::nullopt, limit);
        wins += std::all_of(flags.begin(), flags.end(), [](bool b) { return b; });
        soft += soft_win(g->phrase, flags, config.ood_mode);
      }
      points.push_back({c, rate(wins, set.size()), rate(soft, set.size()), set.size()});
    }
    return points;
  };
  out.guesser_curve = curve(ai_guesser, config.guess_cutoffs, true);
  out.drawer_curve = curve(ai_drawer, config.drawing_cutoffs, false);
  return out;
}

// ---------------------------------------------------------------------------
// Dataset statistics

const SplitStats* DatasetStats::find(Split s) const {
  for (const auto& st : splits) {
    if (st.split == s) return &st;
  }
  return nullptr;
}

DatasetStats dataset_stats(const std::vector<GameRecord>& corpus) {
  DatasetStats out;
  out.total_games = corpus.size();
  std::map<Split, std::vector<const GameRecord*>> by_split;
  for (const auto& r : corpus) by_split[r.split].push_back(&r);
  for (const auto& [split, games] : by_split) {
    SplitStats st;
    st.split = split;
    st.games = games.size();
    std::set<std::string> phrases;
    std::size_t won = 0, obo = 0, exact = 0, recorded = 0, ge2 = 0, ge3 = 0, ge4 = 0;
    std::size_t edit = 0, add = 0, redraw = 0;
    for (const GameRecord* g : games) {
      std::vector<std::string> words;
      for (const auto& w : g->phrase.words()) words.push_back(normalize_word(w.text));
      phrases.insert(join_words(words));
      GameOutcome o = game_outcome(*g);
      won += o.won;
      obo += o.off_by_one;
      exact += o.exact_phrase_guessed;
      recorded += g->outcome == Outcome::won;
      const std::size_t rounds = g->rounds.size();
      ge2 += rounds >= 2;
      ge3 += rounds >= 3;
      ge4 += rounds >= 4;
      switch (classify_game_revision(*g)) {
        case Revision::edit: ++edit; break;
        case Revision::add: ++add; break;
        case Revision::redraw: ++redraw; break;
        case Revision::single_drawing: break;
      }
    }
    st.unique_phrases = phrases.size();
    st.win_pct = pct(won, st.games);
    st.off_by_one_pct = pct(obo, st.games);
    st.exact_phrase_win_pct = pct(exact, st.games);
    st.recorded_win_pct = pct(recorded, st.games);
    st.rounds_ge2_pct = pct(ge2, st.games);
    st.rounds_ge3_pct = pct(ge3, st.games);
    st.rounds_ge4_pct = pct(ge4, st.games);
    st.multi_drawing_games = ge2;
    st.edit_pct = pct(edit, ge2);
    st.add_pct = pct(add, ge2);
    st.redraw_pct = pct(redraw, ge2);
    out.splits.push_back(st);
  }
  return out;
}

}  // namespace iconary::metrics
