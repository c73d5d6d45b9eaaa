#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "iconary/agent.hpp"
#include "iconary/codec.hpp"
#include "iconary/core.hpp"

namespace iconary::metrics {

struct EvalConfig {
  std::size_t guesses_per_drawing = 5;
  std::size_t guess_cutoff = 20;
  std::size_t drawing_cutoff = 4;
  std::vector<std::size_t> guess_cutoffs{5, 10, 15, 20};
  std::vector<std::size_t> drawing_cutoffs{1, 2, 3, 4};
  bool ood_mode = false;
  // Worker threads for replay evaluation; agents that are not
  // concurrent_safe() always run on one thread.
  std::size_t threads = 1;

  void validate() const;
};

// Misses tolerated by the soft-win rule for a phrase of `length` words.
std::size_t allowed_misses(std::size_t length);

// Stopwords count as guessed. In ood_mode at least one OOV word must also be
// guessed (not applied to phrases without OOV words).
bool soft_win(const Phrase& phrase, const std::vector<bool>& guessed, bool ood_mode);

double multiset_f1(std::vector<std::string> predicted, std::vector<std::string> reference);
// Max multiset F1 against the human drawings; nullopt when there are none.
std::optional<double> icon_f1(const Drawing& model, const std::vector<Drawing>& human_drawings);

struct PerplexityReport {
  std::optional<double> value;
  std::size_t games_used = 0;
  std::size_t drawings_scored = 0;
  std::vector<std::string> excluded_games;
  std::string token_format;
};

PerplexityReport drawing_perplexity(const DrawingLikelihood& oracle, const std::vector<GameRecord>& corpus,
                                    const IconLibrary& library, const codec::QuantizationSpec& spec = {});

// Throws std::invalid_argument when the two reports use different token
// formats; otherwise returns a.value - b.value.
double perplexity_difference(const PerplexityReport& a, const PerplexityReport& b);

struct CutoffPoint {
  std::size_t cutoff = 0;  // 0 = unlimited
  std::optional<double> win;
  std::optional<double> soft_win;
  std::size_t games = 0;
};

struct MetricsReport {
  std::string name;
  std::size_t games = 0;
  std::size_t skipped = 0;
  std::optional<double> win_rate;
  std::optional<double> soft_win_rate;
  std::optional<double> off_by_one_rate;
  std::optional<double> icon_f1;
  std::optional<double> perplexity;
  std::string curve_unit;  // "drawings" or "guesses"
  std::vector<CutoffPoint> curve;
  std::vector<std::string> notes;
};

// Per-game trace of the replay protocol, exposed for inspection and tests.
struct ReplayTrace {
  std::vector<bool> guessed;                       // final credited words
  std::vector<std::vector<bool>> after_drawing;    // credited words after each drawing
  std::vector<std::vector<Guess>> agent_guesses;   // per drawing
};

ReplayTrace replay_game(const GuesserAgent& agent, const GameRecord& record, const EvalConfig& config);

MetricsReport replay_eval_guesser(const GuesserAgent& agent, const std::vector<GameRecord>& corpus,
                                  const EvalConfig& config);

// Icon F1 of the agent's first drawing against the initial human drawings of
// the same phrase, plus perplexity when a likelihood oracle is supplied.
MetricsReport eval_drawer(const DrawerAgent& agent, const DrawingLikelihood* likelihood,
                          const std::vector<GameRecord>& corpus, const IconLibrary& library,
                          const EvalConfig& config, const codec::QuantizationSpec& spec = {});

struct HumanAiScores {
  std::vector<CutoffPoint> guesser_curve;  // AI as Guesser, by guesses
  std::vector<CutoffPoint> drawer_curve;   // AI as Drawer, by drawings
  std::size_t ignored_games = 0;           // no AI player
};

HumanAiScores human_ai_scoring(const std::vector<GameRecord>& games, const EvalConfig& config);

struct SplitStats {
  Split split = Split::train;
  std::size_t games = 0;
  std::size_t unique_phrases = 0;
  std::optional<double> win_pct;
  std::optional<double> off_by_one_pct;
  std::optional<double> exact_phrase_win_pct;
  std::optional<double> recorded_win_pct;
  std::optional<double> rounds_ge2_pct;
  std::optional<double> rounds_ge3_pct;
  std::optional<double> rounds_ge4_pct;
  std::size_t multi_drawing_games = 0;
  std::optional<double> edit_pct;  // among multi-drawing games
  std::optional<double> add_pct;
  std::optional<double> redraw_pct;
};

struct DatasetStats {
  std::vector<SplitStats> splits;  // only splits present in the corpus
  std::size_t total_games = 0;
  const SplitStats* find(Split s) const;
};

DatasetStats dataset_stats(const std::vector<GameRecord>& corpus);

}  // namespace iconary::metrics
