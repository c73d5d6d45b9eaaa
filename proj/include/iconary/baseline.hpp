#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "iconary/agent.hpp"
#include "iconary/alignment.hpp"
#include "iconary/constraints.hpp"
#include "iconary/core.hpp"

// Reference agents built on an AlignmentModel. They exist so that live games
// and replay evaluation run end to end without a neural model.
namespace iconary::agents {

struct BaselineDrawerOptions {
  std::size_t icons_per_word = 1;
  double similarity_floor = 0.0;
  bool emphasis_arrow = true;
  double temperature = 1.0;  // sample() only
  // Receives one line per content word that could not be drawn.
  std::function<void(const std::string&)> log;
};

struct DrawPlan {
  Drawing drawing;
  std::vector<std::string> skipped_words;
};

class BaselineDrawer final : public DrawerAgent {
 public:
  BaselineDrawer(std::shared_ptr<const AlignmentModel> model, IconLibrary library, BaselineDrawerOptions options = {});

  // Top aligned icons of every unguessed content word, left to right in word
  // order at y = 0.5. After the first round a down arrow is added above the
  // leftmost group.
  DrawPlan plan(const DrawerView& view) const;
  Drawing draw(const DrawerView& view) const override;
  Drawing sample(const DrawerView& view, std::mt19937_64& rng) const override;

  const IconLibrary& library() const { return library_; }

 private:
  std::vector<std::pair<std::string, double>> ranked_icons(const std::string& word) const;
  Drawing layout(const std::vector<std::vector<std::string>>& groups, const DrawerView& view) const;

  std::shared_ptr<const AlignmentModel> model_;
  IconLibrary library_;
  BaselineDrawerOptions options_;
};

struct BaselineGuesserOptions {
  std::size_t candidates_per_slot = 30;
  // Weight of icons whose left-to-right rank does not line up with the blank.
  double off_position_weight = 0.25;
  double prior_weight = 1.0;
  double sharpness = 4.0;
  double repeat_penalty = 3.0;
  constraints::SearchOptions search{};
};

// Add-one smoothed log frequency of content words in a corpus.
std::map<std::string, double> word_log_prior(const std::vector<GameRecord>& corpus);

class BaselineGuesser final : public GuesserAgent {
 public:
  BaselineGuesser(std::shared_ptr<const AlignmentModel> model, IconLibrary library,
                  std::map<std::string, double> log_prior, BaselineGuesserOptions options = {});

  // Word scores for one blank: summed icon similarity (icons in the matching
  // left-to-right slot at full weight) plus the log prior.
  std::vector<std::pair<std::string, double>> slot_scores(const Drawing& drawing, std::size_t blank,
                                                          std::size_t blanks) const;

  std::vector<std::vector<std::string>> propose(const GuesserView& view, const GuessConstraints& constraints,
                                                std::size_t max_candidates) const override;

 private:
  std::shared_ptr<const AlignmentModel> model_;
  IconLibrary library_;
  std::map<std::string, double> log_prior_;
  double unknown_log_prior_ = 0.0;
  BaselineGuesserOptions options_;
};

// If the agent's best drawing has the same icon bag as any prior drawing,
// returns one sample instead, even if the sample repeats too.
struct DiversifiedDrawing {
  Drawing drawing;
  bool resampled = false;
};

DiversifiedDrawing diversify_drawing(const DrawerAgent& agent, const DrawerView& view,
                                     const std::vector<Drawing>& prior_drawings, std::mt19937_64& rng);

// Likelihood oracles over the six-token drawing format.

// Each token is uniform over the tokens the grammar admits at its position.
class GrammarUniformLikelihood final : public DrawingLikelihood {
 public:
  explicit GrammarUniformLikelihood(const codec::DrawingVocab& vocab);
  std::vector<double> token_log_likelihoods(const DrawerView& view,
                                            const std::vector<codec::DrawingToken>& tokens) const override;

 private:
  const codec::DrawingVocab* vocab_;
};

// Icon tokens follow a softmax over each icon's best similarity to the
// unguessed words; pose tokens are uniform within their kind; <eod> takes a
// fixed share once an icon has been drawn.
class AlignmentLikelihood final : public DrawingLikelihood {
 public:
  AlignmentLikelihood(std::shared_ptr<const AlignmentModel> model, const codec::DrawingVocab& vocab,
                      double end_probability = 0.25);
  std::vector<double> token_log_likelihoods(const DrawerView& view,
                                            const std::vector<codec::DrawingToken>& tokens) const override;

 private:
  std::shared_ptr<const AlignmentModel> model_;
  const codec::DrawingVocab* vocab_;
  double end_probability_;
};

}  // namespace iconary::agents
