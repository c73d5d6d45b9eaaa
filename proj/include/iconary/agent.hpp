#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "iconary/codec.hpp"
#include "iconary/core.hpp"

// Contracts third-party agents implement. Outputs must respect the drawing
// grammar (drawers) and the guess constraints they are handed (guessers).
namespace iconary {

struct GuessConstraints;

class GuesserAgent {
 public:
  virtual ~GuesserAgent() = default;
  // Ranked candidate guesses, each with exactly view.phrase.size() words.
  virtual std::vector<std::vector<std::string>> propose(const GuesserView& view,
                                                        const GuessConstraints& constraints,
                                                        std::size_t max_candidates) const = 0;
  // Whether propose() may be called concurrently from several threads.
  virtual bool concurrent_safe() const { return true; }
};

class DrawerAgent {
 public:
  virtual ~DrawerAgent() = default;
  // Highest-scoring drawing.
  virtual Drawing draw(const DrawerView& view) const = 0;
  // One drawing sampled from the agent's conditional distribution.
  virtual Drawing sample(const DrawerView& view, std::mt19937_64& rng) const = 0;
  virtual bool concurrent_safe() const { return true; }
};

// Optional capability: per-token log-likelihoods of a human drawing's token
// sequence given the state it was drawn in.
class DrawingLikelihood {
 public:
  virtual ~DrawingLikelihood() = default;
  virtual std::vector<double> token_log_likelihoods(const DrawerView& view,
                                                    const std::vector<codec::DrawingToken>& tokens) const = 0;
  // Identifies the drawing token format; perplexities are only comparable
  // between oracles reporting the same format.
  virtual std::string token_format() const { return "iconary-6tok-v1"; }
};

}  // namespace iconary
