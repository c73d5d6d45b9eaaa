#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "iconary/core.hpp"

// Synthetic worlds with a planted icon-word mapping, and simulated human
// games played in them. Used for self-play, smoke tests and the bundled
// corpus shipped when the released dataset is not available.
namespace iconary::synth {

struct World {
  IconLibrary library;
  std::map<std::string, std::vector<std::string>> planted;  // content word -> icon ids
  std::vector<std::string> noise_icons;
  std::vector<std::string> ood_words;  // only appear in OOD splits
  std::vector<std::string> templates;  // "{noun}" style slots
  std::map<std::string, std::vector<std::string>> categories;
};

// Fixed vocabulary and library; `seed` picks which words receive a second
// icon.
World make_world(std::uint64_t seed = 7);

// Phrase text from a template with its slots filled from the world.
std::string make_phrase_text(const World& world, std::mt19937_64& rng, bool allow_ood);

struct CorpusOptions {
  std::size_t games = 200;
  std::uint64_t seed = 1;
  double noise_icon_rate = 0.15;
  // Share of games in each non-train split.
  double valid_test_share = 0.1;
  std::size_t max_rounds = 4;
};

std::vector<GameRecord> make_corpus(const World& world, const CorpusOptions& options);

}  // namespace iconary::synth
