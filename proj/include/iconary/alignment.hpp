#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "iconary/core.hpp"

// Icon/word embeddings learned contrastively from game co-occurrence.
namespace iconary::agents {

class AlignmentModel {
 public:
  AlignmentModel() = default;
  AlignmentModel(std::size_t dim, std::vector<std::string> words, std::vector<std::string> icons,
                 std::vector<double> word_embeddings, std::vector<double> icon_embeddings);

  std::size_t dim() const { return dim_; }
  const std::vector<std::string>& words() const { return words_; }
  const std::vector<std::string>& icons() const { return icons_; }
  std::optional<std::size_t> word_index(std::string_view word) const;
  std::optional<std::size_t> icon_index(std::string_view icon_id) const;
  std::span<const double> word_vector(std::size_t i) const;
  std::span<const double> icon_vector(std::size_t i) const;

  // Dot product of the icon and word embeddings; nullopt if either is unknown.
  std::optional<double> similarity(std::string_view icon_id, std::string_view word) const;
  std::optional<double> word_cosine(std::string_view a, std::string_view b) const;

  std::vector<std::pair<std::string, double>> top_words(std::string_view icon_id, std::size_t k) const;
  std::vector<std::pair<std::string, double>> top_icons(std::string_view word, std::size_t k) const;

  // ".align" file: one JSON header line, then little-endian float64 word
  // embeddings followed by icon embeddings.
  std::string serialize() const;
  static AlignmentModel deserialize(std::string_view bytes);
  void save(const std::string& path) const;
  static AlignmentModel load(const std::string& path);

  bool operator==(const AlignmentModel&) const = default;

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> words_;
  std::vector<std::string> icons_;
  std::vector<double> word_emb_;
  std::vector<double> icon_emb_;
  std::map<std::string, std::size_t, std::less<>> word_index_;
  std::map<std::string, std::size_t, std::less<>> icon_index_;
};

inline constexpr int kAlignFormatVersion = 1;

struct AlignmentOptions {
  std::size_t dim = 64;
  std::size_t epochs = 30;
  std::size_t negatives_per_positive = 5;
  double learning_rate = 0.05;
  double margin = 1.0;
  double init_scale = 0.1;
  std::uint64_t seed = 17;
};

struct TrainingLog {
  std::vector<double> epoch_loss;  // mean hinge loss per (positive, negative) pair
};

// Margin ranking between each (drawing, phrase) pair and phrases sampled from
// other games; a pair's score is the mean icon-word dot product. Throws
// std::invalid_argument on an empty corpus.
AlignmentModel train_alignment(const std::vector<GameRecord>& corpus, const AlignmentOptions& options = {},
                               TrainingLog* log = nullptr);

struct GameAlignment {
  // Per round, per placement: aligned phrase position (nullopt when the icon
  // or every content word is unknown to the model).
  std::vector<std::vector<std::optional<std::size_t>>> word_of_placement;
};

GameAlignment align_game(const AlignmentModel& model, const GameRecord& record);

struct AugmentResult {
  GameRecord record;
  bool augmented = false;
  std::vector<std::size_t> removed_positions;
  std::size_t removed_icons = 0;
};

// Removes one content word, or the word with the stopwords directly before
// it, plus every icon aligned to it. Falls back to the unchanged record
// (augmented == false) when no removal keeps a content word and non-empty
// drawings.
AugmentResult augment(const GameRecord& record, const GameAlignment& alignment, std::mt19937_64& rng);

}  // namespace iconary::agents
