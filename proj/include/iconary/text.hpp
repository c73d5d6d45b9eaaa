#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace iconary {

// Trim, NFC-normalize and case-fold a single word. Matching of guesses
// against phrase words is defined as equality of this form.
std::string normalize_word(std::string_view word);

bool words_match(std::string_view a, std::string_view b);

// Whitespace tokenization; empty tokens are dropped.
std::vector<std::string> split_words(std::string_view text);

std::string join_words(const std::vector<std::string>& words,
                       std::string_view sep = " ");

class StopwordList {
 public:
  StopwordList() = default;
  explicit StopwordList(std::set<std::string> words);

  // The list shipped in data/stopwords.txt.
  static const StopwordList& builtin();
  static StopwordList parse(std::string_view text);
  static StopwordList load(const std::string& path);

  bool contains(std::string_view word) const;
  std::size_t size() const { return words_.size(); }

 private:
  std::set<std::string, std::less<>> words_;
};

}  // namespace iconary
