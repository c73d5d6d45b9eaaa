#include "iconary/text.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include "iconary/stopwords_data.hpp"

namespace iconary {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string normalize_word(std::string_view word) {
  word = trim(word);
  bool ascii = true;
  for (char c : word) {
    if (static_cast<unsigned char>(c) >= 0x80) {
      ascii = false;
      break;
    }
  }
  if (ascii) {
    std::string out(word);
    for (char& c : out) {
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
  }
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw std::runtime_error("ICU NFC normalizer unavailable");
  icu::UnicodeString u = icu::UnicodeString::fromUTF8(
      icu::StringPiece(word.data(), static_cast<int32_t>(word.size())));
  u.foldCase();
  icu::UnicodeString normalized = nfc->normalize(u, status);
  if (U_FAILURE(status)) throw std::invalid_argument("word is not valid UTF-8");
  std::string out;
  normalized.toUTF8String(out);
  return out;
}

bool words_match(std::string_view a, std::string_view b) {
  return normalize_word(a) == normalize_word(b);
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string join_words(const std::vector<std::string>& words, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += sep;
    out += words[i];
  }
  return out;
}

StopwordList::StopwordList(std::set<std::string> words) {
  for (const auto& w : words) words_.insert(normalize_word(w));
}

StopwordList StopwordList::parse(std::string_view text) {
  std::set<std::string> words;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    std::string_view t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    words.emplace(t);
  }
  return StopwordList(std::move(words));
}

StopwordList StopwordList::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open stopword list: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

const StopwordList& StopwordList::builtin() {
  static const StopwordList list = parse(detail::kStopwordsText);
  return list;
}

bool StopwordList::contains(std::string_view word) const {
  return words_.find(normalize_word(word)) != words_.end();
}

}  // namespace iconary
