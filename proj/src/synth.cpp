#include "iconary/synth.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

namespace iconary::synth {

namespace {

// Portable draws: the bundled corpus must regenerate identically everywhere.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
std::size_t pick(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }
bool chance(std::mt19937_64& rng, double p) { return unit(rng) < p; }
double normal(std::mt19937_64& rng) {
  const double u1 = 1.0 - unit(rng), u2 = unit(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}
template <class T>
const T& choose(std::mt19937_64& rng, const std::vector<T>& v) {
  return v[pick(rng, v.size())];
}

const std::map<std::string, std::vector<std::string>> kCategories{
    {"animal", {"dog", "cat", "horse", "bird", "fish", "cow", "bear", "rabbit"}},
    {"person", {"man", "woman", "child", "chef", "doctor", "farmer"}},
    {"verb", {"running", "eating", "sleeping", "swimming", "flying", "reading", "cooking", "jumping", "singing",
              "driving"}},
    {"place", {"beach", "forest", "city", "kitchen", "park", "mountain", "river", "school"}},
    {"object", {"car", "boat", "tree", "house", "book", "ball", "guitar", "pizza"}},
    {"adj", {"red", "big", "happy", "old", "wet", "angry"}},
};

const std::map<std::string, std::vector<std::string>> kOodWords{
    {"animal", {"dragon"}}, {"verb", {"surfing"}}, {"place", {"castle", "volcano"}}, {"object", {"robot", "violin"}}};

const std::vector<std::string> kTemplates{
    "a {animal} {verb}",
    "{person} {verb} in the {place}",
    "a {adj} {object}",
    "{animal} and {animal}",
    "a {person} with a {object}",
    "{object} in the {place}",
    "the {adj} {animal} {verb} at the {place}",
    "{person} {verb}",
};

const std::vector<std::pair<std::string, std::string>> kNoise{
    {"i-star", "star"}, {"i-circle", "circle"}, {"i-square", "square"}, {"i-heart", "heart"},
    {"i-cloud", "cloud"}, {"i-sun", "sun"},      {"i-line", "line"},     {"i-dot", "dot"}};

}  // namespace

World make_world(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  World w;
  w.templates = kTemplates;
  w.categories = kCategories;
  std::vector<Icon> icons;
  auto add_word = [&](const std::string& word) {
    std::vector<std::string> ids{"i-" + word};
    icons.push_back({"i-" + word, word, {word}});
    if (chance(rng, 0.5)) {
      ids.push_back("i-" + word + "-2");
      icons.push_back({"i-" + word + "-2", word + " symbol", {word}});
    }
    w.planted[word] = ids;
  };
  for (const auto& [cat, words] : kCategories) {
    for (const auto& word : words) add_word(word);
  }
  for (const auto& [cat, words] : kOodWords) {
    for (const auto& word : words) {
      add_word(word);
      w.ood_words.push_back(word);
    }
  }
  for (const auto& [id, name] : kNoise) {
    icons.push_back({id, name, {name}});
    w.noise_icons.push_back(id);
  }
  icons.push_back({"i-arrow", "arrow", {"arrow", "direction"}});
  icons.push_back({"i-arrow-thick", "thick arrow", {"arrow"}});
  w.library = IconLibrary(std::move(icons), {"i-arrow", "i-arrow-thick"});
  return w;
}

std::string make_phrase_text(const World& world, std::mt19937_64& rng, bool ood) {
  while (true) {
    const std::string& tmpl = choose(rng, world.templates);
    std::vector<std::string> slots;
    for (std::size_t pos = tmpl.find('{'); pos != std::string::npos; pos = tmpl.find('{', pos + 1)) {
      slots.push_back(tmpl.substr(pos + 1, tmpl.find('}', pos) - pos - 1));
    }
    std::vector<std::size_t> ood_slots;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      if (kOodWords.count(slots[i])) ood_slots.push_back(i);
    }
    if (ood && ood_slots.empty()) continue;
    const std::size_t forced = ood ? choose(rng, ood_slots) : slots.size();
    std::vector<std::string> fill;
    std::set<std::string> used;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      const auto& pool = i == forced ? kOodWords.at(slots[i]) : world.categories.at(slots[i]);
      std::string word;
      do {
        word = choose(rng, pool);
      } while (used.count(word) && pool.size() > 1);
      used.insert(word);
      fill.push_back(word);
    }
    std::string out;
    std::size_t k = 0;
    for (std::size_t i = 0; i < tmpl.size(); ++i) {
      if (tmpl[i] == '{') {
        out += fill[k++];
        i = tmpl.find('}', i);
      } else {
        out += tmpl[i];
      }
    }
    return out;
  }
}

namespace {

IconPlacement place(std::mt19937_64& rng, const std::string& id, double x) {
  IconPlacement p;
  p.icon_id = id;
  p.x = std::clamp(x + (unit(rng) - 0.5) * 0.06, 0.0, 1.0);
  p.y = 0.35 + 0.3 * unit(rng);
  p.scale = std::clamp(std::exp(0.35 * normal(rng)), 0.2, 5.0);
  if (chance(rng, 0.15)) {
    p.rotation = std::fmod(90.0 * static_cast<double>(1 + pick(rng, 3)) + (unit(rng) - 0.5) * 10.0 + 360.0, 360.0);
  }
  p.flipped = chance(rng, 0.1);
  return p;
}

// Icons for the given phrase positions, laid out left to right in word order.
Drawing compose(const World& world, std::mt19937_64& rng, const Phrase& phrase, const std::vector<std::size_t>& positions,
                double noise_rate, int round_index) {
  std::vector<std::string> ids;
  for (std::size_t w : positions) {
    const auto& planted = world.planted.at(normalize_word(phrase[w].text));
    ids.push_back(choose(rng, planted));
    if (planted.size() > 1 && chance(rng, 0.2)) ids.push_back(planted[1 - (ids.back() == planted[1] ? 1 : 0)]);
    if (chance(rng, noise_rate)) ids.push_back(choose(rng, world.noise_icons));
  }
  Drawing d;
  d.round_index = round_index;
  for (std::size_t j = 0; j < ids.size(); ++j) {
    d.placements.push_back(place(rng, ids[j], (static_cast<double>(j) + 0.5) / static_cast<double>(ids.size())));
  }
  if (chance(rng, 0.2)) {
    for (std::size_t i = d.placements.size(); i > 1; --i) std::swap(d.placements[i - 1], d.placements[pick(rng, i)]);
  }
  return d;
}

std::vector<std::size_t> content_positions(const Phrase& p, bool unguessed_only) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!p[i].is_stopword && (!unguessed_only || !p[i].guessed)) out.push_back(i);
  }
  return out;
}

Drawing revise(const World& world, std::mt19937_64& rng, const Phrase& phrase, const Drawing& prev,
               double noise_rate, int round_index) {
  Drawing next = prev;
  next.round_index = round_index;
  const double r = unit(rng);
  if (r < 0.35) {
    // edit: move things around, maybe drop one icon
    for (auto& p : next.placements) {
      p.x = std::clamp(p.x + (unit(rng) - 0.5) * 0.2, 0.0, 1.0);
      p.y = std::clamp(p.y + (unit(rng) - 0.5) * 0.2, 0.0, 1.0);
      p.scale = std::clamp(p.scale * std::exp(0.3 * normal(rng)), 0.2, 5.0);
    }
    if (next.placements.size() > 1 && chance(rng, 0.3)) {
      next.placements.erase(next.placements.begin() + static_cast<std::ptrdiff_t>(pick(rng, next.placements.size())));
    }
  } else if (r < 0.7) {
    // add: an arrow or another icon for a missing word
    const auto missing = content_positions(phrase, true);
    if (chance(rng, 0.5) || missing.empty()) {
      IconPlacement a = place(rng, choose(rng, world.library.arrow_icon_ids()), unit(rng));
      a.rotation = 90.0 * static_cast<double>(pick(rng, 4));
      next.placements.push_back(a);
    } else {
      const auto& planted = world.planted.at(normalize_word(phrase[choose(rng, missing)].text));
      next.placements.push_back(place(rng, choose(rng, planted), unit(rng)));
    }
  } else {
    auto missing = content_positions(phrase, true);
    if (missing.empty()) missing = content_positions(phrase, false);
    next = compose(world, rng, phrase, missing, noise_rate, round_index);
  }
  return next;
}

bool is_ood_word(const World& world, const std::string& w) {
  return std::find(world.ood_words.begin(), world.ood_words.end(), w) != world.ood_words.end();
}

std::vector<std::string> human_guess(const World& world, std::mt19937_64& rng, const Phrase& phrase,
                                     double p_correct) {
  std::vector<std::string> words;
  for (std::size_t i = 0; i < phrase.size(); ++i) {
    const auto& w = phrase[i];
    if (w.is_stopword || w.guessed || chance(rng, is_ood_word(world, w.text) ? p_correct / 2 : p_correct)) {
      words.push_back(w.text);
      continue;
    }
    // A plausible wrong word from the same category.
    std::vector<std::string> pool;
    for (const auto& [cat, list] : world.categories) {
      if (std::find(list.begin(), list.end(), w.text) != list.end()) pool = list;
    }
    if (pool.empty()) {
      for (const auto& [cat, list] : kOodWords) {
        if (std::find(list.begin(), list.end(), w.text) != list.end()) pool = world.categories.at(cat);
      }
    }
    std::string g;
    do {
      g = choose(rng, pool);
    } while (g == w.text);
    words.push_back(g);
  }
  return words;
}

Split draw_split(std::mt19937_64& rng, double share) {
  const double u = unit(rng);
  if (u < share) return Split::ind_valid;
  if (u < 2 * share) return Split::ind_test;
  if (u < 3 * share) return Split::ood_valid;
  if (u < 4 * share) return Split::ood_test;
  return Split::train;
}

}  // namespace

std::vector<GameRecord> make_corpus(const World& world, const CorpusOptions& options) {
  if (options.max_rounds == 0) throw std::invalid_argument("max_rounds must be positive");
  std::mt19937_64 rng(options.seed);
  std::vector<GameRecord> games;
  for (std::size_t g = 0; g < options.games; ++g) {
    GameRecord rec;
    rec.game_id = fmt::format("syn-{}-{:04d}", options.seed, g);
    rec.split = draw_split(rng, options.valid_test_share);
    rec.drawer = {fmt::format("h{:03d}", pick(rng, 40)), false};
    rec.guesser = {fmt::format("h{:03d}", 40 + pick(rng, 40)), false};
    Phrase truth = Phrase::from_text(make_phrase_text(world, rng, is_ood(rec.split)));
    Phrase state = truth;
    double elapsed = 20.0 + 20.0 * unit(rng);
    bool won = false;
    bool timed_out = false;
    for (std::size_t r = 0; r < options.max_rounds && !won && !timed_out; ++r) {
      Round round;
      round.drawing = r == 0 ? compose(world, rng, state, content_positions(state, false), options.noise_icon_rate, 0)
                             : revise(world, rng, state, rec.rounds.back().drawing, options.noise_icon_rate,
                                      static_cast<int>(r));
      if (r > 0) elapsed += 10.0 + 15.0 * unit(rng);
      const std::size_t n_guesses = 1 + pick(rng, 4);
      const double p_correct = 0.15 + 0.1 * static_cast<double>(r);
      for (std::size_t k = 0; k < n_guesses; ++k) {
        elapsed += 6.0 + 9.0 * unit(rng);
        if (elapsed >= 240.0) {
          timed_out = true;
          break;
        }
        GuessEvaluation ev = evaluate_guess(state, Guess{human_guess(world, rng, state, p_correct), {}});
        state = ev.phrase;
        round.guesses.push_back(ev.guess);
        if (ev.won) {
          won = true;
          break;
        }
      }
      rec.rounds.push_back(std::move(round));
    }
    rec.phrase = state;
    rec.outcome = won ? Outcome::won : Outcome::lost_timeout;
    rec.elapsed_seconds = won ? std::round(elapsed * 10.0) / 10.0 : 240.0;
    games.push_back(std::move(rec));
  }

  std::set<std::string> train_vocab;
  for (const auto& g : games) {
    if (g.split != Split::train) continue;
    for (const auto& w : g.phrase.words()) train_vocab.insert(normalize_word(w.text));
  }
  for (auto& g : games) {
    std::vector<PhraseWord> words = g.phrase.words();
    for (auto& w : words) w.is_oov = !w.is_stopword && !train_vocab.count(normalize_word(w.text));
    g.phrase = Phrase(std::move(words));
  }
  return games;
}

}  // namespace iconary::synth
