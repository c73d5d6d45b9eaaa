#include <doctest.h>

#include <algorithm>
#include <random>

#include "iconary/core.hpp"
#include "iconary/schema.hpp"
#include "iconary/text.hpp"

using namespace iconary;

namespace {

IconPlacement at(std::string id, double x = 0.5) {
  IconPlacement p;
  p.icon_id = std::move(id);
  p.x = x;
  return p;
}

Drawing bag(std::vector<std::string> ids) {
  Drawing d;
  double x = 0.1;
  for (auto& id : ids) {
    d.placements.push_back(at(id, x));
    x += 0.1;
  }
  return d;
}

GameRecord game(const std::string& phrase, std::vector<std::vector<std::string>> guesses) {
  GameRecord r;
  r.game_id = "g1";
  r.phrase = Phrase::from_text(phrase);
  Round round;
  round.drawing = bag({"dog"});
  for (auto& g : guesses) round.guesses.push_back(Guess{g, {}});
  r.rounds.push_back(round);
  return r;
}

}  // namespace

TEST_CASE("normalization folds case, trims and composes") {
  CHECK(normalize_word("  Dog ") == "dog");
  CHECK(words_match("CAFÉ", "café"));
  // "e" + combining acute vs precomposed
  CHECK(words_match("cafe\xCC\x81", "caf\xC3\xA9"));
  CHECK_FALSE(words_match("run", "runner"));
  CHECK(split_words("  a  dog\tbarking\n") == std::vector<std::string>{"a", "dog", "barking"});
}

TEST_CASE("builtin stopwords") {
  const auto& sw = StopwordList::builtin();
  CHECK(sw.size() > 100);
  for (const char* w : {"a", "the", "of", "and", "is", "he"}) CHECK(sw.contains(w));
  CHECK_FALSE(sw.contains("dog"));
  CHECK(sw.contains("The"));
}

TEST_CASE("phrase construction") {
  Phrase p = Phrase::from_text("a dog barking");
  REQUIRE(p.size() == 3);
  CHECK(p[0].is_stopword);
  CHECK_FALSE(p[1].is_stopword);
  CHECK(p.content_count() == 2);
  CHECK(p.revealed(0));
  CHECK_FALSE(p.revealed(1));
  CHECK(p.text() == "a dog barking");
  CHECK_THROWS_AS(Phrase::from_text("the of a"), std::invalid_argument);
  CHECK_THROWS_AS(Phrase({PhraseWord{"two words", false, false, false}}), std::invalid_argument);

  std::map<std::string, int> vocab{{"dog", 3}};
  Phrase q = Phrase::from_text("a dog barking", StopwordList::builtin(), &vocab);
  CHECK_FALSE(q[1].is_oov);
  CHECK(q[2].is_oov);
  CHECK_FALSE(q[0].is_oov);
}

TEST_CASE("evaluate_guess examples") {
  Phrase p = Phrase::from_text("a dog barking");
  auto ev = evaluate_guess(p, Guess{{"a", "dog", "barking"}, {}});
  CHECK(ev.won);
  CHECK(ev.guess.correctness == std::vector<bool>{true, true, true});

  ev = evaluate_guess(p, Guess{{"a", "cat", "barking"}, {}});
  CHECK_FALSE(ev.won);
  CHECK(ev.guess.correctness == std::vector<bool>{true, false, true});
  CHECK(ev.phrase[2].guessed);
  CHECK_FALSE(ev.phrase[1].guessed);

  Phrase mixed = Phrase::from_text("a Dog barking");
  ev = evaluate_guess(mixed, Guess{{"a", "dog", "Barking"}, {}});
  CHECK(ev.won);

  CHECK_THROWS_AS(evaluate_guess(p, Guess{{"dog"}, {}}), InvalidGuess);
}

TEST_CASE("evaluate_guess is idempotent and flags are monotone") {
  Phrase p = Phrase::from_text("a dog chasing the red ball");
  std::mt19937_64 rng(3);
  const std::vector<std::string> pool{"a", "dog", "cat", "chasing", "the", "red", "blue", "ball"};
  Phrase state = p;
  for (int i = 0; i < 200; ++i) {
    std::vector<std::string> words;
    for (std::size_t k = 0; k < p.size(); ++k) words.push_back(pool[rng() % pool.size()]);
    auto ev = evaluate_guess(state, Guess{words, {}});
    auto again = evaluate_guess(ev.phrase, Guess{words, {}});
    CHECK(again.phrase == ev.phrase);
    CHECK(again.guess == ev.guess);
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (state[k].guessed) CHECK(ev.phrase[k].guessed);
    }
    state = ev.phrase;
  }
}

TEST_CASE("game_outcome examples") {
  auto won = game_outcome(game("a dog barking", {{"a", "dog", "barking"}}));
  CHECK(won.won);
  CHECK(won.off_by_one);
  CHECK(won.exact_phrase_guessed);

  // 1 of 3 content words missed
  auto one = game_outcome(game("dog chasing ball", {{"dog", "eating", "ball"}}));
  CHECK_FALSE(one.won);
  CHECK(one.off_by_one);
  CHECK(one.missed_words == 1);

  auto two = game_outcome(game("dog chasing ball", {{"dog", "eating", "cat"}}));
  CHECK_FALSE(two.won);
  CHECK_FALSE(two.off_by_one);
  CHECK(two.missed_words == 2);

  // won across guesses without any single exact guess
  auto spread = game_outcome(game("dog chasing", {{"dog", "eating"}, {"cat", "chasing"}}));
  CHECK(spread.won);
  CHECK_FALSE(spread.exact_phrase_guessed);

  GameRecord empty;
  empty.game_id = "e";
  empty.phrase = Phrase::from_text("a dog chasing");
  auto z = game_outcome(empty);
  CHECK_FALSE(z.won);
  CHECK_FALSE(z.off_by_one);
  empty.phrase = Phrase::from_text("a dog");
  CHECK(game_outcome(empty).off_by_one);
}

TEST_CASE("won implies off_by_one; off_by_one with no misses iff won") {
  std::mt19937_64 rng(11);
  const std::vector<std::string> pool{"dog", "cat", "ball", "red", "run"};
  for (int i = 0; i < 300; ++i) {
    std::vector<std::vector<std::string>> guesses;
    const std::size_t n = rng() % 4;
    for (std::size_t g = 0; g < n; ++g) {
      guesses.push_back({pool[rng() % 5], pool[rng() % 5], pool[rng() % 5]});
    }
    auto o = game_outcome(game("red dog run", guesses));
    if (o.won) CHECK(o.off_by_one);
    CHECK((o.off_by_one && o.missed_words == 0) == o.won);
  }
}

TEST_CASE("guessed_after honours cutoffs") {
  GameRecord r = game("dog chasing ball", {{"dog", "x", "y"}, {"x", "chasing", "y"}, {"x", "y", "ball"}});
  CHECK(guessed_after(r, 1) == std::vector<bool>{true, false, false});
  CHECK(guessed_after(r, 2) == std::vector<bool>{true, true, false});
  CHECK(guessed_after(r) == std::vector<bool>{true, true, true});
  CHECK(guessed_after(r, std::nullopt, 0) == std::vector<bool>{false, false, false});
}

TEST_CASE("classify_revision examples") {
  CHECK(classify_revision(bag({"dog", "tree"}), bag({"dog", "tree", "arrow"})) == Revision::add);
  Drawing moved = bag({"dog", "tree"});
  moved.placements[0].x = 0.9;
  CHECK(classify_revision(bag({"dog", "tree"}), moved) == Revision::edit);
  CHECK(classify_revision(bag({"dog", "tree"}), bag({"cat", "tree"})) == Revision::redraw);
  CHECK(classify_revision(bag({"dog", "tree"}), bag({"dog"})) == Revision::edit);
  CHECK(classify_revision(bag({"dog"}), bag({"dog", "dog"})) == Revision::add);
  CHECK(classify_revision(bag({"dog", "dog"}), bag({"dog", "cat"})) == Revision::redraw);
  CHECK(classify_revision(bag({"dog"}), bag({"dog"})) == Revision::edit);
}

TEST_CASE("classify_game_revision takes the latter-most label") {
  auto rec = [](std::vector<Drawing> ds) {
    GameRecord r;
    for (auto& d : ds) r.rounds.push_back(Round{d, {}});
    return r;
  };
  const Drawing a = bag({"dog"}), b = bag({"dog", "tree"}), c = bag({"cat"});
  Drawing a_moved = a;
  a_moved.placements[0].y = 0.1;
  CHECK(classify_game_revision(rec({a})) == Revision::single_drawing);
  CHECK(classify_game_revision(rec({a, a_moved, b})) == Revision::add);  // [edit, add]
  CHECK(classify_game_revision(rec({a, b, c})) == Revision::redraw);     // [add, redraw]
  CHECK(classify_game_revision(rec({a, c, c})) == Revision::redraw);     // [redraw, edit]
}

TEST_CASE("guesser view hides unguessed content words") {
  GameState s;
  s.phrase = Phrase::from_text("the dog chasing a ball");
  s.phrase.mark_guessed(2);
  auto v = guesser_view(s);
  REQUIRE(v.phrase.size() == 5);
  CHECK(v.phrase.words[0].text == "the");
  CHECK_FALSE(v.phrase.words[1].text.has_value());
  CHECK(v.phrase.words[2].text == "chasing");
  CHECK(v.phrase.words[3].text == "a");
  CHECK_FALSE(v.phrase.words[4].text.has_value());
  CHECK(drawer_view(s).phrase == s.phrase);
}

TEST_CASE("icon library invariants and manifest round trip") {
  CHECK_THROWS_AS(IconLibrary({{"a", "x", {}}, {"a", "y", {}}}, {}), std::invalid_argument);
  CHECK_THROWS_AS(IconLibrary({{"a", "", {}}}, {}), std::invalid_argument);
  CHECK_THROWS_AS(IconLibrary({{"a", "x", {}}}, {"b"}), std::invalid_argument);
  IconLibrary lib({{"dog", "dog", {"pet"}}, {"arrow", "arrow", {}}}, {"arrow"});
  CHECK(lib.is_arrow("arrow"));
  CHECK_FALSE(lib.is_arrow("dog"));
  auto again = IconLibrary::from_manifest_text(lib.to_manifest_text());
  CHECK(again.size() == 2);
  CHECK(again.at("dog").tags == std::vector<std::string>{"pet"});
  CHECK(again.arrow_icon_ids() == std::vector<std::string>{"arrow"});
}

TEST_CASE("placement ranges") {
  IconPlacement p = at("dog");
  CHECK_NOTHROW(validate_placement(p));
  p.x = 1.2;
  CHECK_THROWS(validate_placement(p));
  p = at("dog");
  p.scale = 0.0;
  CHECK_THROWS(validate_placement(p));
  p = at("dog");
  p.rotation = 360.0;
  CHECK_THROWS(validate_placement(p));
  CHECK_THROWS(validate_drawing(Drawing{}));
}

TEST_CASE("schema round trip and validation") {
  GameRecord r = game("a dog barking", {{"a", "cat", "barking"}, {"a", "dog", "barking"}});
  r.outcome = Outcome::won;
  r.elapsed_seconds = 42.5;
  r.split = Split::ood_test;
  r.drawer = {"h1", false};
  r.guesser = {"ai", true};
  for (auto& g : r.rounds[0].guesses) g = evaluate_guess(r.phrase.reset(), g).guess;
  const std::string text = schema::dump_record(r);
  GameRecord back = schema::record_from_json(nlohmann::json::parse(text));
  CHECK(schema::dump_record(back) == text);
  CHECK(back.split == Split::ood_test);
  CHECK(back.guesser.is_ai);
  CHECK(schema::validate_record(back).empty());

  GameRecord bad = r;
  bad.rounds[0].guesses.push_back(Guess{{"dog"}, {}});
  auto v = schema::validate_record(bad);
  REQUIRE(v.size() == 1);
  CHECK(v[0].find("length 1 != phrase length 3") != std::string::npos);

  GameRecord liar = game("a dog barking", {{"a", "cat", "barking"}});
  liar.outcome = Outcome::won;
  CHECK_FALSE(schema::validate_record(liar).empty());

  auto j = nlohmann::json::parse(text);
  j["rounds"][0]["drawing"]["icons"][0].erase("x");
  try {
    schema::record_from_json(j);
    FAIL("expected SchemaError");
  } catch (const schema::SchemaError& e) {
    CHECK(e.path() == "$.rounds[0].drawing.icons[0].x");
  }
}

TEST_CASE("split and outcome names") {
  for (auto s : {Split::train, Split::ind_valid, Split::ind_test, Split::ood_valid, Split::ood_test}) {
    CHECK(parse_split(to_string(s)) == s);
  }
  CHECK(is_ood(Split::ood_valid));
  CHECK_FALSE(is_ood(Split::ind_test));
  CHECK(parse_outcome("lost_timeout") == Outcome::lost_timeout);
  CHECK_THROWS(parse_split("nope"));
}
