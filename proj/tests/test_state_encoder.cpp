#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "iconary/state_encoder.hpp"

using namespace iconary;
using namespace iconary::encoder;
using nlohmann::json;

namespace {

json golden() {
  std::ifstream in(std::string(ICONARY_TEST_DIR) + "/golden/encodings.json");
  REQUIRE(in);
  return json::parse(in);
}

Drawing drawing_from(const json& icons) {
  Drawing d;
  for (const auto& a : icons) {
    d.placements.push_back({a[0].get<std::string>(), a[1].get<double>(), a[2].get<double>(), a[3].get<double>(),
                            a[4].get<double>(), a[5].get<bool>()});
  }
  return d;
}

Phrase phrase_from(const json& c) {
  Phrase p = Phrase::from_text(c["phrase"].get<std::string>());
  for (std::size_t i : c["guessed"].get<std::vector<std::size_t>>()) p.mark_guessed(i);
  return p;
}

}  // namespace

TEST_CASE("golden drawing descriptions") {
  const json g = golden();
  const auto lib = IconLibrary::from_manifest_text(g["library"].dump());
  for (const auto& c : g["drawings"]) {
    CAPTURE(c["name"].get<std::string>());
    CHECK(describe_drawing(drawing_from(c["icons"]), lib) == c["text"].get<std::string>());
  }
}

TEST_CASE("golden phrase renderings") {
  const json g = golden();
  for (const auto& c : g["phrases"]) {
    const Phrase p = phrase_from(c);
    CAPTURE(p.text());
    const auto masked = mask_phrase(p);
    CHECK(render_phrase_slots(masked, PhraseStyle::underscore) == c["underscore"].get<std::string>());
    CHECK(render_phrase_slots(masked, PhraseStyle::fill_in_the_blank) == c["fill_in_the_blank"].get<std::string>());
    CHECK(fill_in_the_blank_target(p) == c["target"].get<std::string>());
    CHECK(render_drawer_input(p) == c["drawer"].get<std::string>());
  }
}

TEST_CASE("guesser input joins the latest drawing and the slots") {
  const json g = golden();
  const auto lib = IconLibrary::from_manifest_text(g["library"].dump());
  GameState s;
  s.phrase = Phrase::from_text("a dog barking");
  CHECK_THROWS_AS(render_guesser_input(guesser_view(s), lib, PhraseStyle::underscore), std::invalid_argument);
  s.rounds.push_back(Round{drawing_from(g["drawings"][1]["icons"]), {}});
  s.rounds.push_back(Round{drawing_from(g["drawings"][0]["icons"]), {}});
  CHECK(render_guesser_input(guesser_view(s), lib, PhraseStyle::underscore) == "dog phrase: a _ _");
  CHECK(render_guesser_input(guesser_view(s), lib, PhraseStyle::fill_in_the_blank) == "dog phrase: a <extra_id_0>");
  SentinelFormat custom{"[M", "]"};
  CHECK(render_guesser_input(guesser_view(s), lib, PhraseStyle::fill_in_the_blank, custom) == "dog phrase: a [M0]");
}

TEST_CASE("size bands") {
  CHECK(size_modifier(2.5) == SizeModifier::huge);
  CHECK(size_modifier(2.49) == SizeModifier::large);
  CHECK(size_modifier(1.5) == SizeModifier::large);
  CHECK(size_modifier(1.49) == SizeModifier::none);
  CHECK(size_modifier(0.67) == SizeModifier::none);
  CHECK(size_modifier(2.0 / 3.0) == SizeModifier::small);
  CHECK(size_modifier(0.41) == SizeModifier::small);
  CHECK(size_modifier(0.4) == SizeModifier::tiny);
}

TEST_CASE("arrow directions") {
  CHECK(arrow_direction(0, false) == "right");
  CHECK(arrow_direction(90, false) == "down");
  CHECK(arrow_direction(180, false) == "left");
  CHECK(arrow_direction(270, false) == "up");
  CHECK(arrow_direction(44.9, false) == "right");
  CHECK(arrow_direction(45, false) == "down");
  CHECK(arrow_direction(0, true) == "left");
  CHECK(arrow_direction(90, true) == "up");
}

TEST_CASE("permuting identical icons never changes the text") {
  const json g = golden();
  const auto lib = IconLibrary::from_manifest_text(g["library"].dump());
  std::mt19937_64 rng(9);
  for (const auto& c : g["drawings"]) {
    Drawing d = drawing_from(c["icons"]);
    const std::string text = describe_drawing(d, lib);
    for (int i = 0; i < 20; ++i) {
      // swap poses among placements of the same icon
      for (std::size_t a = 0; a < d.placements.size(); ++a) {
        const std::size_t b = rng() % d.placements.size();
        if (d.placements[a].icon_id == d.placements[b].icon_id) std::swap(d.placements[a], d.placements[b]);
      }
      CHECK(describe_drawing(d, lib) == text);
    }
  }
}

TEST_CASE("sentinel count is runs plus one") {
  std::mt19937_64 rng(2);
  const std::vector<std::string> words{"the", "dog", "runs", "in", "a", "big", "red", "park", "of", "cats"};
  for (int i = 0; i < 300; ++i) {
    std::vector<std::string> w;
    const std::size_t n = 1 + rng() % 8;
    for (std::size_t k = 0; k < n; ++k) w.push_back(words[rng() % words.size()]);
    if (std::all_of(w.begin(), w.end(), [](const auto& x) { return StopwordList::builtin().contains(x); })) continue;
    Phrase p = Phrase::from_text(join_words(w));
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (rng() % 3 == 0) p.mark_guessed(k);
    }
    std::size_t runs = 0;
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (!p.revealed(k) && (k == 0 || p.revealed(k - 1))) ++runs;
    }
    const std::string target = fill_in_the_blank_target(p);
    std::size_t sentinels = 0;
    for (std::size_t pos = target.find("<extra_id_"); pos != std::string::npos; pos = target.find("<extra_id_", pos + 1)) {
      ++sentinels;
    }
    CHECK(sentinels == runs + 1);
    const std::string slots = render_phrase_slots(mask_phrase(p), PhraseStyle::fill_in_the_blank);
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (!p.revealed(k)) {
        // hidden words never leak into the guesser slots
        const auto toks = split_words(slots);
        const bool visible_elsewhere = std::any_of(p.words().begin(), p.words().end(), [&](const PhraseWord& o) {
          return o.text == p[k].text && (o.is_stopword || o.guessed);
        });
        CHECK((std::find(toks.begin(), toks.end(), p[k].text) == toks.end() || visible_elsewhere));
      }
    }
  }
}
