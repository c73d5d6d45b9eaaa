#include <doctest.h>

#include <cmath>
#include <random>

#include "iconary/codec.hpp"

using namespace iconary;
using namespace iconary::codec;

namespace {

IconLibrary small_library() {
  return IconLibrary({{"dog", "dog", {}}, {"tree", "pine tree", {}}, {"arrow", "arrow", {}}}, {"arrow"});
}

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

TEST_CASE("quantize examples") {
  const Range unit_range{0.0, 1.0};
  CHECK(quantize(0.0, 32, unit_range, Transform::linear) == 0);
  CHECK(quantize(1.0, 32, unit_range, Transform::linear) == 31);
  CHECK(quantize(0.5, 32, unit_range, Transform::linear) == 16);
  CHECK(quantize(-0.3, 32, unit_range, Transform::linear) == 0);
  CHECK(quantize(7.0, 32, unit_range, Transform::linear) == 31);
  CHECK_THROWS(quantize(std::nan(""), 32, unit_range, Transform::linear));
  CHECK_THROWS(quantize(0.5, 1, unit_range, Transform::linear));
  CHECK_THROWS(quantize(0.5, 4, Range{1.0, 1.0}, Transform::linear));
}

TEST_CASE("dequantize examples") {
  const Range unit_range{0.0, 1.0};
  CHECK(dequantize(0, 2, unit_range, Transform::linear) == 0.25);
  CHECK(dequantize(16, 32, unit_range, Transform::linear) == 0.515625);
  CHECK_THROWS(dequantize(32, 32, unit_range, Transform::linear));
  for (int b : {2, 11, 16, 32}) {
    for (int k = 0; k < b; ++k) {
      CHECK(quantize(dequantize(k, b, unit_range, Transform::linear), b, unit_range, Transform::linear) == std::size_t(k));
      CHECK(quantize(dequantize(k, b, {0.125, 8.0}, Transform::log), b, {0.125, 8.0}, Transform::log) == std::size_t(k));
    }
  }
}

TEST_CASE("log scale puts 1.0 in the middle bucket") {
  CHECK(quantize(1.0, 11, {0.125, 8.0}, Transform::log) == 5);
  CHECK(std::abs(dequantize(5, 11, {0.125, 8.0}, Transform::log) - 1.0) < 1e-12);
}

TEST_CASE("rotation sectors are centered on multiples of 45 degrees") {
  CHECK(quantize_rotation(0.0, 8) == 0);
  CHECK(quantize_rotation(22.4, 8) == 0);
  CHECK(quantize_rotation(22.5, 8) == 1);
  CHECK(quantize_rotation(337.5, 8) == 0);
  CHECK(quantize_rotation(337.4, 8) == 7);
  CHECK(quantize_rotation(90.0, 8) == 2);
  CHECK(dequantize_rotation(2, 8) == 90.0);
  CHECK(dequantize_rotation(0, 8) == 0.0);
}

TEST_CASE("quantization spec validation") {
  QuantizationSpec s;
  CHECK_NOTHROW(s.validate());
  s.scale_range = {1.5, 8.0};
  CHECK_THROWS(s.validate());
  s = {};
  s.flip_buckets = 1;
  CHECK_THROWS(s.validate());
}

TEST_CASE("encode_drawing examples") {
  const auto lib = small_library();
  Drawing d;
  d.placements.push_back({"dog", 0.5, 0.5, 1.0, 0.0, false});
  auto t = encode_drawing(d, lib);
  REQUIRE(t.size() == 7);
  CHECK(to_strings(t) == std::vector<std::string>{"<icon:dog>", "<x_16>", "<y_8>", "<s_5>", "<r_0>", "<f_0>", "<eod>"});

  d.placements.push_back({"tree", 0.0, 1.0, 8.0, 300.0, true});
  t = encode_drawing(d, lib);
  CHECK(t.size() == 13);
  CHECK(to_strings(t)[6] == "<icon:tree>");
  CHECK(to_strings(t)[7] == "<x_0>");
  CHECK(to_strings(t)[8] == "<y_15>");
  CHECK(to_strings(t)[9] == "<s_10>");
  CHECK(to_strings(t)[10] == "<r_7>");
  CHECK(to_strings(t)[11] == "<f_1>");

  Drawing unknown;
  unknown.placements.push_back({"cat", 0.5, 0.5, 1.0, 0.0, false});
  CHECK_THROWS_AS(encode_drawing(unknown, lib), std::invalid_argument);
  CHECK_THROWS_AS(encode_drawing(Drawing{}, lib), std::invalid_argument);
}

TEST_CASE("word-aligned ordering") {
  const auto lib = small_library();
  Drawing d;
  d.placements.push_back({"tree", 0.2, 0.5, 1.0, 0.0, false});
  d.placements.push_back({"arrow", 0.4, 0.5, 1.0, 0.0, false});
  d.placements.push_back({"dog", 0.8, 0.5, 1.0, 0.0, false});
  EncodeOptions opt;
  opt.order = IconOrder::word_aligned;
  opt.word_of_placement = {2, std::nullopt, 0};
  auto t = to_strings(encode_drawing(d, lib, {}, opt));
  CHECK(t[0] == "<icon:dog>");
  CHECK(t[6] == "<icon:tree>");
  CHECK(t[12] == "<icon:arrow>");
}

TEST_CASE("token wire forms") {
  CHECK(parse_token("<icon:i-bear-2>") == DrawingToken::icon_token("i-bear-2"));
  CHECK(parse_token("<r_3>") == DrawingToken::pose(TokenKind::rotation, 3));
  CHECK(parse_token("<eod>") == DrawingToken::end());
  for (const char* bad : {"", "<x_>", "<x_1", "x_1", "<q_1>", "<icon:>", "<x_-1>", "<x_1a>"}) {
    CHECK_THROWS_AS(parse_token(bad), std::invalid_argument);
  }
}

TEST_CASE("decode errors carry positions") {
  const auto lib = small_library();
  Drawing d;
  d.placements.push_back({"dog", 0.5, 0.5, 1.0, 0.0, false});
  auto t = encode_drawing(d, lib);

  std::vector<DrawingToken> truncated(t.begin(), t.begin() + 5);
  try {
    decode_drawing(truncated);
    FAIL("expected error");
  } catch (const DrawingParseError& e) {
    CHECK(e.position() == 5);
    CHECK(e.expected() == "flip");
  }
  try {
    decode_drawing({DrawingToken::pose(TokenKind::x, 3)});
    FAIL("expected error");
  } catch (const DrawingParseError& e) {
    CHECK(e.position() == 0);
    CHECK(e.expected() == "icon_name");
  }
  auto no_end = t;
  no_end.pop_back();
  CHECK_THROWS_AS(decode_drawing(no_end), DrawingParseError);
  auto out_of_range = t;
  out_of_range[1].value = 32;
  try {
    decode_drawing(out_of_range);
    FAIL("expected error");
  } catch (const DrawingParseError& e) {
    CHECK(e.position() == 1);
  }
  CHECK_THROWS_AS(decode_drawing({DrawingToken::end()}), DrawingParseError);
  auto unknown = t;
  unknown[0] = DrawingToken::icon_token("cat");
  CHECK_NOTHROW(decode_drawing(unknown));
  CHECK_THROWS_AS(decode_drawing(unknown, {}, 0, &lib), DrawingParseError);
  CHECK(decode_drawing(t, {}, 3, &lib).round_index == 3);
}

TEST_CASE("decode round trip holds poses within half a bucket") {
  const auto lib = small_library();
  std::mt19937_64 rng(5);
  const QuantizationSpec spec;
  for (int i = 0; i < 500; ++i) {
    Drawing d;
    const int n = 1 + static_cast<int>(rng() % 6);
    for (int k = 0; k < n; ++k) {
      const char* ids[] = {"dog", "tree", "arrow"};
      d.placements.push_back({ids[rng() % 3], unit(rng), unit(rng), std::exp((unit(rng) * 2 - 1) * std::log(8.0)),
                              unit(rng) * 360.0, (rng() & 1) != 0});
    }
    const Drawing back = decode_drawing(encode_drawing(d, lib, spec), spec);
    REQUIRE(back.placements.size() == d.placements.size());
    for (std::size_t k = 0; k < d.placements.size(); ++k) {
      const auto& a = d.placements[k];
      const auto& b = back.placements[k];
      CHECK(a.icon_id == b.icon_id);
      CHECK(a.flipped == b.flipped);
      CHECK(std::abs(a.x - b.x) <= 0.5 / 32 + 1e-12);
      CHECK(std::abs(a.y - b.y) <= 0.5 / 16 + 1e-12);
      CHECK(std::abs(std::log(a.scale) - std::log(b.scale)) <= 0.5 * std::log(64.0) / 11 + 1e-12);
      double dr = std::fmod(std::abs(a.rotation - b.rotation), 360.0);
      dr = std::min(dr, 360.0 - dr);
      CHECK(dr <= 22.5 + 1e-9);
    }
  }
}

TEST_CASE("grammar mask") {
  const auto lib = small_library();
  DrawingVocab vocab(lib);
  CHECK(vocab.size() == 3 + 32 + 16 + 11 + 8 + 2 + 1);
  DrawingGrammarState s;
  auto m = grammar_mask(s, vocab);
  for (std::size_t i = 0; i < vocab.size(); ++i) CHECK(m[i] == (vocab.token(i).kind == TokenKind::icon));

  s = advance(s, DrawingToken::icon_token("dog"));
  for (TokenKind k : {TokenKind::x, TokenKind::y, TokenKind::scale, TokenKind::rotation, TokenKind::flip}) {
    m = grammar_mask(s, vocab);
    for (std::size_t i = 0; i < vocab.size(); ++i) CHECK(m[i] == (vocab.token(i).kind == k));
    CHECK_THROWS(advance(s, DrawingToken::end()));
    s = advance(s, DrawingToken::pose(k, 0));
  }
  m = grammar_mask(s, vocab);
  CHECK(m[vocab.eod_id()]);
  for (std::size_t i = 0; i + 1 < vocab.size(); ++i) CHECK(m[i] == (vocab.token(i).kind == TokenKind::icon));
  s = advance(s, DrawingToken::end());
  CHECK(s.finished);
  CHECK_THROWS(advance(s, DrawingToken::icon_token("dog")));
}

namespace {

class FakeEmbedder final : public WordpieceEmbedder {
 public:
  std::size_t dim() const override { return 2; }
  std::vector<std::string> tokenize(std::string_view text) const override {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
      if (c == ' ') {
        if (!cur.empty()) out.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (!cur.empty()) out.push_back(cur);
    // numerals of two digits split per digit
    if (out.size() == 1 && out[0].size() == 2 && std::isdigit(static_cast<unsigned char>(out[0][0]))) {
      return {out[0].substr(0, 1), out[0].substr(1)};
    }
    return out;
  }
  std::vector<double> embed(std::string_view piece) const override {
    double a = 0;
    for (char c : piece) a += static_cast<unsigned char>(c);
    return {a, static_cast<double>(piece.size())};
  }
};

}  // namespace

TEST_CASE("token embedding initialization") {
  const auto lib = small_library();
  FakeEmbedder e;
  auto emb = init_token_embeddings(lib, {}, e);
  CHECK(emb.at("<icon:dog>") == e.embed("dog"));
  const auto pine = e.embed("pine"), tree = e.embed("tree");
  CHECK(emb.at("<icon:tree>") == std::vector<double>{(pine[0] + tree[0]) / 2, (pine[1] + tree[1]) / 2});
  CHECK(emb.at("<x_0>") == e.embed("1"));
  CHECK(emb.at("<s_10>") == std::vector<double>{(e.embed("1")[0] + e.embed("1")[0]) / 2, 1.0});
  CHECK(emb.at("<x_31>") == std::vector<double>{(e.embed("3")[0] + e.embed("2")[0]) / 2, 1.0});
  CHECK(emb.count("<eod>") == 0);
  CHECK(emb.size() == 3 + 32 + 16 + 11 + 8 + 2);
}
