#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "iconary/core.hpp"

// Six-token-per-icon quantized drawing representation.
//
// A drawing of n icons serializes to 6n+1 tokens:
//   <icon:ID> <x_K> <y_K> <s_K> <r_K> <f_K>  ...  <eod>
// Every pose token carries a bucket index; decoding maps it back to the
// bucket center.
namespace iconary::codec {

enum class Transform { linear, log };

struct Range {
  double lo = 0.0;
  double hi = 1.0;
};

struct QuantizationSpec {
  int x_buckets = 32;
  int y_buckets = 16;
  int scale_buckets = 11;
  int rotation_buckets = 8;
  int flip_buckets = 2;
  Range scale_range{1.0 / 8.0, 8.0};

  void validate() const;
};

std::size_t quantize(double value, int buckets, Range range, Transform transform);
double dequantize(std::size_t index, int buckets, Range range, Transform transform);

// Rotation sectors are centered on multiples of 360/buckets, so bucket 0
// covers [-22.5, 22.5) for 8 buckets.
std::size_t quantize_rotation(double degrees, int buckets);
double dequantize_rotation(std::size_t index, int buckets);

enum class TokenKind { icon, x, y, scale, rotation, flip, end_of_drawing };
std::string_view to_string(TokenKind k);

struct DrawingToken {
  TokenKind kind = TokenKind::end_of_drawing;
  std::string icon_id;    // kind == icon
  std::size_t value = 0;  // bucket index for pose kinds

  static DrawingToken icon_token(std::string id) { return {TokenKind::icon, std::move(id), 0}; }
  static DrawingToken pose(TokenKind k, std::size_t v) { return {k, {}, v}; }
  static DrawingToken end() { return {TokenKind::end_of_drawing, {}, 0}; }

  bool operator==(const DrawingToken&) const = default;
  auto operator<=>(const DrawingToken&) const = default;
};

// Wire form: <icon:ID>, <x_K>, <y_K>, <s_K>, <r_K>, <f_K>, <eod>.
std::string to_string(const DrawingToken& t);
// Throws std::invalid_argument on anything that is not one of the forms above.
DrawingToken parse_token(std::string_view s);
std::vector<std::string> to_strings(const std::vector<DrawingToken>& tokens);
std::vector<DrawingToken> parse_tokens(const std::vector<std::string>& strings);

int bucket_count(TokenKind k, const QuantizationSpec& spec);

class DrawingParseError : public std::runtime_error {
 public:
  DrawingParseError(std::size_t position, std::string expected, std::string detail);
  std::size_t position() const { return position_; }
  const std::string& expected() const { return expected_; }

 private:
  std::size_t position_;
  std::string expected_;
};

enum class IconOrder { creation, word_aligned };

struct EncodeOptions {
  IconOrder order = IconOrder::creation;
  // For word_aligned: word position per placement (nullopt = unaligned, goes
  // last). Ties keep creation order.
  std::vector<std::optional<std::size_t>> word_of_placement;
};

// Throws std::invalid_argument for empty drawings or unknown icon ids.
std::vector<DrawingToken> encode_drawing(const Drawing& drawing, const IconLibrary& library,
                                         const QuantizationSpec& spec = {},
                                         const EncodeOptions& options = {});

// Throws DrawingParseError naming the first offending token position.
Drawing decode_drawing(const std::vector<DrawingToken>& tokens, const QuantizationSpec& spec = {},
                       int round_index = 0, const IconLibrary* library = nullptr);

// Pose after a quantize/dequantize round trip.
IconPlacement snap_to_buckets(const IconPlacement& p, const QuantizationSpec& spec = {});

// ---------------------------------------------------------------------------
// Output vocabulary and grammar mask

class DrawingVocab {
 public:
  DrawingVocab(const IconLibrary& library, const QuantizationSpec& spec = {});

  std::size_t size() const { return tokens_.size(); }
  const DrawingToken& token(std::size_t id) const { return tokens_[id]; }
  const std::vector<DrawingToken>& tokens() const { return tokens_; }
  std::optional<std::size_t> id_of(const DrawingToken& t) const;
  std::size_t eod_id() const { return tokens_.size() - 1; }
  const QuantizationSpec& spec() const { return spec_; }

 private:
  QuantizationSpec spec_;
  std::vector<DrawingToken> tokens_;
  std::map<DrawingToken, std::size_t> index_;
};

struct DrawingGrammarState {
  int position_in_icon = 0;  // 0 = icon name expected, 1..5 = pose kinds
  std::size_t icons_emitted = 0;
  bool finished = false;
};

// Token kind expected at a given in-icon position (1..5).
TokenKind pose_kind_at(int position_in_icon);

std::vector<bool> grammar_mask(const DrawingGrammarState& state, const DrawingVocab& vocab);
// Throws std::invalid_argument if the token is not admissible in `state`.
DrawingGrammarState advance(DrawingGrammarState state, const DrawingToken& token);

// ---------------------------------------------------------------------------
// Token embedding initialization

class WordpieceEmbedder {
 public:
  virtual ~WordpieceEmbedder() = default;
  virtual std::size_t dim() const = 0;
  virtual std::vector<std::string> tokenize(std::string_view text) const = 0;
  virtual std::vector<double> embed(std::string_view piece) const = 0;
};

// Icon tokens get the mean embedding of their name's wordpieces; the k-th
// bucket token of each pose kind gets the embedding of the numeral k+1
// (averaged over its wordpieces if the numeral splits). <eod> is left to the
// caller.
std::map<std::string, std::vector<double>> init_token_embeddings(
    const IconLibrary& library, const QuantizationSpec& spec, const WordpieceEmbedder& embedder);

}  // namespace iconary::codec
