#include "iconary/codec.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

namespace iconary::codec {

void QuantizationSpec::validate() const {
  for (int b : {x_buckets, y_buckets, scale_buckets, rotation_buckets, flip_buckets}) {
    if (b < 2) throw std::invalid_argument("bucket counts must be >= 2");
  }
  if (!(scale_range.lo > 0.0 && scale_range.lo < 1.0 && 1.0 < scale_range.hi)) {
    throw std::invalid_argument("scale range must satisfy 0 < lo < 1 < hi");
  }
}

namespace {

double transformed(double v, Transform t) {
  if (t == Transform::linear) return v;
  return v > 0.0 ? std::log(v) : -std::numeric_limits<double>::infinity();
}

void check_bucket_args(int buckets, Range range, Transform transform) {
  if (buckets < 2) throw std::invalid_argument("buckets must be >= 2");
  if (!(range.lo < range.hi)) throw std::invalid_argument("range requires lo < hi");
  if (transform == Transform::log && range.lo <= 0.0) {
    throw std::invalid_argument("log transform requires a positive range");
  }
}

}  // namespace

std::size_t quantize(double value, int buckets, Range range, Transform transform) {
  check_bucket_args(buckets, range, transform);
  if (!std::isfinite(value)) throw std::invalid_argument("cannot quantize a non-finite value");
  const double lo = transformed(range.lo, transform);
  const double hi = transformed(range.hi, transform);
  double u = (transformed(value, transform) - lo) / (hi - lo);
  u = std::clamp(u, 0.0, 1.0);
  auto index = static_cast<std::size_t>(std::floor(u * buckets));
  return std::min(index, static_cast<std::size_t>(buckets - 1));
}

double dequantize(std::size_t index, int buckets, Range range, Transform transform) {
  check_bucket_args(buckets, range, transform);
  if (index >= static_cast<std::size_t>(buckets)) {
    throw std::out_of_range("bucket index " + std::to_string(index) + " >= " + std::to_string(buckets));
  }
  const double lo = transformed(range.lo, transform);
  const double hi = transformed(range.hi, transform);
  const double t = lo + (static_cast<double>(index) + 0.5) / buckets * (hi - lo);
  return transform == Transform::log ? std::exp(t) : t;
}

std::size_t quantize_rotation(double degrees, int buckets) {
  if (!std::isfinite(degrees)) throw std::invalid_argument("cannot quantize a non-finite rotation");
  const double width = 360.0 / buckets;
  double shifted = std::fmod(degrees + width / 2.0, 360.0);
  if (shifted < 0.0) shifted += 360.0;
  return quantize(shifted, buckets, {0.0, 360.0}, Transform::linear);
}

double dequantize_rotation(std::size_t index, int buckets) {
  if (buckets < 2) throw std::invalid_argument("buckets must be >= 2");
  if (index >= static_cast<std::size_t>(buckets)) throw std::out_of_range("rotation bucket out of range");
  return static_cast<double>(index) * 360.0 / buckets;
}

// ---------------------------------------------------------------------------
// Tokens

std::string_view to_string(TokenKind k) {
  switch (k) {
    case TokenKind::icon: return "icon_name";
    case TokenKind::x: return "x";
    case TokenKind::y: return "y";
    case TokenKind::scale: return "scale";
    case TokenKind::rotation: return "rotation";
    case TokenKind::flip: return "flip";
    case TokenKind::end_of_drawing: return "end_of_drawing";
  }
  return "?";
}

namespace {

constexpr std::pair<TokenKind, char> kPosePrefixes[] = {
    {TokenKind::x, 'x'},        {TokenKind::y, 'y'},    {TokenKind::scale, 's'},
    {TokenKind::rotation, 'r'}, {TokenKind::flip, 'f'},
};

}  // namespace

std::string to_string(const DrawingToken& t) {
  if (t.kind == TokenKind::icon) return "<icon:" + t.icon_id + ">";
  if (t.kind == TokenKind::end_of_drawing) return "<eod>";
  for (auto [kind, c] : kPosePrefixes) {
    if (kind == t.kind) return std::string("<") + c + "_" + std::to_string(t.value) + ">";
  }
  return "<?>";
}

DrawingToken parse_token(std::string_view s) {
  auto bad = [&] { return std::invalid_argument("malformed drawing token '" + std::string(s) + "'"); };
  if (s.size() < 3 || s.front() != '<' || s.back() != '>') throw bad();
  std::string_view body = s.substr(1, s.size() - 2);
  if (body == "eod") return DrawingToken::end();
  if (body.starts_with("icon:")) {
    std::string_view id = body.substr(5);
    if (id.empty()) throw bad();
    return DrawingToken::icon_token(std::string(id));
  }
  if (body.size() < 3 || body[1] != '_') throw bad();
  for (auto [kind, c] : kPosePrefixes) {
    if (body[0] != c) continue;
    std::string_view digits = body.substr(2);
    std::size_t value = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
    if (ec != std::errc() || ptr != digits.data() + digits.size()) throw bad();
    return DrawingToken::pose(kind, value);
  }
  throw bad();
}

std::vector<std::string> to_strings(const std::vector<DrawingToken>& tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(to_string(t));
  return out;
}

std::vector<DrawingToken> parse_tokens(const std::vector<std::string>& strings) {
  std::vector<DrawingToken> out;
  out.reserve(strings.size());
  for (const auto& s : strings) out.push_back(parse_token(s));
  return out;
}

int bucket_count(TokenKind k, const QuantizationSpec& spec) {
  switch (k) {
    case TokenKind::x: return spec.x_buckets;
    case TokenKind::y: return spec.y_buckets;
    case TokenKind::scale: return spec.scale_buckets;
    case TokenKind::rotation: return spec.rotation_buckets;
    case TokenKind::flip: return spec.flip_buckets;
    default: return 0;
  }
}

DrawingParseError::DrawingParseError(std::size_t position, std::string expected, std::string detail)
    : std::runtime_error("drawing token " + std::to_string(position) + ": expected " + expected +
                         (detail.empty() ? "" : " (" + detail + ")")),
      position_(position),
      expected_(std::move(expected)) {}

// ---------------------------------------------------------------------------
// Encode / decode

namespace {

std::size_t flip_bucket(bool flipped, int buckets) {
  return flipped ? static_cast<std::size_t>(buckets - 1) : 0;
}

void append_icon(std::vector<DrawingToken>& out, const IconPlacement& p, const QuantizationSpec& spec) {
  out.push_back(DrawingToken::icon_token(p.icon_id));
  out.push_back(DrawingToken::pose(TokenKind::x, quantize(p.x, spec.x_buckets, {0, 1}, Transform::linear)));
  out.push_back(DrawingToken::pose(TokenKind::y, quantize(p.y, spec.y_buckets, {0, 1}, Transform::linear)));
  out.push_back(DrawingToken::pose(TokenKind::scale,
                                   quantize(p.scale, spec.scale_buckets, spec.scale_range, Transform::log)));
  out.push_back(DrawingToken::pose(TokenKind::rotation, quantize_rotation(p.rotation, spec.rotation_buckets)));
  out.push_back(DrawingToken::pose(TokenKind::flip, flip_bucket(p.flipped, spec.flip_buckets)));
}

}  // namespace

std::vector<DrawingToken> encode_drawing(const Drawing& drawing, const IconLibrary& library,
                                         const QuantizationSpec& spec, const EncodeOptions& options) {
  if (drawing.placements.empty()) throw std::invalid_argument("cannot encode an empty drawing");
  for (const auto& p : drawing.placements) {
    if (!library.contains(p.icon_id)) throw std::invalid_argument("unknown icon id '" + p.icon_id + "'");
  }
  std::vector<std::size_t> order(drawing.placements.size());
  std::iota(order.begin(), order.end(), 0);
  if (options.order == IconOrder::word_aligned) {
    if (options.word_of_placement.size() != order.size()) {
      throw std::invalid_argument("word_aligned order needs one word slot per placement");
    }
    auto key = [&](std::size_t i) {
      const auto& w = options.word_of_placement[i];
      return w ? *w : std::numeric_limits<std::size_t>::max();
    };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
  }
  std::vector<DrawingToken> out;
  out.reserve(drawing.placements.size() * 6 + 1);
  for (std::size_t i : order) append_icon(out, drawing.placements[i], spec);
  out.push_back(DrawingToken::end());
  return out;
}

TokenKind pose_kind_at(int position_in_icon) {
  static constexpr TokenKind kinds[] = {TokenKind::icon,  TokenKind::x,        TokenKind::y,
                                        TokenKind::scale, TokenKind::rotation, TokenKind::flip};
  return kinds[position_in_icon];
}

Drawing decode_drawing(const std::vector<DrawingToken>& tokens, const QuantizationSpec& spec,
                       int round_index, const IconLibrary* library) {
  Drawing d;
  d.round_index = round_index;
  int slot = 0;
  IconPlacement current;
  for (std::size_t pos = 0; pos < tokens.size(); ++pos) {
    const DrawingToken& t = tokens[pos];
    if (slot == 0) {
      if (t.kind == TokenKind::end_of_drawing && !d.placements.empty()) {
        if (pos + 1 != tokens.size()) {
          throw DrawingParseError(pos + 1, "end of sequence", "tokens after <eod>");
        }
        return d;
      }
      if (t.kind != TokenKind::icon) {
        throw DrawingParseError(pos, d.placements.empty() ? "icon_name" : "icon_name or end_of_drawing",
                                "got " + to_string(t));
      }
      if (library && !library->contains(t.icon_id)) {
        throw DrawingParseError(pos, "icon_name", "unknown icon '" + t.icon_id + "'");
      }
      current = IconPlacement{};
      current.icon_id = t.icon_id;
      slot = 1;
      continue;
    }
    const TokenKind want = pose_kind_at(slot);
    if (t.kind != want) throw DrawingParseError(pos, std::string(to_string(want)), "got " + to_string(t));
    const int buckets = bucket_count(want, spec);
    if (t.value >= static_cast<std::size_t>(buckets)) {
      throw DrawingParseError(pos, std::string(to_string(want)),
                              "bucket " + std::to_string(t.value) + " out of range");
    }
    switch (want) {
      case TokenKind::x: current.x = dequantize(t.value, buckets, {0, 1}, Transform::linear); break;
      case TokenKind::y: current.y = dequantize(t.value, buckets, {0, 1}, Transform::linear); break;
      case TokenKind::scale: current.scale = dequantize(t.value, buckets, spec.scale_range, Transform::log); break;
      case TokenKind::rotation: current.rotation = dequantize_rotation(t.value, buckets); break;
      case TokenKind::flip: current.flipped = t.value != 0; break;
      default: break;
    }
    if (++slot == 6) {
      d.placements.push_back(current);
      slot = 0;
    }
  }
  const std::string want = slot == 0 ? (d.placements.empty() ? "icon_name" : "end_of_drawing")
                                     : std::string(to_string(pose_kind_at(slot)));
  throw DrawingParseError(tokens.size(), want, "sequence ended early");
}

IconPlacement snap_to_buckets(const IconPlacement& p, const QuantizationSpec& spec) {
  IconPlacement out = p;
  out.x = dequantize(quantize(p.x, spec.x_buckets, {0, 1}, Transform::linear), spec.x_buckets, {0, 1},
                     Transform::linear);
  out.y = dequantize(quantize(p.y, spec.y_buckets, {0, 1}, Transform::linear), spec.y_buckets, {0, 1},
                     Transform::linear);
  out.scale = dequantize(quantize(p.scale, spec.scale_buckets, spec.scale_range, Transform::log),
                         spec.scale_buckets, spec.scale_range, Transform::log);
  out.rotation = dequantize_rotation(quantize_rotation(p.rotation, spec.rotation_buckets), spec.rotation_buckets);
  return out;
}

// ---------------------------------------------------------------------------
// Vocabulary and grammar

DrawingVocab::DrawingVocab(const IconLibrary& library, const QuantizationSpec& spec) : spec_(spec) {
  spec_.validate();
  for (const auto& icon : library.icons()) tokens_.push_back(DrawingToken::icon_token(icon.id));
  for (TokenKind k : {TokenKind::x, TokenKind::y, TokenKind::scale, TokenKind::rotation, TokenKind::flip}) {
    for (int v = 0; v < bucket_count(k, spec_); ++v) {
      tokens_.push_back(DrawingToken::pose(k, static_cast<std::size_t>(v)));
    }
  }
  tokens_.push_back(DrawingToken::end());
  for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], i);
}

std::optional<std::size_t> DrawingVocab::id_of(const DrawingToken& t) const {
  auto it = index_.find(t);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<bool> grammar_mask(const DrawingGrammarState& state, const DrawingVocab& vocab) {
  std::vector<bool> mask(vocab.size(), false);
  if (state.finished) {
    mask[vocab.eod_id()] = true;
    return mask;
  }
  const TokenKind want = pose_kind_at(state.position_in_icon);
  for (std::size_t i = 0; i < vocab.size(); ++i) mask[i] = vocab.token(i).kind == want;
  if (state.position_in_icon == 0 && state.icons_emitted >= 1) mask[vocab.eod_id()] = true;
  return mask;
}

DrawingGrammarState advance(DrawingGrammarState state, const DrawingToken& token) {
  if (state.finished) throw std::invalid_argument("drawing already finished");
  if (state.position_in_icon == 0 && token.kind == TokenKind::end_of_drawing) {
    if (state.icons_emitted == 0) throw std::invalid_argument("empty drawing");
    state.finished = true;
    return state;
  }
  if (token.kind != pose_kind_at(state.position_in_icon)) {
    throw std::invalid_argument("token " + to_string(token) + " not admissible here");
  }
  if (++state.position_in_icon == 6) {
    state.position_in_icon = 0;
    ++state.icons_emitted;
  }
  return state;
}

// ---------------------------------------------------------------------------
// Embedding initialization

namespace {

std::vector<double> mean_embedding(const WordpieceEmbedder& embedder, std::string_view text) {
  const auto pieces = embedder.tokenize(text);
  if (pieces.empty()) throw std::invalid_argument("text '" + std::string(text) + "' has no wordpieces");
  std::vector<double> acc(embedder.dim(), 0.0);
  for (const auto& piece : pieces) {
    const auto e = embedder.embed(piece);
    if (e.size() != acc.size()) throw std::invalid_argument("embedder returned wrong dimension");
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += e[i];
  }
  for (double& v : acc) v /= static_cast<double>(pieces.size());
  return acc;
}

}  // namespace

std::map<std::string, std::vector<double>> init_token_embeddings(const IconLibrary& library,
                                                                 const QuantizationSpec& spec,
                                                                 const WordpieceEmbedder& embedder) {
  std::map<std::string, std::vector<double>> out;
  for (const auto& icon : library.icons()) {
    if (icon.name.empty()) throw std::invalid_argument("icon '" + icon.id + "' has an empty name");
    out[to_string(DrawingToken::icon_token(icon.id))] = mean_embedding(embedder, icon.name);
  }
  for (TokenKind k : {TokenKind::x, TokenKind::y, TokenKind::scale, TokenKind::rotation, TokenKind::flip}) {
    for (int v = 0; v < bucket_count(k, spec); ++v) {
      out[to_string(DrawingToken::pose(k, static_cast<std::size_t>(v)))] =
          mean_embedding(embedder, std::to_string(v + 1));
    }
  }
  return out;
}

}  // namespace iconary::codec
