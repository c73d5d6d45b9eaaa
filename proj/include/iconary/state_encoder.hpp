#pragma once

#include <string>
#include <vector>

#include "iconary/codec.hpp"
#include "iconary/core.hpp"

// Text renderings of game state for text-to-text agents.
namespace iconary::encoder {

enum class SizeModifier { none, huge, large, small, tiny };
std::string_view to_string(SizeModifier m);

struct IconDescription {
  std::size_t count = 1;
  SizeModifier size = SizeModifier::none;
  bool rotated = false;
  bool flipped = false;
  std::string base;  // icon name or "<dir> arrow"
  double anchor_x = 0.0;
  std::size_t first_index = 0;  // smallest creation index in the group

  // Text without the count prefix; the grouping key.
  std::string key() const;
  std::string text() const;
};

// Size band of scale/median: >=2.5 huge, [1.5,2.5) large, (0.4,2/3] small,
// <=0.4 tiny.
SizeModifier size_modifier(double ratio_to_median);

// Nearest cardinal direction of an arrow whose default art points right.
// Exact diagonals resolve clockwise. A horizontal flip reverses the arrow
// before rotation.
std::string arrow_direction(double rotation_degrees, bool flipped);

std::vector<IconDescription> describe_icons(const Drawing& drawing, const IconLibrary& library,
                                            const codec::QuantizationSpec& spec = {});
// Groups joined with ", " in left-to-right order.
std::string describe_drawing(const Drawing& drawing, const IconLibrary& library,
                             const codec::QuantizationSpec& spec = {});

enum class PhraseStyle { underscore, fill_in_the_blank };

struct SentinelFormat {
  std::string prefix = "<extra_id_";
  std::string suffix = ">";
  std::string operator()(std::size_t n) const { return prefix + std::to_string(n) + suffix; }
};

std::string render_phrase_slots(const MaskedPhrase& phrase, PhraseStyle style,
                                const SentinelFormat& sentinel = {});

// "<drawing description> phrase: <slots>". Only the latest drawing is encoded.
// Throws std::invalid_argument when no drawing exists yet.
std::string render_guesser_input(const GuesserView& view, const IconLibrary& library,
                                 PhraseStyle style, const SentinelFormat& sentinel = {},
                                 const codec::QuantizationSpec& spec = {});

// Guessed words wrapped in asterisks.
std::string render_drawer_input(const Phrase& phrase);

// Training target for the fill-in-the-blank style: each hidden run prefixed by
// its sentinel, closed by one terminal sentinel.
std::string fill_in_the_blank_target(const Phrase& phrase, const SentinelFormat& sentinel = {});

}  // namespace iconary::encoder
