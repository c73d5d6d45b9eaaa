#include "iconary/state_encoder.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace iconary::encoder {

std::string_view to_string(SizeModifier m) {
  switch (m) {
    case SizeModifier::none: return "";
    case SizeModifier::huge: return "huge";
    case SizeModifier::large: return "large";
    case SizeModifier::small: return "small";
    case SizeModifier::tiny: return "tiny";
  }
  return "";
}

std::string IconDescription::key() const {
  std::string out;
  auto add = [&](std::string_view s) {
    if (s.empty()) return;
    if (!out.empty()) out += ' ';
    out += s;
  };
  add(to_string(size));
  if (rotated) add("rotated");
  if (flipped) add("flipped");
  add(base);
  return out;
}

std::string IconDescription::text() const {
  return count > 1 ? std::to_string(count) + " " + key() : key();
}

SizeModifier size_modifier(double r) {
  if (r >= 2.5) return SizeModifier::huge;
  if (r >= 1.5) return SizeModifier::large;
  if (r <= 0.4) return SizeModifier::tiny;
  if (r <= 2.0 / 3.0) return SizeModifier::small;
  return SizeModifier::none;
}

std::string arrow_direction(double rotation_degrees, bool flipped) {
  double deg = std::fmod(rotation_degrees + (flipped ? 180.0 : 0.0), 360.0);
  if (deg < 0.0) deg += 360.0;
  // Quadrant k covers [90k - 45, 90k + 45); the lower edge belongs to k, so
  // 45 maps to 90 (clockwise).
  const int k = static_cast<int>(std::floor((deg + 45.0) / 90.0)) % 4;
  static constexpr const char* kNames[] = {"right", "down", "left", "up"};
  return kNames[k];
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<IconDescription> describe_icons(const Drawing& drawing, const IconLibrary& library,
                                            const codec::QuantizationSpec& spec) {
  if (drawing.placements.empty()) throw std::invalid_argument("cannot describe an empty drawing");
  std::vector<double> scales;
  for (const auto& p : drawing.placements) scales.push_back(p.scale);
  const double med = median(scales);
  const bool sized = drawing.placements.size() > 1;

  std::vector<IconDescription> groups;
  std::map<std::string, std::size_t> by_key;
  for (std::size_t i = 0; i < drawing.placements.size(); ++i) {
    const IconPlacement& p = drawing.placements[i];
    const Icon& icon = library.at(p.icon_id);
    IconDescription d;
    d.size = sized ? size_modifier(p.scale / med) : SizeModifier::none;
    if (library.is_arrow(p.icon_id)) {
      d.base = arrow_direction(p.rotation, p.flipped) + " arrow";
    } else {
      d.base = icon.name;
      d.rotated = codec::quantize_rotation(p.rotation, spec.rotation_buckets) != 0;
      d.flipped = p.flipped;
    }
    d.anchor_x = p.x;
    d.first_index = i;
    auto [it, inserted] = by_key.emplace(d.key(), groups.size());
    if (inserted) {
      groups.push_back(std::move(d));
    } else {
      IconDescription& g = groups[it->second];
      ++g.count;
      g.anchor_x = std::min(g.anchor_x, p.x);
    }
  }
  std::sort(groups.begin(), groups.end(), [](const IconDescription& a, const IconDescription& b) {
    if (a.anchor_x != b.anchor_x) return a.anchor_x < b.anchor_x;
    return a.first_index < b.first_index;
  });
  return groups;
}

std::string describe_drawing(const Drawing& drawing, const IconLibrary& library,
                             const codec::QuantizationSpec& spec) {
  std::vector<std::string> parts;
  for (const auto& g : describe_icons(drawing, library, spec)) parts.push_back(g.text());
  return join_words(parts, ", ");
}

std::string render_phrase_slots(const MaskedPhrase& phrase, PhraseStyle style, const SentinelFormat& sentinel) {
  std::vector<std::string> slots;
  std::size_t next_sentinel = 0;
  bool in_run = false;
  for (const auto& w : phrase.words) {
    if (w.text) {
      slots.push_back(*w.text);
      in_run = false;
    } else if (style == PhraseStyle::underscore) {
      slots.emplace_back("_");
    } else if (!in_run) {
      slots.push_back(sentinel(next_sentinel++));
      in_run = true;
    }
  }
  return join_words(slots);
}

std::string render_guesser_input(const GuesserView& view, const IconLibrary& library, PhraseStyle style,
                                 const SentinelFormat& sentinel, const codec::QuantizationSpec& spec) {
  const Drawing* latest = view.latest_drawing();
  if (!latest) throw std::invalid_argument("no drawing to encode yet");
  return describe_drawing(*latest, library, spec) + " phrase: " + render_phrase_slots(view.phrase, style, sentinel);
}

std::string render_drawer_input(const Phrase& phrase) {
  std::vector<std::string> out;
  for (const auto& w : phrase.words()) out.push_back(w.guessed ? "*" + w.text + "*" : w.text);
  return join_words(out);
}

std::string fill_in_the_blank_target(const Phrase& phrase, const SentinelFormat& sentinel) {
  std::vector<std::string> out;
  std::size_t next = 0;
  bool in_run = false;
  for (std::size_t i = 0; i < phrase.size(); ++i) {
    if (phrase.revealed(i)) {
      in_run = false;
      continue;
    }
    if (!in_run) out.push_back(sentinel(next++));
    in_run = true;
    out.push_back(phrase[i].text);
  }
  out.push_back(sentinel(next));
  return join_words(out);
}

}  // namespace iconary::encoder
