#include "iconary/alignment.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace iconary::agents {

static_assert(std::endian::native == std::endian::little, ".align payloads are written in host order");

namespace {

// Portable draws so that a seed gives the same model with any standard library.
double unit_real(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

AlignmentModel::AlignmentModel(std::size_t dim, std::vector<std::string> words, std::vector<std::string> icons,
                               std::vector<double> word_embeddings, std::vector<double> icon_embeddings)
    : dim_(dim),
      words_(std::move(words)),
      icons_(std::move(icons)),
      word_emb_(std::move(word_embeddings)),
      icon_emb_(std::move(icon_embeddings)) {
  if (dim_ == 0) throw std::invalid_argument("embedding dimension must be positive");
  if (word_emb_.size() != words_.size() * dim_ || icon_emb_.size() != icons_.size() * dim_) {
    throw std::invalid_argument("embedding table sizes do not match vocabularies");
  }
  for (double v : word_emb_) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite word embedding");
  }
  for (double v : icon_emb_) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite icon embedding");
  }
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (!word_index_.emplace(words_[i], i).second) throw std::invalid_argument("duplicate word " + words_[i]);
  }
  for (std::size_t i = 0; i < icons_.size(); ++i) {
    if (!icon_index_.emplace(icons_[i], i).second) throw std::invalid_argument("duplicate icon " + icons_[i]);
  }
}

std::optional<std::size_t> AlignmentModel::word_index(std::string_view word) const {
  auto it = word_index_.find(normalize_word(word));
  if (it == word_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> AlignmentModel::icon_index(std::string_view icon_id) const {
  auto it = icon_index_.find(icon_id);
  if (it == icon_index_.end()) return std::nullopt;
  return it->second;
}

std::span<const double> AlignmentModel::word_vector(std::size_t i) const {
  return {word_emb_.data() + i * dim_, dim_};
}

std::span<const double> AlignmentModel::icon_vector(std::size_t i) const {
  return {icon_emb_.data() + i * dim_, dim_};
}

std::optional<double> AlignmentModel::similarity(std::string_view icon_id, std::string_view word) const {
  auto ic = icon_index(icon_id);
  auto wd = word_index(word);
  if (!ic || !wd) return std::nullopt;
  return dot(icon_vector(*ic), word_vector(*wd));
}

std::optional<double> AlignmentModel::word_cosine(std::string_view a, std::string_view b) const {
  auto ia = word_index(a);
  auto ib = word_index(b);
  if (!ia || !ib) return std::nullopt;
  const auto va = word_vector(*ia), vb = word_vector(*ib);
  const double na = std::sqrt(dot(va, va)), nb = std::sqrt(dot(vb, vb));
  if (na == 0.0 || nb == 0.0) return std::nullopt;
  return dot(va, vb) / (na * nb);
}

std::vector<std::pair<std::string, double>> AlignmentModel::top_words(std::string_view icon_id, std::size_t k) const {
  std::vector<std::pair<std::string, double>> out;
  auto ic = icon_index(icon_id);
  if (!ic) return out;
  for (std::size_t w = 0; w < words_.size(); ++w) out.emplace_back(words_[w], dot(icon_vector(*ic), word_vector(w)));
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (out.size() > k) out.resize(k);
  return out;
}

std::vector<std::pair<std::string, double>> AlignmentModel::top_icons(std::string_view word, std::size_t k) const {
  std::vector<std::pair<std::string, double>> out;
  auto wd = word_index(word);
  if (!wd) return out;
  for (std::size_t i = 0; i < icons_.size(); ++i) out.emplace_back(icons_[i], dot(icon_vector(i), word_vector(*wd)));
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (out.size() > k) out.resize(k);
  return out;
}

std::string AlignmentModel::serialize() const {
  nlohmann::json header{{"format", "iconary-align"},
                        {"schema_version", kAlignFormatVersion},
                        {"dim", dim_},
                        {"dtype", "f64le"},
                        {"words", words_},
                        {"icons", icons_}};
  std::string out = header.dump();
  out += '\n';
  const std::size_t header_size = out.size();
  out.resize(header_size + (word_emb_.size() + icon_emb_.size()) * sizeof(double));
  std::memcpy(out.data() + header_size, word_emb_.data(), word_emb_.size() * sizeof(double));
  std::memcpy(out.data() + header_size + word_emb_.size() * sizeof(double), icon_emb_.data(),
              icon_emb_.size() * sizeof(double));
  return out;
}

AlignmentModel AlignmentModel::deserialize(std::string_view bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string_view::npos) throw std::runtime_error("alignment file has no header line");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(0, nl));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("bad alignment header: ") + e.what());
  }
  if (header.value("format", "") != "iconary-align") throw std::runtime_error("not an alignment file");
  const int version = header.value("schema_version", 0);
  if (version != kAlignFormatVersion) {
    throw std::runtime_error("unsupported alignment schema version " + std::to_string(version));
  }
  const auto dim = header.at("dim").get<std::size_t>();
  auto words = header.at("words").get<std::vector<std::string>>();
  auto icons = header.at("icons").get<std::vector<std::string>>();
  const std::string_view payload = bytes.substr(nl + 1);
  const std::size_t nw = words.size() * dim, ni = icons.size() * dim;
  if (payload.size() != (nw + ni) * sizeof(double)) throw std::runtime_error("alignment payload size mismatch");
  std::vector<double> we(nw), ie(ni);
  std::memcpy(we.data(), payload.data(), nw * sizeof(double));
  std::memcpy(ie.data(), payload.data() + nw * sizeof(double), ni * sizeof(double));
  return AlignmentModel(dim, std::move(words), std::move(icons), std::move(we), std::move(ie));
}

void AlignmentModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  const std::string bytes = serialize();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

AlignmentModel AlignmentModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return deserialize(buf.str());
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct Example {
  std::vector<std::size_t> icons;
  std::vector<std::size_t> words;
  std::size_t phrase = 0;
};

void mean_vector(const std::vector<double>& table, const std::vector<std::size_t>& ids, std::size_t dim,
                 std::vector<double>& out) {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t id : ids) {
    for (std::size_t k = 0; k < dim; ++k) out[k] += table[id * dim + k];
  }
  for (double& v : out) v /= static_cast<double>(ids.size());
}

}  // namespace

AlignmentModel train_alignment(const std::vector<GameRecord>& corpus, const AlignmentOptions& options,
                               TrainingLog* log) {
  if (corpus.empty()) throw std::invalid_argument("cannot train an alignment on an empty corpus");
  if (options.dim == 0) throw std::invalid_argument("embedding dimension must be positive");

  std::set<std::string> word_set, icon_set;
  for (const auto& g : corpus) {
    for (const auto& w : g.phrase.words()) {
      if (!w.is_stopword) word_set.insert(normalize_word(w.text));
    }
    for (const auto& r : g.rounds) {
      for (const auto& p : r.drawing.placements) icon_set.insert(p.icon_id);
    }
  }
  std::vector<std::string> words(word_set.begin(), word_set.end());
  std::vector<std::string> icons(icon_set.begin(), icon_set.end());
  auto index_of = [](const std::vector<std::string>& v, const std::string& s) {
    return static_cast<std::size_t>(std::lower_bound(v.begin(), v.end(), s) - v.begin());
  };

  // Distinct phrases serve as the negative pool.
  std::map<std::string, std::size_t> phrase_ids;
  std::vector<std::vector<std::size_t>> phrase_words;
  std::vector<Example> examples;
  for (const auto& g : corpus) {
    std::vector<std::size_t> ws;
    for (const auto& w : g.phrase.words()) {
      if (!w.is_stopword) ws.push_back(index_of(words, normalize_word(w.text)));
    }
    if (ws.empty()) continue;
    auto [it, inserted] = phrase_ids.emplace(g.phrase.text(), phrase_words.size());
    if (inserted) phrase_words.push_back(ws);
    for (const auto& r : g.rounds) {
      Example ex;
      for (const auto& p : r.drawing.placements) ex.icons.push_back(index_of(icons, p.icon_id));
      if (ex.icons.empty()) continue;
      ex.words = ws;
      ex.phrase = it->second;
      examples.push_back(std::move(ex));
    }
  }
  if (examples.empty()) throw std::invalid_argument("corpus has no drawing/phrase pairs");

  const std::size_t d = options.dim;
  std::mt19937_64 rng(options.seed);
  std::vector<double> we(words.size() * d), ie(icons.size() * d);
  for (double& v : we) v = (2.0 * unit_real(rng) - 1.0) * options.init_scale;
  for (double& v : ie) v = (2.0 * unit_real(rng) - 1.0) * options.init_scale;

  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> icon_mean(d), pos_mean(d), neg_mean(d), grad_icon(d);

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    double loss_sum = 0.0;
    std::size_t terms = 0;
    for (std::size_t idx : order) {
      const Example& ex = examples[idx];
      for (std::size_t n = 0; n < options.negatives_per_positive; ++n) {
        if (phrase_words.size() < 2) break;
        std::size_t neg = uniform_index(rng, phrase_words.size() - 1);
        if (neg >= ex.phrase) ++neg;
        const auto& neg_words = phrase_words[neg];

        mean_vector(ie, ex.icons, d, icon_mean);
        mean_vector(we, ex.words, d, pos_mean);
        mean_vector(we, neg_words, d, neg_mean);
        const double s_pos = dot(icon_mean, pos_mean);
        const double s_neg = dot(icon_mean, neg_mean);
        const double hinge = options.margin - s_pos + s_neg;
        ++terms;
        if (hinge <= 0.0) continue;
        loss_sum += hinge;

        const double lr = options.learning_rate;
        for (std::size_t k = 0; k < d; ++k) grad_icon[k] = pos_mean[k] - neg_mean[k];
        for (std::size_t id : ex.icons) {
          for (std::size_t k = 0; k < d; ++k) ie[id * d + k] += lr * grad_icon[k] / static_cast<double>(ex.icons.size());
        }
        for (std::size_t id : ex.words) {
          for (std::size_t k = 0; k < d; ++k) we[id * d + k] += lr * icon_mean[k] / static_cast<double>(ex.words.size());
        }
        for (std::size_t id : neg_words) {
          for (std::size_t k = 0; k < d; ++k) we[id * d + k] -= lr * icon_mean[k] / static_cast<double>(neg_words.size());
        }
      }
    }
    if (log) log->epoch_loss.push_back(terms ? loss_sum / static_cast<double>(terms) : 0.0);
  }
  return AlignmentModel(d, std::move(words), std::move(icons), std::move(we), std::move(ie));
}

// ---------------------------------------------------------------------------
// Game alignment and augmentation

GameAlignment align_game(const AlignmentModel& model, const GameRecord& record) {
  GameAlignment out;
  for (const auto& round : record.rounds) {
    std::vector<std::optional<std::size_t>> row;
    for (const auto& p : round.drawing.placements) {
      std::optional<std::size_t> best;
      double best_sim = 0.0;
      for (std::size_t w = 0; w < record.phrase.size(); ++w) {
        if (record.phrase[w].is_stopword) continue;
        auto sim = model.similarity(p.icon_id, record.phrase[w].text);
        if (!sim) continue;
        if (!best || *sim > best_sim) {
          best = w;
          best_sim = *sim;
        }
      }
      row.push_back(best);
    }
    out.word_of_placement.push_back(std::move(row));
  }
  return out;
}

namespace {

GameRecord remove_positions(const GameRecord& record, const GameAlignment& alignment,
                            const std::vector<std::size_t>& positions, std::size_t aligned_word,
                            std::size_t* removed_icons) {
  auto removed = [&](std::size_t i) { return std::find(positions.begin(), positions.end(), i) != positions.end(); };
  GameRecord out = record;
  std::vector<PhraseWord> words;
  for (std::size_t i = 0; i < record.phrase.size(); ++i) {
    if (!removed(i)) words.push_back(record.phrase[i]);
  }
  out.phrase = Phrase(std::move(words));
  *removed_icons = 0;
  for (std::size_t r = 0; r < out.rounds.size(); ++r) {
    Round& round = out.rounds[r];
    std::vector<IconPlacement> kept;
    for (std::size_t p = 0; p < round.drawing.placements.size(); ++p) {
      const auto& a = alignment.word_of_placement[r][p];
      if (a && *a == aligned_word) {
        ++*removed_icons;
      } else {
        kept.push_back(round.drawing.placements[p]);
      }
    }
    round.drawing.placements = std::move(kept);
    for (Guess& g : round.guesses) {
      Guess ng;
      for (std::size_t i = 0; i < g.words.size(); ++i) {
        if (removed(i)) continue;
        ng.words.push_back(g.words[i]);
        if (g.evaluated()) ng.correctness.push_back(g.correctness[i]);
      }
      g = std::move(ng);
    }
  }
  out.outcome = game_outcome(out).won ? Outcome::won : Outcome::lost_timeout;
  out.game_id = record.game_id + "#aug";
  for (std::size_t i : positions) out.game_id += "-" + std::to_string(i);
  return out;
}

}  // namespace

AugmentResult augment(const GameRecord& record, const GameAlignment& alignment, std::mt19937_64& rng) {
  if (alignment.word_of_placement.size() != record.rounds.size()) {
    throw std::invalid_argument("alignment does not match the record");
  }
  struct Candidate {
    std::vector<std::size_t> positions;
    std::size_t word;
  };
  std::vector<Candidate> candidates;
  const Phrase& phrase = record.phrase;
  for (std::size_t w = 0; w < phrase.size(); ++w) {
    if (phrase[w].is_stopword) continue;
    if (phrase.content_count() < 2) break;
    bool drawings_survive = true;
    for (std::size_t r = 0; r < record.rounds.size() && drawings_survive; ++r) {
      const auto& row = alignment.word_of_placement[r];
      drawings_survive = std::any_of(row.begin(), row.end(), [&](const auto& a) { return !a || *a != w; });
    }
    if (!drawings_survive) continue;
    candidates.push_back({{w}, w});
    std::size_t start = w;
    while (start > 0 && phrase[start - 1].is_stopword) --start;
    if (start < w) {
      std::vector<std::size_t> span;
      for (std::size_t i = start; i <= w; ++i) span.push_back(i);
      candidates.push_back({span, w});
    }
  }
  AugmentResult out;
  if (candidates.empty()) {
    out.record = record;
    return out;
  }
  const Candidate& c = candidates[static_cast<std::size_t>(rng() % candidates.size())];
  out.record = remove_positions(record, alignment, c.positions, c.word, &out.removed_icons);
  out.removed_positions = c.positions;
  out.augmented = true;
  return out;
}

}  // namespace iconary::agents
