#include "iconary/server/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "iconary/report.hpp"
#include "iconary/schema.hpp"

namespace iconary::server {

namespace fs = std::filesystem;
using nlohmann::json;

double IngestReport::violation_rate() const {
  return records_seen == 0 ? 0.0 : static_cast<double>(violations.size()) / static_cast<double>(records_seen);
}

json IngestReport::to_json() const {
  json v = json::array();
  for (const auto& x : violations) v.push_back({{"source", x.source}, {"game_id", x.game_id}, {"message", x.message}});
  return {{"files_read", files_read},
          {"records_seen", records_seen},
          {"records_accepted", records_accepted},
          {"unparseable_files", unparseable_files},
          {"violations", v},
          {"violation_rate", violation_rate()},
          {"per_split", per_split},
          {"stats", report::to_json(stats)}};
}

std::string IngestReport::summary() const {
  std::ostringstream out;
  out << fmt::format("files {}  records {}  accepted {}  violations {} ({:.2f}%)\n", files_read, records_seen,
                     records_accepted, violations.size(), violation_rate() * 100.0);
  for (const auto& f : unparseable_files) out << "unparseable: " << f << "\n";
  for (const auto& [split, n] : per_split) out << fmt::format("  {:<10} {}\n", split, n);
  const std::size_t shown = std::min<std::size_t>(violations.size(), 20);
  for (std::size_t i = 0; i < shown; ++i) {
    out << "violation " << violations[i].source << " [" << violations[i].game_id << "]: " << violations[i].message
        << "\n";
  }
  if (violations.size() > shown) out << "... " << violations.size() - shown << " more\n";
  return out.str();
}

namespace {

void check_icons(const GameRecord& r, const IconLibrary& library, std::vector<std::string>& problems) {
  for (std::size_t i = 0; i < r.rounds.size(); ++i) {
    for (const auto& p : r.rounds[i].drawing.placements) {
      if (!library.contains(p.icon_id)) problems.push_back(fmt::format("round {}: unknown icon {}", i, p.icon_id));
    }
  }
}

void ingest_record(const json& raw, const std::string& source, const IngestOptions& options, IngestResult& out) {
  ++out.report.records_seen;
  std::string id;
  if (raw.is_object()) {
    for (const char* key : {"game_id", "id"}) {
      if (raw.contains(key) && id.empty()) id = raw[key].is_string() ? raw[key].get<std::string>() : raw[key].dump();
    }
  }
  try {
    GameRecord r = schema::record_from_json(options.released_layout ? convert_released(raw) : raw);
    auto problems = schema::validate_record(r);
    if (options.library) check_icons(r, *options.library, problems);
    if (!problems.empty()) {
      out.report.violations.push_back({source, r.game_id, fmt::format("{}", fmt::join(problems, "; "))});
      return;
    }
    ++out.report.per_split[std::string(to_string(r.split))];
    out.corpus.push_back(std::move(r));
  } catch (const std::exception& e) {
    out.report.violations.push_back({source, id, e.what()});
  }
}

void ingest_text(const std::string& text, const std::string& source, bool jsonl, const IngestOptions& options,
                 IngestResult& out) {
  if (!jsonl) {
    json doc = json::parse(text);
    if (doc.is_array()) {
      for (std::size_t i = 0; i < doc.size(); ++i) ingest_record(doc[i], fmt::format("{}[{}]", source, i), options, out);
    } else {
      ingest_record(doc, source, options, out);
    }
    return;
  }
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = fmt::format("{}:{}", source, line_no);
    json raw;
    try {
      raw = json::parse(line);
    } catch (const json::parse_error& e) {
      ++out.report.records_seen;
      out.report.violations.push_back({where, "", std::string("unparseable line: ") + e.what()});
      continue;
    }
    ingest_record(raw, where, options, out);
  }
}

void finalize(IngestResult& out, const IngestOptions& options) {
  out.report.records_accepted = out.corpus.size();
  out.report.stats = metrics::dataset_stats(out.corpus);
  if (out.report.records_seen == 0 && !out.report.unparseable_files.empty()) {
    throw IngestError("no records could be read", out.report);
  }
  if (out.report.violation_rate() > options.max_violation_rate) {
    throw IngestError(fmt::format("{:.2f}% of records violate the schema (limit {:.2f}%)",
                                  out.report.violation_rate() * 100.0, options.max_violation_rate * 100.0),
                      out.report);
  }
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

IngestResult ingest_jsonl_text(const std::string& text, const std::string& source, const IngestOptions& options) {
  IngestResult out;
  out.report.files_read = 1;
  ingest_text(text, source, true, options, out);
  finalize(out, options);
  return out;
}

IngestResult ingest_dataset(const fs::path& path, const IngestOptions& options) {
  std::vector<fs::path> files;
  if (fs::is_directory(path)) {
    for (const auto& e : fs::recursive_directory_iterator(path)) {
      const auto ext = e.path().extension();
      if (e.is_regular_file() && (ext == ".jsonl" || ext == ".json")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
  } else if (fs::exists(path)) {
    files.push_back(path);
  } else {
    throw IngestError("no such dataset path: " + path.string(), IngestReport{});
  }

  IngestResult out;
  for (const auto& f : files) {
    try {
      const std::string text = read_file(f);
      ingest_text(text, f.string(), f.extension() != ".json", options, out);
      ++out.report.files_read;
    } catch (const std::exception& e) {
      out.report.unparseable_files.push_back(f.string() + ": " + e.what());
    }
  }
  finalize(out, options);
  return out;
}

std::string export_jsonl(const std::vector<GameRecord>& corpus) {
  std::string out;
  for (const auto& r : corpus) {
    out += schema::dump_record(r);
    out += '\n';
  }
  return out;
}

void write_jsonl(const fs::path& path, const std::vector<GameRecord>& corpus) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << export_jsonl(corpus);
}

// ---------------------------------------------------------------------------
// Released-layout converter

namespace {

const json* first_of(const json& j, std::initializer_list<const char*> keys) {
  for (const char* k : keys) {
    auto it = j.find(k);
    if (it != j.end() && !it->is_null()) return &*it;
  }
  return nullptr;
}

std::string split_alias(std::string s) {
  std::replace(s.begin(), s.end(), '-', '_');
  static const std::map<std::string, std::string> aliases{
      {"ind_dev", "ind_valid"}, {"ood_dev", "ood_valid"}, {"in_domain_dev", "ind_valid"},
      {"in_domain_test", "ind_test"}, {"out_of_domain_dev", "ood_valid"}, {"out_of_domain_test", "ood_test"}};
  auto it = aliases.find(s);
  return it == aliases.end() ? s : it->second;
}

}  // namespace

json convert_released(const json& j) {
  if (!j.is_object()) throw schema::SchemaError("$", "expected an object");
  json out;
  out["schema_version"] = schema::kSchemaVersion;
  const json* id = first_of(j, {"game_id", "id"});
  if (!id) throw schema::SchemaError("$.id", "missing field");
  out["game_id"] = id->is_string() ? id->get<std::string>() : id->dump();
  const json* split = first_of(j, {"split"});
  out["split"] = split_alias(split ? split->get<std::string>() : "train");

  json words = json::array();
  if (const json* gp = first_of(j, {"game_phrase", "phrase_words"}); gp && gp->is_array()) {
    for (const auto& w : *gp) {
      if (w.is_string()) {
        const std::string t = w.get<std::string>();
        words.push_back({{"text", t}, {"stopword", StopwordList::builtin().contains(normalize_word(t))}});
      } else {
        words.push_back({{"text", w.value("word", w.value("text", std::string()))},
                         {"stopword", w.value("is_stopword", w.value("stopword", false))},
                         {"oov", w.value("is_oov", w.value("oov", false))}});
      }
    }
  } else if (const json* p = first_of(j, {"phrase"}); p && p->is_string()) {
    for (const auto& t : split_words(p->get<std::string>())) {
      words.push_back({{"text", t}, {"stopword", StopwordList::builtin().contains(normalize_word(t))}});
    }
  } else {
    throw schema::SchemaError("$.phrase", "missing field");
  }
  out["phrase"] = words;

  json rounds = json::array();
  const json* states = first_of(j, {"rounds", "states", "game_states", "drawings"});
  if (!states || !states->is_array()) throw schema::SchemaError("$.rounds", "missing field");
  for (std::size_t i = 0; i < states->size(); ++i) {
    const json& s = (*states)[i];
    const json* icons = first_of(s, {"drawing", "icons"});
    if (icons && icons->is_object()) icons = first_of(*icons, {"icons", "drawing"});
    json drawing{{"round_index", i}, {"icons", json::array()}};
    if (icons && icons->is_array()) {
      for (const auto& ic : *icons) {
        const json* name = first_of(ic, {"icon", "icon_id", "icon_name", "name"});
        drawing["icons"].push_back({{"icon", name ? name->get<std::string>() : std::string()},
                                    {"x", ic.value("x", 0.5)},
                                    {"y", ic.value("y", 0.5)},
                                    {"scale", ic.value("scale", 1.0)},
                                    {"rotation", ic.value("rotation", 0.0)},
                                    {"flipped", ic.value("mirror", ic.value("flipped", false))}});
      }
    }
    json guesses = json::array();
    if (const json* gs = first_of(s, {"guesses"}); gs && gs->is_array()) {
      for (const auto& g : *gs) {
        if (g.is_array()) guesses.push_back({{"words", g}});
        else if (g.is_string()) guesses.push_back({{"words", split_words(g.get<std::string>())}});
        else guesses.push_back({{"words", g.value("words", json::array())}});
      }
    }
    rounds.push_back({{"drawing", drawing}, {"guesses", guesses}});
  }
  out["rounds"] = rounds;

  if (const json* o = first_of(j, {"outcome"}); o && o->is_string()) {
    out["outcome"] = *o;
  } else if (const json* w = first_of(j, {"won", "success"}); w && w->is_boolean()) {
    out["outcome"] = w->get<bool>() ? "won" : "lost_timeout";
  } else {
    out["outcome"] = "lost_timeout";
  }
  if (const json* e = first_of(j, {"elapsed_seconds", "duration"}); e && e->is_number()) out["elapsed_seconds"] = *e;
  return out;
}

// ---------------------------------------------------------------------------
// Store

fs::path GameStore::append(const GameRecord& record, const std::string& date) const {
  if (date.size() != 10 || date[4] != '-' || date[7] != '-') throw std::invalid_argument("date must be YYYY-MM-DD");
  if (record.game_id.empty() || record.game_id.find_first_of("/\\") != std::string::npos || record.game_id[0] == '.') {
    throw std::invalid_argument("game id is not usable as a file name");
  }
  const fs::path dir = root_ / date.substr(0, 4) / date.substr(5, 2) / date.substr(8, 2);
  fs::create_directories(dir);
  const fs::path file = dir / (record.game_id + ".json");
  if (fs::exists(file)) throw std::runtime_error("game already stored: " + file.string());
  const fs::path tmp = dir / ("." + record.game_id + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << schema::dump_record(record) << '\n';
  }
  fs::rename(tmp, file);
  return file;
}

IngestResult GameStore::load(const IngestOptions& options) const {
  if (!fs::exists(root_)) {
    IngestResult empty;
    empty.report.stats = metrics::dataset_stats({});
    return empty;
  }
  return ingest_dataset(root_, options);
}

}  // namespace iconary::server
