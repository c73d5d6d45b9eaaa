#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "iconary/core.hpp"
#include "iconary/metrics.hpp"

// Dataset ingestion, export and on-disk persistence of finished games.
namespace iconary::server {

struct Violation {
  std::string source;  // file, with ":line" for JSONL
  std::string game_id;
  std::string message;
};

struct IngestReport {
  std::size_t files_read = 0;
  std::size_t records_seen = 0;
  std::size_t records_accepted = 0;
  std::vector<std::string> unparseable_files;
  std::vector<Violation> violations;
  std::map<std::string, std::size_t> per_split;
  metrics::DatasetStats stats;  // includes the win-definition cross-check

  double violation_rate() const;
  nlohmann::json to_json() const;
  std::string summary() const;
};

struct IngestOptions {
  double max_violation_rate = 0.05;
  const IconLibrary* library = nullptr;  // when set, unknown icons are violations
  bool released_layout = false;          // run convert_released on every record
};

struct IngestResult {
  std::vector<GameRecord> corpus;
  IngestReport report;
};

class IngestError : public std::runtime_error {
 public:
  IngestError(const std::string& what, IngestReport report)
      : std::runtime_error(what), report_(std::move(report)) {}
  const IngestReport& report() const { return report_; }

 private:
  IngestReport report_;
};

// `path` is a .jsonl/.json file or a directory searched recursively for
// them. Throws IngestError when more than max_violation_rate of the records
// are rejected, or when nothing could be read.
IngestResult ingest_dataset(const std::filesystem::path& path, const IngestOptions& options = {});

// Records from an in-memory JSONL document.
IngestResult ingest_jsonl_text(const std::string& text, const std::string& source, const IngestOptions& options = {});

// One canonical record per line, in corpus order.
std::string export_jsonl(const std::vector<GameRecord>& corpus);
void write_jsonl(const std::filesystem::path& path, const std::vector<GameRecord>& corpus);

// Best-effort mapping of a record in the released dataset's layout to the
// canonical schema (see docs/game-schema.md for the assumed field names).
nlohmann::json convert_released(const nlohmann::json& j);

// Append-only store: one file per game under <root>/YYYY/MM/DD/<id>.json.
class GameStore {
 public:
  explicit GameStore(std::filesystem::path root) : root_(std::move(root)) {}

  // `date` is "YYYY-MM-DD". Throws if the game file already exists.
  std::filesystem::path append(const GameRecord& record, const std::string& date) const;
  IngestResult load(const IngestOptions& options = {}) const;
  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
};

}  // namespace iconary::server
