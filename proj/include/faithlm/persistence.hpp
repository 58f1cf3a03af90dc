#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "faithlm/core.hpp"

namespace faithlm::persistence {

nlohmann::json to_json(const Candidate& candidate);
Candidate candidate_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrajectoryEntry& entry);
TrajectoryEntry entry_from_json(const nlohmann::json& j);

/// A run is stored as JSON lines: one "header" line, one "entry" line per
/// trajectory entry in order, and one "end" line. Keys are sorted, so output
/// is byte-stable.
nlohmann::json header_line(const RunRecord& record);
nlohmann::json end_line(const RunRecord& record);

std::string serialize_run_record(const RunRecord& record);
/// Accepts a record without an end line (an interrupted run) and marks it
/// Termination::BackendFailure.
RunRecord parse_run_record(std::string_view jsonl);

RunRecord load_run_record(const std::filesystem::path& path);

/// Streams one run to `path`. The file must not exist yet (RunExists).
class RunWriter {
 public:
  explicit RunWriter(std::filesystem::path path);

  void start(const RunRecord& record);
  void entry(const TrajectoryEntry& entry);
  void finish(const RunRecord& record);

  const std::filesystem::path& path() const { return path_; }

 private:
  void write_line(const nlohmann::json& line);

  std::filesystem::path path_;
  std::ofstream out_;
};

/// Writes a complete record, refusing to overwrite.
void save_run_record(const std::filesystem::path& path, const RunRecord& record);

/// Writes `content` to a new file, refusing to overwrite (RunExists).
void write_new_file(const std::filesystem::path& path, std::string_view content);

/// Run files (*.jsonl) directly under `dir`, sorted by name.
std::vector<std::filesystem::path> list_run_files(const std::filesystem::path& dir);

std::string utc_timestamp();

/// File-name-safe form of an id: [A-Za-z0-9._-] kept, anything else '_'.
std::string sanitize_id(std::string_view id);

}  // namespace faithlm::persistence
