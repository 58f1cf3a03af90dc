#include "faithlm/persistence.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <sstream>

#include "faithlm/data.hpp"

namespace faithlm::persistence {

namespace {

constexpr int kFormatVersion = 1;

Error malformed(const std::string& what) {
  return Error(ErrorCode::MalformedLine, "run record: " + what);
}

}  // namespace

nlohmann::json to_json(const Candidate& c) {
  return {{"kind", std::string(to_string(c.kind))},
          {"text", c.text},
          {"step", c.step},
          {"parent_run", c.parent_run}};
}

Candidate candidate_from_json(const nlohmann::json& j) {
  Candidate c;
  c.kind = candidate_kind_from_string(j.at("kind").get<std::string>());
  c.text = j.at("text").get<std::string>();
  c.step = j.at("step").get<int>();
  c.parent_run = j.value("parent_run", std::string());
  return c;
}

nlohmann::json to_json(const TrajectoryEntry& e) {
  nlohmann::json j = {{"type", "entry"}, {"candidate", to_json(e.candidate)}, {"score", e.score}};
  if (e.explanation) {
    j["explanation"] = {{"hint", e.explanation->hint},
                        {"intervened_answer", e.explanation->intervened_answer},
                        {"flipped", e.explanation->flipped},
                        {"intervened_parse_failure", e.explanation->intervened_parse_failure}};
  }
  if (e.holdout) {
    nlohmann::json scores = nlohmann::json::array();
    for (const auto& s : e.holdout->instance_scores) {
      scores.push_back(s ? nlohmann::json(*s) : nlohmann::json(nullptr));
    }
    j["holdout"] = {{"instance_ids", e.holdout->instance_ids},
                    {"instance_scores", scores},
                    {"excluded", e.holdout->excluded}};
  }
  return j;
}

TrajectoryEntry entry_from_json(const nlohmann::json& j) {
  TrajectoryEntry e;
  e.candidate = candidate_from_json(j.at("candidate"));
  e.score = j.at("score").get<double>();
  if (j.contains("explanation")) {
    const auto& x = j.at("explanation");
    e.explanation = ExplanationDetail{x.at("hint").get<std::string>(),
                                      x.at("intervened_answer").get<std::string>(),
                                      x.at("flipped").get<bool>(),
                                      x.value("intervened_parse_failure", false)};
  }
  if (j.contains("holdout")) {
    const auto& h = j.at("holdout");
    HoldoutDetail d;
    d.instance_ids = h.at("instance_ids").get<std::vector<std::string>>();
    for (const auto& s : h.at("instance_scores")) {
      d.instance_scores.push_back(s.is_null() ? std::nullopt
                                              : std::optional<double>(s.get<double>()));
    }
    d.excluded = h.at("excluded").get<int>();
    e.holdout = std::move(d);
  }
  return e;
}

nlohmann::json header_line(const RunRecord& r) {
  nlohmann::json j = {{"type", "header"},
                      {"format_version", kFormatVersion},
                      {"run_id", r.run_id},
                      {"kind", std::string(to_string(r.kind))},
                      {"config", r.config_snapshot},
                      {"rng_seed", r.rng_seed},
                      {"started_at", r.started_at}};
  if (r.instance) j["instance"] = data::instance_to_json(*r.instance);
  return j;
}

nlohmann::json end_line(const RunRecord& r) {
  return {{"type", "end"},
          {"termination", std::string(to_string(r.termination))},
          {"selected", r.selected ? nlohmann::json(*r.selected) : nlohmann::json(nullptr)},
          {"repeated_candidates", r.repeated_candidates},
          {"failure", r.failure}};
}

std::string serialize_run_record(const RunRecord& record) {
  std::string out = header_line(record).dump() + '\n';
  for (const auto& e : record.entries) out += to_json(e).dump() + '\n';
  out += end_line(record).dump() + '\n';
  return out;
}

RunRecord parse_run_record(std::string_view jsonl) {
  RunRecord r;
  bool have_header = false;
  bool have_end = false;
  std::istringstream in{std::string(jsonl)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::is_blank(line)) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw malformed("line " + std::to_string(line_no) + " is not a JSON object");
    }
    try {
      const auto type = j.at("type").get<std::string>();
      if (have_end) throw malformed("content after the end line");
      if (type == "header") {
        if (have_header) throw malformed("second header at line " + std::to_string(line_no));
        have_header = true;
        r.run_id = j.at("run_id").get<std::string>();
        r.kind = run_kind_from_string(j.at("kind").get<std::string>());
        r.config_snapshot = j.at("config");
        r.rng_seed = j.at("rng_seed").get<std::uint64_t>();
        r.started_at = j.value("started_at", std::string());
        if (j.contains("instance")) r.instance = data::instance_from_json(j.at("instance"));
      } else if (!have_header) {
        throw malformed("missing header line");
      } else if (type == "entry") {
        r.entries.push_back(entry_from_json(j));
      } else if (type == "end") {
        have_end = true;
        r.termination = termination_from_string(j.at("termination").get<std::string>());
        if (!j.at("selected").is_null()) r.selected = j.at("selected").get<std::size_t>();
        r.repeated_candidates = j.value("repeated_candidates", 0);
        r.failure = j.value("failure", std::string());
      } else {
        throw malformed("unknown line type '" + type + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw malformed("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) throw malformed("missing header line");
  if (!have_end) {
    r.termination = Termination::BackendFailure;
    r.failure = "run record has no end line";
    r.selected = select_best(r.entries);
  }
  return r;
}

RunRecord load_run_record(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open run record '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_record(ss.str());
}

RunWriter::RunWriter(std::filesystem::path path) : path_(std::move(path)) {
  if (std::filesystem::exists(path_)) {
    throw Error(ErrorCode::RunExists, "'" + path_.string() + "' already exists");
  }
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  out_.open(path_, std::ios::binary);
  if (!out_) throw Error(ErrorCode::Io, "cannot create '" + path_.string() + "'");
}

void RunWriter::write_line(const nlohmann::json& line) {
  out_ << line.dump() << '\n';
  out_.flush();
  if (!out_) throw Error(ErrorCode::Io, "failed writing '" + path_.string() + "'");
}

void RunWriter::start(const RunRecord& record) { write_line(header_line(record)); }
void RunWriter::entry(const TrajectoryEntry& entry) { write_line(to_json(entry)); }
void RunWriter::finish(const RunRecord& record) { write_line(end_line(record)); }

void write_new_file(const std::filesystem::path& path, std::string_view content) {
  if (std::filesystem::exists(path)) {
    throw Error(ErrorCode::RunExists, "'" + path.string() + "' already exists");
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw Error(ErrorCode::Io, "failed writing '" + path.string() + "'");
}

void save_run_record(const std::filesystem::path& path, const RunRecord& record) {
  write_new_file(path, serialize_run_record(record));
}

std::vector<std::filesystem::path> list_run_files(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  if (!std::filesystem::is_directory(dir)) return out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".jsonl") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string sanitize_id(std::string_view id) {
  std::string out(id);
  for (char& c : out) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-';
    if (!ok) c = '_';
  }
  if (out.empty()) out = "_";
  return out;
}

}  // namespace faithlm::persistence
