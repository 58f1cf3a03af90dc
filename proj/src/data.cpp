#include "faithlm/data.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace faithlm::data {

namespace {

DatasetFormat format_from_string(const std::string& s) {
  if (s == "multiple_choice") return DatasetFormat::MultipleChoice;
  if (s == "extractive_qa") return DatasetFormat::ExtractiveQA;
  throw Error(ErrorCode::InvalidArgument, "unknown dataset format '" + s + "'");
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto t = text::trim(item);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

const nlohmann::json& require(const nlohmann::json& obj, const std::string& canonical,
                              const std::string& source, std::size_t line_no) {
  auto it = obj.find(source);
  if (it == obj.end() || it->is_null()) {
    throw Error(ErrorCode::MissingField, "field '" + canonical + "' (source '" + source +
                                             "') missing at line " + std::to_string(line_no));
  }
  return *it;
}

std::string as_text(const nlohmann::json& v, const std::string& field, std::size_t line_no) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw Error(ErrorCode::MalformedLine,
              "field '" + field + "' is not a string at line " + std::to_string(line_no));
}

}  // namespace

DatasetManifest DatasetManifest::canonical(std::filesystem::path path) {
  DatasetManifest m;
  m.name = path.stem().string();
  m.path = std::move(path);
  // Canonical files may mix multiple-choice and free-form rows.
  m.format = DatasetFormat::ExtractiveQA;
  for (const char* f : {"id", "question", "context", "choices", "gold_answer", "gold_explanation",
                        "original_answer"}) {
    m.field_map.emplace(f, f);
  }
  return m;
}

void DatasetManifest::validate() const {
  if (!field_map.contains("question")) {
    throw Error(ErrorCode::InvalidArgument, "manifest field_map must map 'question'");
  }
  if (!field_map.contains("choices") && !field_map.contains("gold_answer")) {
    throw Error(ErrorCode::InvalidArgument,
                "manifest field_map must map 'choices' or 'gold_answer'");
  }
}

DatasetManifest manifest_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  DatasetManifest m;
  try {
    m.name = j.value("name", std::string("dataset"));
    m.format = format_from_string(j.value("format", std::string("multiple_choice")));
    m.field_map = j.at("field_map").get<std::map<std::string, std::string>>();
    std::filesystem::path p = j.at("path").get<std::string>();
    m.path = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    if (j.contains("limit")) m.limit = j.at("limit").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed manifest: ") + e.what());
  }
  m.validate();
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open manifest '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, "manifest is not valid JSON: " + std::string(e.what()));
  }
  return manifest_from_json(j, path.parent_path());
}

std::vector<Instance> load_instances(const DatasetManifest& manifest) {
  manifest.validate();
  std::ifstream in(manifest.path);
  if (!in) throw Error(ErrorCode::Io, "cannot open dataset '" + manifest.path.string() + "'");

  const auto& fm = manifest.field_map;
  auto mapped = [&](const char* key) -> const std::string* {
    auto it = fm.find(key);
    return it == fm.end() ? nullptr : &it->second;
  };

  std::vector<Instance> out;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::is_blank(line)) continue;
    if (manifest.limit && out.size() >= *manifest.limit) break;

    nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
      throw Error(ErrorCode::MalformedLine, "line " + std::to_string(line_no) + " is not a JSON object");
    }

    Instance inst;
    if (const auto* src = mapped("id"); src && obj.contains(*src) && !obj.at(*src).is_null()) {
      inst.id = as_text(obj.at(*src), "id", line_no);
    } else {
      inst.id = manifest.name + "-" + std::to_string(line_no);
    }

    const std::string question =
        as_text(require(obj, "question", *mapped("question"), line_no), "question", line_no);
    if (const auto* premise_src = mapped("premise")) {
      const std::string premise =
          as_text(require(obj, "premise", *premise_src, line_no), "premise", line_no);
      inst.question = "What is the " + question + " of the Promise? Premise: " + premise;
    } else {
      inst.question = question;
    }

    if (const auto* src = mapped("context"); src && obj.contains(*src) && !obj.at(*src).is_null()) {
      inst.context = as_text(obj.at(*src), "context", line_no);
    }
    if (const auto* src = mapped("choices")) {
      const auto fields = split_commas(*src);
      if (fields.size() == 1) {
        const bool present = obj.contains(fields[0]) && !obj.at(fields[0]).is_null();
        if (present) {
          const auto& v = obj.at(fields[0]);
          if (!v.is_array()) {
            throw Error(ErrorCode::MalformedLine,
                        "choices are not an array at line " + std::to_string(line_no));
          }
          for (const auto& c : v) inst.choices.push_back(as_text(c, "choices", line_no));
        } else if (manifest.format == DatasetFormat::MultipleChoice) {
          require(obj, "choices", fields[0], line_no);
        }
      } else {
        for (const auto& f : fields) {
          inst.choices.push_back(as_text(require(obj, "choices", f, line_no), "choices", line_no));
        }
      }
    }
    auto optional_text = [&](const char* key) -> std::optional<std::string> {
      const auto* src = mapped(key);
      if (!src || !obj.contains(*src) || obj.at(*src).is_null()) return std::nullopt;
      return as_text(obj.at(*src), key, line_no);
    };
    inst.gold_answer = optional_text("gold_answer");
    inst.gold_explanation = optional_text("gold_explanation");
    if (auto oa = optional_text("original_answer")) inst.original_answer = *oa;
    if (obj.contains("original_probability") && obj.at("original_probability").is_number()) {
      inst.original_probability = obj.at("original_probability").get<double>();
    }

    try {
      validate(inst);
    } catch (const Error& e) {
      throw Error(e.code(), e.message() + " at line " + std::to_string(line_no));
    }
    if (!ids.insert(inst.id).second) {
      throw Error(ErrorCode::DuplicateId,
                  "duplicate id '" + inst.id + "' at line " + std::to_string(line_no));
    }
    out.push_back(std::move(inst));
  }
  return out;
}

std::vector<Instance> load_dataset(const std::filesystem::path& path) {
  if (path.extension() == ".json") return load_instances(load_manifest(path));
  return load_instances(DatasetManifest::canonical(path));
}

nlohmann::json instance_to_json(const Instance& instance) {
  nlohmann::json j = {{"id", instance.id}, {"question", instance.question}};
  if (instance.context) j["context"] = *instance.context;
  if (!instance.choices.empty()) j["choices"] = instance.choices;
  if (instance.gold_answer) j["gold_answer"] = *instance.gold_answer;
  if (instance.gold_explanation) j["gold_explanation"] = *instance.gold_explanation;
  if (!instance.original_answer.empty()) j["original_answer"] = instance.original_answer;
  if (instance.original_probability) j["original_probability"] = *instance.original_probability;
  return j;
}

Instance instance_from_json(const nlohmann::json& j) {
  try {
    Instance inst;
    inst.id = j.at("id").get<std::string>();
    inst.question = j.at("question").get<std::string>();
    if (j.contains("context")) inst.context = j.at("context").get<std::string>();
    if (j.contains("choices")) inst.choices = j.at("choices").get<std::vector<std::string>>();
    if (j.contains("gold_answer")) inst.gold_answer = j.at("gold_answer").get<std::string>();
    if (j.contains("gold_explanation")) {
      inst.gold_explanation = j.at("gold_explanation").get<std::string>();
    }
    inst.original_answer = j.value("original_answer", std::string());
    if (j.contains("original_probability")) {
      inst.original_probability = j.at("original_probability").get<double>();
    }
    return inst;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedLine, std::string("malformed instance: ") + e.what());
  }
}

std::string serialize_instances(std::span<const Instance> instances) {
  std::string out;
  for (const auto& inst : instances) {
    out += instance_to_json(inst).dump();
    out += '\n';
  }
  return out;
}

void save_instances(const std::filesystem::path& path, std::span<const Instance> instances) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  out << serialize_instances(instances);
  if (!out) throw Error(ErrorCode::Io, "failed writing '" + path.string() + "'");
}

std::uint64_t SplitMix64::next() {
  state_ += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_round_seed(std::uint64_t seed, std::uint64_t round) {
  return SplitMix64(seed ^ (round * 0xD1B54A32D192ED03ULL)).next();
}

std::vector<std::size_t> sample_indices(std::size_t size, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "sample size must be positive");
  if (n > size) {
    throw Error(ErrorCode::SampleTooLarge, "cannot sample " + std::to_string(n) + " of " +
                                               std::to_string(size) + " instances");
  }
  std::vector<std::size_t> idx(size);
  for (std::size_t i = 0; i < size; ++i) idx[i] = i;
  SplitMix64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.next() % (size - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  return idx;
}

std::vector<Instance> sample_holdout(std::span<const Instance> instances, std::size_t n,
                                     std::uint64_t seed) {
  std::vector<Instance> out;
  out.reserve(n);
  for (auto i : sample_indices(instances.size(), n, seed)) out.push_back(instances[i]);
  return out;
}

}  // namespace faithlm::data
