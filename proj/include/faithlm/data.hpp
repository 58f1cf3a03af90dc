#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "faithlm/core.hpp"

namespace faithlm::data {

enum class DatasetFormat { MultipleChoice, ExtractiveQA };

/// Describes how to read a source JSONL file into Instances. `field_map` maps
/// canonical field names to source field names:
///   id, question, context, gold_answer, gold_explanation, original_answer
///     one source field each (strings)
///   choices   one array-valued source field, or a comma-separated list of
///             string fields ("choice1,choice2")
///   premise   enables the causal-reasoning shape: the question becomes
///             "What is the <question> of the Promise? Premise: <premise>"
/// Without an "id" mapping ids are "<name>-<line number>".
struct DatasetManifest {
  std::string name;
  DatasetFormat format = DatasetFormat::MultipleChoice;
  std::map<std::string, std::string> field_map;
  std::filesystem::path path;
  /// Keep only the first `limit` instances.
  std::optional<std::size_t> limit;

  /// Manifest for a canonical JSONL file (identity field map).
  static DatasetManifest canonical(std::filesystem::path path);

  void validate() const;
};

DatasetManifest manifest_from_json(const nlohmann::json& j,
                                   const std::filesystem::path& base_dir = {});
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Reads instances in file order. Blank lines are skipped. Throws
/// MalformedLine, MissingField or DuplicateId with the 1-based line number in
/// the message.
std::vector<Instance> load_instances(const DatasetManifest& manifest);

/// A .json path is read as a manifest, anything else as canonical JSONL.
std::vector<Instance> load_dataset(const std::filesystem::path& path);

/// Canonical JSONL object for one instance (optional fields omitted).
nlohmann::json instance_to_json(const Instance& instance);
Instance instance_from_json(const nlohmann::json& j);

std::string serialize_instances(std::span<const Instance> instances);
void save_instances(const std::filesystem::path& path, std::span<const Instance> instances);

/// SplitMix64 (Steele, Lea & Flood). State advances by 0x9E3779B97F4A7C15 per
/// draw; output is the standard xor-shift-multiply finalizer. Chosen because it
/// is a few lines in any language, so draws reproduce across ports.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next();

 private:
  std::uint64_t state_;
};

/// Seed for optimization round `round`: the first SplitMix64 draw from
/// seed ^ (round * 0xD1B54A32D192ED03).
std::uint64_t derive_round_seed(std::uint64_t seed, std::uint64_t round);

/// Partial Fisher-Yates: for i in [0, n), j = i + next() % (size - i), swap.
/// Returns the first n indices. Modulo bias is below 2^-50 for any realistic
/// dataset size.
std::vector<std::size_t> sample_indices(std::size_t size, std::size_t n, std::uint64_t seed);

/// Uniform sample without replacement. Throws SampleTooLarge when n > size.
std::vector<Instance> sample_holdout(std::span<const Instance> instances, std::size_t n,
                                     std::uint64_t seed);

}  // namespace faithlm::data
