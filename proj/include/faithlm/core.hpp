#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "faithlm/errors.hpp"

namespace faithlm {

/// One task item. `original_answer` is the target model's answer to the plain
/// question; it is empty until filled in by answering the instance.
struct Instance {
  std::string id;
  std::string question;
  std::optional<std::string> context;
  std::vector<std::string> choices;
  std::string original_answer;
  std::optional<double> original_probability;
  std::optional<std::string> gold_answer;
  std::optional<std::string> gold_explanation;

  bool operator==(const Instance&) const = default;
};

/// Checks id/question are present and, when both choices and an original
/// answer are set, that the answer resolves to exactly one choice.
void validate(const Instance& instance);

/// Validates a whole dataset, including id uniqueness.
void validate_dataset(std::span<const Instance> instances);

enum class CandidateKind { Explanation, TriggerPrompt };

std::string_view to_string(CandidateKind kind);
CandidateKind candidate_kind_from_string(std::string_view s);

struct Candidate {
  CandidateKind kind = CandidateKind::Explanation;
  std::string text;
  /// Optimization round that produced it; 0 is the human-crafted seed.
  int step = 0;
  std::string parent_run;

  /// Throws EmptyCandidate if `text` is blank after trimming.
  static Candidate make(CandidateKind kind, std::string text, int step,
                        std::string parent_run = {});

  bool operator==(const Candidate&) const = default;
};

struct ContraryHint {
  std::string text;
  /// Text of the explanation candidate this hint negates.
  std::string source_text;

  /// Throws EmptyHint for blank text and HintEqualsSource when the trimmed,
  /// lowercased hint equals the trimmed, lowercased source.
  static ContraryHint make(std::string text, std::string source_text);

  bool operator==(const ContraryHint&) const = default;
};

enum class ScoreMode { Flip, Probability };

std::string_view to_string(ScoreMode mode);
ScoreMode score_mode_from_string(std::string_view s);

struct FidelityScore {
  double value = 0.0;
  ScoreMode mode = ScoreMode::Flip;
  std::string original_answer;
  std::string intervened_answer;
  bool flipped = false;

  /// Flip mode: value is the indicator of `flipped`.
  static FidelityScore flip(std::string original_answer, std::string intervened_answer,
                            bool flipped);
  /// Probability mode: throws InvalidArgument if value is outside [0, 1].
  static FidelityScore probability(double value, std::string original_answer,
                                   std::string intervened_answer, bool flipped);

  bool operator==(const FidelityScore&) const = default;
};

/// Per-round detail kept alongside explanation entries.
struct ExplanationDetail {
  std::string hint;
  std::string intervened_answer;
  bool flipped = false;
  /// The intervened reply matched no choice (or several) and was scored as a flip.
  bool intervened_parse_failure = false;

  bool operator==(const ExplanationDetail&) const = default;
};

/// Per-round detail kept alongside trigger-prompt entries.
struct HoldoutDetail {
  std::vector<std::string> instance_ids;
  std::vector<std::optional<double>> instance_scores;
  int excluded = 0;

  bool operator==(const HoldoutDetail&) const = default;
};

struct TrajectoryEntry {
  Candidate candidate;
  double score = 0.0;
  std::optional<ExplanationDetail> explanation;
  std::optional<HoldoutDetail> holdout;

  bool operator==(const TrajectoryEntry&) const = default;
};

enum class RunKind { ExplanationRun, TriggerRun };
enum class Termination { MaxSteps, DecisionFlip, BackendFailure };

std::string_view to_string(RunKind kind);
std::string_view to_string(Termination termination);
RunKind run_kind_from_string(std::string_view s);
Termination termination_from_string(std::string_view s);

struct RunRecord {
  std::string run_id;
  RunKind kind = RunKind::ExplanationRun;
  nlohmann::json config_snapshot = nlohmann::json::object();
  std::uint64_t rng_seed = 0;
  /// Instance an explanation run explains; absent for trigger runs.
  std::optional<Instance> instance;
  /// Wall-clock start, ISO-8601 UTC. Not part of determinism comparisons.
  std::string started_at;
  std::vector<TrajectoryEntry> entries;
  Termination termination = Termination::MaxSteps;
  std::optional<std::size_t> selected;
  int repeated_candidates = 0;
  std::string failure;

  /// Appends an entry, enforcing strictly increasing candidate steps and
  /// scores in [0, 1].
  void append(TrajectoryEntry entry);

  bool operator==(const RunRecord&) const = default;
};

/// Index of the maximal-score entry; earliest step wins ties.
std::optional<std::size_t> select_best(std::span<const TrajectoryEntry> entries);

/// Canonical answer: trim, ASCII casefold, strip surrounding punctuation. With
/// choices, returns the unique choice whose canonical form occurs as a whole
/// word sequence inside the canonical raw text.
std::string normalize_answer(std::string_view raw, std::span<const std::string> choices);

namespace text {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
std::string strip_punctuation(std::string_view s);
/// trim + lowercase + strip surrounding punctuation.
std::string canonical(std::string_view s);
bool contains_casefold(std::string_view haystack, std::string_view needle);
bool is_blank(std::string_view s);

}  // namespace text

}  // namespace faithlm
